#pragma once

// Cluster -> t, g -> tau / DOS over an energy grid.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mskit/config.hpp"
#include "mskit/dos.hpp"
#include "mskit/opcount.hpp"
#include "mskit/partition.hpp"
#include "mskit/propagator.hpp"
#include "mskit/single_site.hpp"
#include "mskit/solver.hpp"

namespace mskit {

struct SpeciesModel {
    int id = 0;
    RadialPotential potential = RadialPotential::zero(1.0, 16);
    double rin = 1.0;
    double aniso_strength = 0;
    double aniso_decay = 1;
};

/// Everything fixed across the energy grid.
class Model {
public:
    Model(Cluster cluster, int l_max, std::map<int, SpeciesModel> species, std::uint64_t seed)
        : cluster_(std::move(cluster)), l_max_(l_max), species_(std::move(species)), seed_(seed), gaunt_(l_max),
          scheme_(PartitionScheme::from_cluster(cluster_, l_max)) {
        cluster_.check_lpt(l_max);
        for (int i = 0; i < cluster_.size(); ++i)
            if (!species_.count(cluster_.site(i).species))
                throw ConfigError("species " + std::to_string(cluster_.site(i).species) + " is used by the cluster but has no potential");
    }

    const Cluster& cluster() const noexcept { return cluster_; }
    int l_max() const noexcept { return l_max_; }
    const PartitionScheme& scheme() const noexcept { return scheme_; }
    const std::map<int, SpeciesModel>& species() const noexcept { return species_; }
    const GauntTable& gaunt() const noexcept { return gaunt_; }

    /// Single-site data for every species at one energy.
    std::map<int, SiteScatterer> scatterers(cplx E, bool with_irregular) const {
        std::map<int, SiteScatterer> out;
        for (const auto& [id, sp] : species_) {
            auto s = solve_site(sp.potential, l_max_, E, with_irregular);
            if (sp.aniso_strength > 0)
                s.matrices.t_mat = synthetic_anisotropic_t(s.matrices.t_mat, sp.aniso_strength, sp.aniso_decay,
                                                           seed_ ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(id + 1)));
            out.emplace(id, std::move(s));
        }
        return out;
    }

    ScatteringSystem system(cplx E, const std::map<int, SiteScatterer>& sc) const {
        std::vector<MatrixXc> t;
        for (int i = 0; i < cluster_.size(); ++i) t.push_back(sc.at(cluster_.site(i).species).matrices.t_mat);
        return ScatteringSystem{scheme_, std::move(t), structure_constants(cluster_, wave_number(E), l_max_, gaunt_)};
    }

    ScatteringSystem system(cplx E) const { return system(E, scatterers(E, false)); }

private:
    Cluster cluster_;
    int l_max_;
    std::map<int, SpeciesModel> species_;
    std::uint64_t seed_;
    GauntTable gaunt_;
    PartitionScheme scheme_;
};

inline Cluster build_cluster(const ClusterSpec& s) {
    const auto L = [&](double v) { return to_bohr(v, s.unit); };
    if (s.generator == "fcc") return build_fcc(L(s.lattice_a), L(s.radius));
    if (s.generator == "diamond") return build_diamond(L(s.lattice_a), L(s.radius));
    if (s.generator == "honeycomb") return build_honeycomb(L(s.bond), L(s.radius), s.empty_cells);
    if (s.generator == "fcc_first_shell") return build_fcc_first_shell(L(s.lattice_a));
    if (s.generator == "shells") {
        std::vector<Vec3> p;
        for (const auto& x : s.positions) p.push_back({L(x[0]), L(x[1]), L(x[2])});
        return build_shells(p);
    }
    if (s.generator == "file") return load_cluster(s.path);
    throw ConfigError("cluster.generator: unknown generator '" + s.generator + "'");
}

/// Cluster plus species table resolved against the config: lpt and rb from the
/// config, else from the cluster file, else lpt = l_max and rb = half the
/// shortest site separation.
inline Model build_model(const RunConfig& cfg) {
    Cluster c;
    try {
        c = build_cluster(cfg.cluster);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("cluster: ") + e.what());
    }
    const bool from_file = cfg.cluster.generator == "file";
    const double touching = c.size() > 1 ? 0.5 * c.min_separation() : 0.0;
    std::vector<Species> table;
    std::map<int, SpeciesModel> models;
    std::set<int> used;
    for (const auto& s : c.sites()) used.insert(s.species);
    for (const auto& sp : cfg.species) {
        Species row{sp.id, cfg.l_max, 0.0};
        const Species* file_row = nullptr;
        if (from_file) {
            for (const auto& r : c.species_table())
                if (r.id == sp.id) file_row = &r;
        }
        row.lpt = sp.lpt ? *sp.lpt : (file_row ? file_row->lpt : cfg.l_max);
        if (row.lpt > cfg.l_max)
            throw ConfigError("species " + std::to_string(sp.id) + ": lpt=" + std::to_string(row.lpt) + " exceeds l_max=" + std::to_string(cfg.l_max));
        row.rb = sp.rb ? *sp.rb : (file_row ? file_row->rb : touching);
        if (!(row.rb > 0)) throw ConfigError("species " + std::to_string(sp.id) + ": rb must be given for a single-site cluster");
        table.push_back(row);

        SpeciesModel m;
        m.id = sp.id;
        m.rin = sp.rin ? *sp.rin : row.rb;
        if (m.rin < 0 || m.rin > row.rb) throw ConfigError("species " + std::to_string(sp.id) + ".rin: must lie in [0, rb]");
        try {
            switch (sp.kind) {
                case PotentialKind::zero: m.potential = RadialPotential::zero(row.rb, sp.npts); break;
                case PotentialKind::square_well: m.potential = RadialPotential::square_well(sp.v0, row.rb, sp.npts); break;
                case PotentialKind::soft_coulomb: m.potential = RadialPotential::soft_coulomb(sp.z, sp.a, row.rb, sp.npts); break;
                case PotentialKind::file:
                    m.potential = load_potential(sp.file, sp.npts);
                    if (std::abs(m.potential.rb() - row.rb) > 1e-9 * row.rb)
                        throw ConfigError("species " + std::to_string(sp.id) + ": potential file rb differs from species rb");
                    break;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("species " + std::to_string(sp.id) + ": " + e.what());
        }
        m.aniso_strength = sp.aniso_strength;
        m.aniso_decay = sp.aniso_decay;
        models.emplace(sp.id, std::move(m));
    }
    for (int id : used)
        if (!models.count(id)) throw ConfigError("species " + std::to_string(id) + " is used by the cluster but missing from 'species'");
    Cluster resolved;
    try {
        resolved = c.with_species(table);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("species: ") + e.what());
    }
    if (cfg.site0 < 0 || cfg.site0 >= resolved.size()) throw ConfigError("site0: outside the cluster");
    return Model(std::move(resolved), cfg.l_max, std::move(models), cfg.seed);
}

// ---------------------------------------------------------------------------

/// Runs f(k) for k in [0, n) on `threads` workers; work assignment is static so
/// results land in fixed slots.
template <class F>
void parallel_for(int n, int threads, F&& f) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int k = 0; k < n; ++k) f(k);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (int k = w; k < n; k += threads) f(k);
        });
    for (auto& t : pool) t.join();
}

struct TauRecord {
    cplx energy;
    SolverMode mode;
    bool ok = false;
    std::string error;
    TauResult result;
    ErrorMetrics err;
    NopPrediction predicted;
    bool kept_fraction_flag = false;  // reuse mode drifted outside [p/2, 2p]
};

struct TauSweep {
    std::vector<cplx> energies;
    std::vector<TauRecord> records;  // energy-major, modes in config order
    int failures = 0;
};

inline SolverMode solver_mode(const RunConfig& cfg, Mode m) {
    SolverMode s(m);
    if (m == Mode::ours_sparse) {
        s.p = cfg.p;
        s.scope = cfg.scope;
    }
    return s;
}

inline TauSweep tau_sweep(const Model& model, const RunConfig& cfg) {
    TauSweep sw;
    sw.energies = cfg.energy.values();
    const int ne = static_cast<int>(sw.energies.size());
    const int nm = static_cast<int>(cfg.modes.size());
    sw.records.resize(static_cast<std::size_t>(ne * nm));
    const CostModel cost = CostModel::from_scheme(model.scheme(), cfg.p, cfg.c_s);
    std::optional<double> reuse;
    // threshold reuse chains energies, so it runs in order
    const int threads = cfg.reuse_threshold ? 1 : cfg.threads;

    parallel_for(ne, threads, [&](int k) {
        const cplx E = sw.energies[static_cast<std::size_t>(k)];
        std::optional<ScatteringSystem> sys;
        std::optional<TauResult> ref;
        std::string sys_error;
        try {
            sys.emplace(model.system(E));
            ref = solve_tau(*sys, cfg.task, SolverMode::standard(), cfg.site0);
        } catch (const std::exception& e) {
            sys_error = e.what();
        }
        for (int m = 0; m < nm; ++m) {
            auto& rec = sw.records[static_cast<std::size_t>(k * nm + m)];
            rec.energy = E;
            rec.mode = solver_mode(cfg, cfg.modes[static_cast<std::size_t>(m)]);
            if (rec.mode.kind == Mode::ours_sparse && cfg.reuse_threshold && reuse) rec.mode.threshold = reuse;
            rec.predicted = predict_nop(cost, cfg.task, rec.mode.kind);
            if (!ref) {
                rec.error = sys_error;
                continue;
            }
            try {
                rec.result = rec.mode.kind == Mode::standard ? *ref : solve_tau(*sys, cfg.task, rec.mode, cfg.site0);
                rec.err = error_metrics(rec.result, *ref);
                rec.ok = std::all_of(rec.result.blocks.begin(), rec.result.blocks.end(), [](const MatrixXc& b) { return b.allFinite(); });
                if (!rec.ok) rec.error = "non-finite tau";
                if (rec.mode.kind == Mode::ours_sparse && cfg.reuse_threshold) {
                    if (!reuse) reuse = rec.result.threshold;
                    else rec.kept_fraction_flag = rec.result.kept_fraction < 0.5 * cfg.p || rec.result.kept_fraction > 2 * cfg.p;
                }
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
    });
    for (const auto& r : sw.records)
        if (!r.ok) ++sw.failures;
    return sw;
}

// ---------------------------------------------------------------------------

struct DosSweep {
    std::vector<cplx> energies;
    std::vector<Mode> modes;
    // [mode][site][energy]
    std::vector<std::vector<std::vector<double>>> n;
    std::vector<std::vector<std::vector<bool>>> valid;
    std::vector<std::string> failures;  // one line per failed energy point
};

/// Local DOS of every site for every mode; failed points are recorded and skipped.
inline DosSweep dos_sweep(const Model& model, const std::vector<SolverMode>& modes, const std::vector<cplx>& grid,
                          double sigma_hartree = 0, int threads = 1) {
    DosSweep out;
    out.energies = grid;
    for (const auto& m : modes) out.modes.push_back(m.kind);
    const int N = model.cluster().size();
    const auto ne = grid.size();
    out.n.assign(modes.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(N), std::vector<double>(ne, 0.0)));
    out.valid.assign(modes.size(), std::vector<std::vector<bool>>(static_cast<std::size_t>(N), std::vector<bool>(ne, false)));
    std::vector<std::string> fail(ne);

    parallel_for(static_cast<int>(ne), threads, [&](int k) {
        const cplx E = grid[static_cast<std::size_t>(k)];
        try {
            const auto sc = model.scatterers(E, true);
            std::map<int, RhoIntegrals> rho;
            std::map<int, std::optional<Matrix>> Sinv;
            for (const auto& [id, s] : sc) {
                rho.emplace(id, rho_integrals(s, model.species().at(id).rin));
                Sinv.emplace(id, invert_S(s.matrices.S_mat));
            }
            const auto sys = model.system(E, sc);
            for (std::size_t m = 0; m < modes.size(); ++m) {
                const auto tau = tau_site_diagonal(sys, modes[m]);
                for (int i = 0; i < N; ++i) {
                    const int id = model.cluster().site(i).species;
                    const auto& si = Sinv.at(id);
                    if (!si) continue;
                    const auto v = local_dos(tau.blocks[static_cast<std::size_t>(i)], *si, rho.at(id));
                    out.n[m][static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = v.n;
                    out.valid[m][static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = v.valid;
                }
            }
            for (const auto& [id, si] : Sinv)
                if (!si) fail[static_cast<std::size_t>(k)] = "singular S for species " + std::to_string(id);
        } catch (const std::exception& e) {
            fail[static_cast<std::size_t>(k)] = e.what();
        }
    });
    for (std::size_t k = 0; k < ne; ++k)
        if (!fail[k].empty())
            out.failures.push_back("E = (" + std::to_string(grid[k].real()) + ", " + std::to_string(grid[k].imag()) + "): " + fail[k]);

    if (sigma_hartree > 0 && ne > 1) {
        std::vector<double> x;
        for (const auto& e : grid) x.push_back(e.real());
        for (std::size_t m = 0; m < modes.size(); ++m)
            for (int i = 0; i < N; ++i)
                out.n[m][static_cast<std::size_t>(i)] =
                    gaussian_broaden(x, out.n[m][static_cast<std::size_t>(i)], sigma_hartree, out.valid[m][static_cast<std::size_t>(i)]);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct BenchRow {
    Task task = Task::tau_col;
    Mode mode = Mode::standard;
    double p = 1;
    std::uint64_t nop_measured = 0;
    NopPrediction predicted;
    double wall_ms = 0;
    double c_s_measured = 0;  // sparse rows only
    double frobenius_rel = 0;
};

namespace detail {

// Time per multiplication of the sparse B C product relative to the dense one.
inline double measure_c_s(const PartitionedM& P, const SparseMatrix& Bs) {
    if (Bs.nnz() == 0 || P.B.size() == 0) return 0;
    auto time_ms = [](auto&& f) {
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            f();
            best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    volatile double sink = 0;
    const double td = time_ms([&] { sink = sink + std::abs(counted_product(P.B, P.C, nullptr)(0, 0)); });
    const double ts = time_ms([&] { sink = sink + std::abs(Bs.times(P.C, nullptr)(0, 0)); });
    const double per_dense = td / (static_cast<double>(P.B.rows()) * static_cast<double>(P.B.cols()) * static_cast<double>(P.C.cols()));
    const double per_sparse = ts / (static_cast<double>(Bs.nnz()) * static_cast<double>(P.C.cols()));
    return per_dense > 0 ? per_sparse / per_dense : 0;
}

}  // namespace detail

/// One energy point, both tasks, every configured mode plus a p sweep of the sparse mode.
inline std::vector<BenchRow> bench(const Model& model, const RunConfig& cfg, cplx E) {
    const auto sys = model.system(E);
    std::vector<BenchRow> rows;
    std::vector<double> ps{1.0, 0.1, 0.03, 0.01};
    if (std::find(ps.begin(), ps.end(), cfg.p) == ps.end()) ps.push_back(cfg.p);
    std::sort(ps.begin(), ps.end(), std::greater<>());
    const PartitionedM P = partition(assemble_M(sys.t, sys.g), sys.scheme, false);

    for (Task task : {Task::tau_col, Task::tau_diag}) {
        const auto ref = solve_tau(sys, task, SolverMode::standard(), cfg.site0);
        std::vector<SolverMode> modes;
        for (Mode m : cfg.modes)
            if (m != Mode::ours_sparse) modes.push_back(solver_mode(cfg, m));
        for (double p : ps) modes.push_back(SolverMode::ours_sparse(p));
        for (const auto& m : modes) {
            const auto r = m.kind == Mode::standard ? ref : solve_tau(sys, task, m, cfg.site0);
            BenchRow row;
            row.task = task;
            row.mode = m.kind;
            row.p = m.kind == Mode::ours_sparse ? m.p : 1.0;
            row.nop_measured = r.nop;
            CostModel cm = CostModel::from_scheme(sys.scheme, row.p, cfg.c_s);
            row.predicted = predict_nop(cm, task, m.kind);
            row.wall_ms = r.wall_ms;
            row.frobenius_rel = error_metrics(r, ref).frobenius_rel;
            if (m.kind == Mode::ours_sparse && P.B.size() > 0) row.c_s_measured = detail::measure_c_s(P, sparsify_B(P.B, m.p).B);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace mskit
