#pragma once

// Run configuration: one JSON document, validated before anything is computed.
// Unknown keys are errors. Lengths follow cluster.unit; energies follow energy.unit.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mskit/cluster.hpp"
#include "mskit/dos.hpp"
#include "mskit/solver.hpp"

namespace mskit {

inline constexpr const char* kVersion = "0.3.1";

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ClusterSpec {
    std::string generator = "fcc_first_shell";  // fcc | diamond | honeycomb | fcc_first_shell | shells | file
    LengthUnit unit = LengthUnit::angstrom;
    double lattice_a = 3.61;
    double radius = 0;
    double bond = 1.42;
    bool empty_cells = true;
    std::vector<Vec3> positions;
    std::string path;
};

enum class PotentialKind { zero, square_well, soft_coulomb, file };

struct SpeciesSpec {
    int id = 0;
    std::optional<int> lpt;        // falls back to the cluster file, then to l_max
    std::optional<double> rb;      // Bohr
    std::optional<double> rin;     // Bohr, default rb
    int npts = 800;
    PotentialKind kind = PotentialKind::square_well;
    double v0 = -0.5;              // square well depth, Hartree
    double z = 1.0, a = 0.5;       // soft Coulomb
    std::string file;
    double aniso_strength = 0;     // synthetic off-diagonal t
    double aniso_decay = 1.0;
};

struct EnergyGrid {
    double start = 0.1, stop = 1.0;  // Hartree after parsing
    int points = 30;
    double imag = 1e-3;              // Hartree

    std::vector<cplx> values() const {
        std::vector<cplx> e;
        for (int k = 0; k < points; ++k) {
            const double x = points == 1 ? start : start + (stop - start) * k / (points - 1);
            e.emplace_back(x, imag);
        }
        return e;
    }
};

struct RunConfig {
    ClusterSpec cluster;
    std::vector<SpeciesSpec> species;
    int l_max = 4;
    EnergyGrid energy;
    std::vector<Mode> modes{Mode::standard, Mode::ours_dense, Mode::zhang};
    Task task = Task::tau_col;
    int site0 = 0;
    double p = 0.01;
    SparsifyScope scope = SparsifyScope::global;
    bool reuse_threshold = false;
    double c_s = 1.0;
    double broadening_ev = 0;
    std::string out;
    std::uint64_t seed = 12345;
    int threads = 1;
    bool timing = false;
    std::string canonical;  // normalised JSON used for the config hash
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline std::string config_hash(const RunConfig& c) {
    std::ostringstream o;
    o << std::hex;
    o.width(16);
    o.fill('0');
    o << detail::fnv1a(c.canonical);
    return o.str();
}

inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::get_or;
    RunConfig c;
    check_keys(j, {"cluster", "species", "l_max", "energy", "modes", "task", "site0", "sparsify", "c_s", "broadening_ev", "out",
                   "seed", "threads", "timing"},
               "config");

    if (j.contains("cluster")) {
        const auto& cj = j.at("cluster");
        check_keys(cj, {"generator", "unit", "lattice_a", "radius", "bond", "empty_cells", "positions", "path"}, "cluster");
        auto& s = c.cluster;
        s.generator = get_or<std::string>(cj, "generator", s.generator, "cluster");
        try {
            s.unit = parse_length_unit(get_or<std::string>(cj, "unit", "angstrom", "cluster"));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("cluster.unit: ") + e.what());
        }
        s.lattice_a = get_or(cj, "lattice_a", s.lattice_a, "cluster");
        s.radius = get_or(cj, "radius", s.radius, "cluster");
        s.bond = get_or(cj, "bond", s.bond, "cluster");
        s.empty_cells = get_or(cj, "empty_cells", s.empty_cells, "cluster");
        s.path = get_or<std::string>(cj, "path", "", "cluster");
        if (cj.contains("positions")) {
            for (const auto& p : cj.at("positions")) {
                if (!p.is_array() || p.size() != 3) throw ConfigError("cluster.positions: each entry needs 3 coordinates");
                s.positions.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
            }
        }
        static const std::set<std::string> gens{"fcc", "diamond", "honeycomb", "fcc_first_shell", "shells", "file"};
        if (!gens.count(s.generator)) throw ConfigError("cluster.generator: unknown generator '" + s.generator + "'");
        if (s.generator == "file" && s.path.empty()) throw ConfigError("cluster.path: required for generator 'file'");
        if (s.generator == "shells" && s.positions.empty()) throw ConfigError("cluster.positions: required for generator 'shells'");
        if (!(s.lattice_a > 0)) throw ConfigError("cluster.lattice_a: must be positive");
        if (!(s.bond > 0)) throw ConfigError("cluster.bond: must be positive");
        if (s.radius < 0) throw ConfigError("cluster.radius: must be non-negative");
    }

    c.l_max = get_or(j, "l_max", c.l_max, "config");
    if (c.l_max < 0 || c.l_max > 12) throw ConfigError("l_max: must lie in [0, 12]");

    if (j.contains("species")) {
        if (!j.at("species").is_array()) throw ConfigError("species: expected an array");
        std::set<int> seen;
        for (const auto& sj : j.at("species")) {
            const std::string where = "species[" + std::to_string(c.species.size()) + "]";
            check_keys(sj, {"id", "lpt", "rb", "rin", "npts", "zero", "square_well", "soft_coulomb", "potential_file", "anisotropy"}, where);
            SpeciesSpec s;
            s.id = get_or(sj, "id", 0, where);
            if (!seen.insert(s.id).second) throw ConfigError(where + ".id: duplicate species id " + std::to_string(s.id));
            if (sj.contains("lpt")) s.lpt = get_or(sj, "lpt", 0, where);
            if (sj.contains("rb")) s.rb = get_or(sj, "rb", 0.0, where);  // Bohr
            if (sj.contains("rin")) s.rin = get_or(sj, "rin", 0.0, where);
            s.npts = get_or(sj, "npts", s.npts, where);
            if (s.npts < 16) throw ConfigError(where + ".npts: need at least 16 mesh points");
            if (s.lpt && (*s.lpt < 0 || *s.lpt > c.l_max))
                throw ConfigError(where + ".lpt: " + std::to_string(*s.lpt) + " outside [0, l_max=" + std::to_string(c.l_max) + "]");
            if (s.rb && !(*s.rb > 0)) throw ConfigError(where + ".rb: must be positive");
            if (s.rin && s.rb && (*s.rin < 0 || *s.rin > *s.rb)) throw ConfigError(where + ".rin: must lie in [0, rb]");
            int npot = 0;
            if (sj.contains("zero")) {
                ++npot;
                s.kind = PotentialKind::zero;
                check_keys(sj.at("zero"), {}, where + ".zero");
            }
            if (sj.contains("square_well")) {
                ++npot;
                s.kind = PotentialKind::square_well;
                const auto& w = sj.at("square_well");
                check_keys(w, {"v0", "rb"}, where + ".square_well");
                s.v0 = get_or(w, "v0", s.v0, where + ".square_well");
                if (w.contains("rb")) {
                    const double r = get_or(w, "rb", 0.0, where + ".square_well");
                    if (s.rb && std::abs(*s.rb - r) > 1e-12) throw ConfigError(where + ".square_well.rb: conflicts with species rb");
                    s.rb = r;
                }
            }
            if (sj.contains("soft_coulomb")) {
                ++npot;
                s.kind = PotentialKind::soft_coulomb;
                const auto& w = sj.at("soft_coulomb");
                check_keys(w, {"z", "a"}, where + ".soft_coulomb");
                s.z = get_or(w, "z", s.z, where + ".soft_coulomb");
                s.a = get_or(w, "a", s.a, where + ".soft_coulomb");
                if (!(s.a > 0)) throw ConfigError(where + ".soft_coulomb.a: must be positive");
            }
            if (sj.contains("potential_file")) {
                ++npot;
                s.kind = PotentialKind::file;
                s.file = get_or<std::string>(sj, "potential_file", "", where);
            }
            if (npot > 1) throw ConfigError(where + ": give exactly one of zero, square_well, soft_coulomb, potential_file");
            if (sj.contains("anisotropy")) {
                const auto& w = sj.at("anisotropy");
                check_keys(w, {"strength", "decay"}, where + ".anisotropy");
                s.aniso_strength = get_or(w, "strength", 0.0, where + ".anisotropy");
                s.aniso_decay = get_or(w, "decay", 1.0, where + ".anisotropy");
                if (s.aniso_strength < 0) throw ConfigError(where + ".anisotropy.strength: must be non-negative");
            }
            c.species.push_back(s);
        }
    }

    if (j.contains("energy")) {
        const auto& ej = j.at("energy");
        check_keys(ej, {"start", "stop", "points", "imag", "unit"}, "energy");
        const std::string unit = get_or<std::string>(ej, "unit", "hartree", "energy");
        double scale = 1.0;
        if (unit == "ev") scale = 1.0 / kEvPerHartree;
        else if (unit != "hartree") throw ConfigError("energy.unit: expected 'hartree' or 'ev'");
        c.energy.start = get_or(ej, "start", c.energy.start / scale, "energy") * scale;
        c.energy.stop = get_or(ej, "stop", c.energy.stop / scale, "energy") * scale;
        c.energy.imag = get_or(ej, "imag", c.energy.imag / scale, "energy") * scale;
        c.energy.points = get_or(ej, "points", c.energy.points, "energy");
    }
    if (c.energy.points < 1) throw ConfigError("energy.points: must be at least 1");
    if (c.energy.points > 1 && !(c.energy.stop > c.energy.start)) throw ConfigError("energy.stop: must exceed energy.start");
    if (c.energy.imag < 0) throw ConfigError("energy.imag: must be non-negative");

    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& m : j.at("modes")) {
            try {
                c.modes.push_back(parse_mode(m.get<std::string>()));
            } catch (const std::exception& e) {
                throw ConfigError(std::string("modes: ") + e.what());
            }
        }
        if (c.modes.empty()) throw ConfigError("modes: at least one mode required");
    }
    const std::string task = get_or<std::string>(j, "task", "tau_col", "config");
    if (task == "tau_col") c.task = Task::tau_col;
    else if (task == "tau_diag") c.task = Task::tau_diag;
    else throw ConfigError("task: expected 'tau_col' or 'tau_diag'");
    c.site0 = get_or(j, "site0", 0, "config");

    if (j.contains("sparsify")) {
        const auto& sj = j.at("sparsify");
        check_keys(sj, {"p", "scope", "reuse_threshold"}, "sparsify");
        c.p = get_or(sj, "p", c.p, "sparsify");
        const std::string scope = get_or<std::string>(sj, "scope", "global", "sparsify");
        if (scope == "global") c.scope = SparsifyScope::global;
        else if (scope == "per_block") c.scope = SparsifyScope::per_block;
        else throw ConfigError("sparsify.scope: expected 'global' or 'per_block'");
        c.reuse_threshold = get_or(sj, "reuse_threshold", false, "sparsify");
    }
    if (!(c.p > 0 && c.p <= 1)) throw ConfigError("sparsify.p: must lie in (0, 1]");
    c.c_s = get_or(j, "c_s", c.c_s, "config");
    if (!(c.c_s >= 1)) throw ConfigError("c_s: must be >= 1");
    c.broadening_ev = get_or(j, "broadening_ev", c.broadening_ev, "config");
    if (c.broadening_ev < 0) throw ConfigError("broadening_ev: must be non-negative");
    c.out = get_or<std::string>(j, "out", "", "config");
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
    c.threads = get_or(j, "threads", c.threads, "config");
    if (c.threads < 1) throw ConfigError("threads: must be at least 1");
    c.timing = get_or(j, "timing", c.timing, "config");
    c.canonical = j.dump();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
}

}  // namespace mskit
