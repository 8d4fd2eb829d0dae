// mskit: batch driver for the multiple-scattering toolkit.
//
// exit codes: 0 ok, 1 configuration error, 2 some energy points failed, 3 verification failed

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mskit/config.hpp"
#include "mskit/pipeline.hpp"
#include "mskit/report.hpp"
#include "mskit/verify.hpp"

namespace fs = std::filesystem;
using namespace mskit;

namespace {

constexpr int kExitOk = 0, kExitConfig = 1, kExitPartial = 2, kExitVerify = 3;

struct Common {
    std::string config;
    std::string out;
    int threads = 0;
};

RunConfig load(const Common& c) {
    if (c.config.empty()) throw ConfigError("--config is required");
    RunConfig cfg = load_config(c.config);
    if (c.threads > 0) cfg.threads = c.threads;
    if (!c.out.empty()) cfg.out = c.out;
    if (cfg.out.empty())
        if (const char* env = std::getenv("MSKIT_OUT")) cfg.out = env;
    if (cfg.out.empty()) cfg.out = "mskit-out";
    return cfg;
}

int cmd_gen_cluster(const Common& c) {
    const RunConfig cfg = load(c);
    const Model model = build_model(cfg);
    const fs::path p = fs::path(cfg.out) / "cluster.txt";
    fs::create_directories(p.parent_path());
    {
        std::ofstream o(p);
        o << "# mskit " << kVersion << " config " << config_hash(cfg) << "\n";
        write_cluster(o, model.cluster(), cfg.cluster.unit);
    }
    std::cout << model.cluster().size() << " sites -> " << p.string() << "\n";
    return kExitOk;
}

int cmd_solve(const Common& c) {
    const RunConfig cfg = load(c);
    const Model model = build_model(cfg);
    const auto sw = tau_sweep(model, cfg);
    write_tau_reports(cfg.out, model, cfg, sw);
    std::cout << "mode            max frobenius_rel   median nop\n";
    for (std::size_t m = 0; m < cfg.modes.size(); ++m) {
        double worst = 0;
        std::vector<double> nop;
        for (std::size_t k = m; k < sw.records.size(); k += cfg.modes.size()) {
            if (!sw.records[k].ok) continue;
            worst = std::max(worst, sw.records[k].err.frobenius_rel);
            nop.push_back(static_cast<double>(sw.records[k].result.nop));
        }
        std::sort(nop.begin(), nop.end());
        std::cout << std::left << std::setw(16) << to_string(cfg.modes[m]) << std::setw(20) << worst << (nop.empty() ? 0.0 : nop[nop.size() / 2]) << "\n";
    }
    for (const auto& r : sw.records)
        if (!r.ok) std::cerr << "E = " << r.energy << " " << to_string(r.mode.kind) << ": " << r.error << "\n";
    std::cout << "reports in " << cfg.out << "\n";
    return sw.failures > 0 ? kExitPartial : kExitOk;
}

int cmd_dos(const Common& c) {
    const RunConfig cfg = load(c);
    const Model model = build_model(cfg);
    std::vector<SolverMode> modes;
    for (Mode m : cfg.modes) modes.push_back(solver_mode(cfg, m));
    const auto d = dos_sweep(model, modes, cfg.energy.values(), cfg.broadening_ev / kEvPerHartree, cfg.threads);
    write_dos_reports(cfg.out, cfg, d);
    for (const auto& f : d.failures) std::cerr << f << "\n";
    std::cout << d.energies.size() << " energies, " << d.failures.size() << " failed; csv in " << cfg.out << "\n";
    return d.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_bench(const Common& c) {
    const RunConfig cfg = load(c);
    const Model model = build_model(cfg);
    const auto grid = cfg.energy.values();
    const auto rows = bench(model, cfg, grid[grid.size() / 2]);
    const fs::path p = fs::path(cfg.out) / "bench.csv";
    write_bench_csv(p, cfg, model, rows);
    const CostModel cm = CostModel::from_scheme(model.scheme(), cfg.p, cfg.c_s);
    std::cout << "a = " << model.scheme().a() << ", b = " << model.scheme().b() << "\n"
              << "predicted leading ratio ours/standard (p=" << cfg.p << ", c_s=" << cfg.c_s << "): tau_col "
              << 100 * predicted_ratio(cm, Task::tau_col) << "%, tau_diag " << 100 * predicted_ratio(cm, Task::tau_diag) << "%\n";
    std::cout << std::left << std::setw(10) << "task" << std::setw(13) << "mode" << std::setw(7) << "p" << std::setw(14) << "nop"
              << std::setw(14) << "predicted" << std::setw(11) << "wall_ms" << "c_s\n";
    for (const auto& r : rows)
        std::cout << std::setw(10) << to_string(r.task) << std::setw(13) << to_string(r.mode) << std::setw(7) << r.p << std::setw(14)
                  << r.nop_measured << std::setw(14) << static_cast<std::uint64_t>(r.predicted.total()) << std::setw(11) << std::setprecision(4)
                  << r.wall_ms << std::setprecision(3) << r.c_s_measured << "\n";
    std::cout << "csv in " << p.string() << "\n";
    return kExitOk;
}

int cmd_verify(std::optional<double> tol) {
    const auto checks = run_verification(tol);
    bool ok = true;
    std::cout << std::left << std::setw(58) << "check" << std::setw(14) << "value" << std::setw(12) << "tolerance" << "result\n";
    for (const auto& c : checks) {
        std::cout << std::setw(58) << c.name << std::setw(14) << std::setprecision(4) << c.value << std::setw(12) << c.tolerance
                  << (c.pass ? "pass" : "FAIL") << "\n";
        ok = ok && c.pass;
    }
    if (tol) std::cout << "tolerance override: " << *tol << "\n";
    return ok ? kExitOk : kExitVerify;
}

// Diff two solve/dos output directories on their numeric report content.
int cmd_compare(const std::string& a, const std::string& b, double tol) {
    double worst = 0;
    int compared = 0;
    const fs::path ra = fs::path(a) / "report.json", rb = fs::path(b) / "report.json";
    if (fs::exists(ra) && fs::exists(rb)) {
        nlohmann::json ja, jb;
        std::ifstream(ra) >> ja;
        std::ifstream(rb) >> jb;
        std::map<std::string, nlohmann::json> idx;
        auto key = [](const nlohmann::json& r) { return r["mode"].get<std::string>() + "@" + r["energy"].dump(); };
        for (const auto& r : jb["records"]) idx[key(r)] = r;
        for (const auto& r : ja["records"]) {
            auto it = idx.find(key(r));
            if (it == idx.end()) {
                std::cout << "only in " << a << ": " << key(r) << "\n";
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            for (const char* f : {"max_abs", "frobenius_rel"}) {
                if (r[f].is_null() || it->second[f].is_null()) continue;
                const double d = std::abs(r[f].get<double>() - it->second[f].get<double>());
                worst = std::max(worst, d);
                if (d > tol) std::cout << key(r) << " " << f << " differs by " << d << "\n";
            }
            ++compared;
        }
    }
    const fs::path da = fs::path(a) / "dos.csv", db = fs::path(b) / "dos.csv";
    if (fs::exists(da) && fs::exists(db)) {
        std::ifstream fa(da), fb(db);
        std::string la, lb;
        int line = 0;
        while (std::getline(fa, la) && std::getline(fb, lb)) {
            ++line;
            if (la.empty() || la[0] == '#' || line <= 2) continue;
            auto field = [](const std::string& s, int n) {
                std::stringstream ss(s);
                std::string x;
                for (int i = 0; i <= n; ++i) std::getline(ss, x, ',');
                return x;
            };
            const double d = std::abs(std::stod(field(la, 3)) - std::stod(field(lb, 3)));
            worst = std::max(worst, d);
            ++compared;
        }
    }
    if (compared == 0) {
        std::cerr << "nothing to compare (expected report.json or dos.csv in both directories)\n";
        return kExitConfig;
    }
    std::cout << compared << " entries compared, largest difference " << worst << " (tolerance " << tol << ")\n";
    return worst <= tol ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mskit: real-space multiple-scattering solver with partitioned inversion"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", common.config, "JSON run configuration")->required();
        s->add_option("--out", common.out, "output directory (falls back to MSKIT_OUT)");
        s->add_option("--threads", common.threads, "energy-level worker threads");
    };
    auto* gen = app.add_subcommand("gen-cluster", "write the resolved cluster file");
    auto* solve = app.add_subcommand("solve", "tau over the energy grid, every mode, error reports");
    auto* dos = app.add_subcommand("dos", "local DOS curves and deviation curves");
    auto* bench = app.add_subcommand("bench", "operation counts and timings at one energy");
    for (auto* s : {gen, solve, dos, bench}) add_common(s);
    auto* verify = app.add_subcommand("verify", "run the built-in oracle checks");
    double tol = -1;
    verify->add_option("--tolerance", tol, "replace every check tolerance");
    auto* compare = app.add_subcommand("compare", "diff two output directories");
    std::string dir_a, dir_b;
    double ctol = 1e-12;
    compare->add_option("first", dir_a)->required();
    compare->add_option("second", dir_b)->required();
    compare->add_option("--tolerance", ctol, "largest accepted difference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    try {
        if (*gen) return cmd_gen_cluster(common);
        if (*solve) return cmd_solve(common);
        if (*dos) return cmd_dos(common);
        if (*bench) return cmd_bench(common);
        if (*verify) return cmd_verify(tol >= 0 ? std::optional<double>(tol) : std::nullopt);
        if (*compare) return cmd_compare(dir_a, dir_b, ctol);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "config error: cluster file " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitOk;
}
