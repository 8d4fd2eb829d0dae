#pragma once

// JSON / CSV emitters. Every file carries the toolkit version and the config hash.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mskit/config.hpp"
#include "mskit/pipeline.hpp"

namespace mskit {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path().empty() ? std::filesystem::path(".") : p.parent_path());
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    return out;
}

// shortest round-trip representation
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void csv_header(std::ostream& o, const RunConfig& cfg) {
    o << "# mskit " << kVersion << " config " << config_hash(cfg) << "\n";
}

}  // namespace detail

inline nlohmann::json tau_report_json(const Model& model, const RunConfig& cfg, const TauSweep& sw) {
    using nlohmann::json;
    json recs = json::array();
    for (const auto& r : sw.records) {
        json j;
        j["mode"] = to_string(r.mode.kind);
        j["task"] = to_string(cfg.task);
        j["l_max"] = cfg.l_max;
        j["l_pt_map"] = model.scheme().lpt_map();
        j["p"] = r.mode.kind == Mode::ours_sparse ? r.mode.p : 1.0;
        j["energy"] = {r.energy.real(), r.energy.imag()};
        j["status"] = r.ok ? "ok" : "failed";
        if (!r.ok) j["error"] = r.error;
        j["max_abs"] = r.ok ? json(r.err.max_abs) : json(nullptr);
        j["frobenius_rel"] = r.ok ? json(r.err.frobenius_rel) : json(nullptr);
        j["nop_predicted"] = r.predicted.total();
        j["nop_predicted_leading"] = r.predicted.leading;
        j["nop_measured"] = r.ok ? json(r.result.nop) : json(nullptr);
        j["wall_ms"] = (r.ok && cfg.timing) ? json(r.result.wall_ms) : json(nullptr);
        j["rcond"] = r.ok ? json(r.result.rcond) : json(nullptr);
        if (r.mode.kind == Mode::ours_sparse) {
            j["threshold"] = r.result.threshold;
            j["kept_fraction"] = r.result.kept_fraction;
            j["kept_fraction_flag"] = r.kept_fraction_flag;
        }
        recs.push_back(j);
    }
    json top;
    top["version"] = kVersion;
    top["config_hash"] = config_hash(cfg);
    top["n_sites"] = model.cluster().size();
    top["a"] = model.scheme().a();
    top["b"] = model.scheme().b();
    top["site0"] = cfg.site0;
    top["failures"] = sw.failures;
    top["records"] = recs;
    return top;
}

/// report.json, tau_errors.csv and, for tau_col, tau.csv with the tau^{i0} blocks.
inline void write_tau_reports(const std::filesystem::path& dir, const Model& model, const RunConfig& cfg, const TauSweep& sw) {
    {
        auto o = detail::open_out(dir / "report.json");
        o << std::setw(2) << tau_report_json(model, cfg, sw) << "\n";
    }
    {
        auto o = detail::open_out(dir / "tau_errors.csv");
        detail::csv_header(o, cfg);
        o << "energy_re,energy_im,mode,p,max_abs,frobenius_rel,nop_measured,nop_predicted,rcond,valid\n";
        for (const auto& r : sw.records) {
            o << detail::num(r.energy.real()) << ',' << detail::num(r.energy.imag()) << ',' << to_string(r.mode.kind) << ','
              << detail::num(r.mode.kind == Mode::ours_sparse ? r.mode.p : 1.0) << ',' << detail::num(r.err.max_abs) << ','
              << detail::num(r.err.frobenius_rel) << ',' << r.result.nop << ',' << detail::num(r.predicted.total()) << ','
              << detail::num(r.result.rcond) << ',' << (r.ok ? 1 : 0) << "\n";
        }
    }
    {
        auto o = detail::open_out(dir / "tau.csv");
        detail::csv_header(o, cfg);
        o << "energy_re,energy_im,mode,site,L_row,L_col,re,im\n";
        for (const auto& r : sw.records) {
            if (!r.ok) continue;
            for (std::size_t i = 0; i < r.result.blocks.size(); ++i) {
                const auto& b = r.result.blocks[i];
                for (Eigen::Index x = 0; x < b.rows(); ++x)
                    for (Eigen::Index y = 0; y < b.cols(); ++y)
                        o << detail::num(r.energy.real()) << ',' << detail::num(r.energy.imag()) << ',' << to_string(r.mode.kind) << ','
                          << i << ',' << x << ',' << y << ',' << detail::num(b(x, y).real()) << ',' << detail::num(b(x, y).imag()) << "\n";
            }
        }
    }
}

/// dos.csv (states per eV) and dos_deviations.csv (each mode minus standard).
inline void write_dos_reports(const std::filesystem::path& dir, const RunConfig& cfg, const DosSweep& d) {
    const double per_ev = 1.0 / kEvPerHartree;
    {
        auto o = detail::open_out(dir / "dos.csv");
        detail::csv_header(o, cfg);
        o << "energy_eV,site_id,mode,n_states_per_eV,valid\n";
        for (std::size_t k = 0; k < d.energies.size(); ++k)
            for (std::size_t m = 0; m < d.modes.size(); ++m)
                for (std::size_t i = 0; i < d.n[m].size(); ++i)
                    o << detail::num(d.energies[k].real() * kEvPerHartree) << ',' << i << ',' << to_string(d.modes[m]) << ','
                      << detail::num(d.n[m][i][k] * per_ev) << ',' << (d.valid[m][i][k] ? 1 : 0) << "\n";
    }
    std::size_t ref = d.modes.size();
    for (std::size_t m = 0; m < d.modes.size(); ++m)
        if (d.modes[m] == Mode::standard) ref = m;
    auto o = detail::open_out(dir / "dos_deviations.csv");
    detail::csv_header(o, cfg);
    o << "energy_eV,site_id,mode,deviation_states_per_eV,valid\n";
    if (ref == d.modes.size()) return;
    for (std::size_t k = 0; k < d.energies.size(); ++k)
        for (std::size_t m = 0; m < d.modes.size(); ++m) {
            if (m == ref) continue;
            for (std::size_t i = 0; i < d.n[m].size(); ++i)
                o << detail::num(d.energies[k].real() * kEvPerHartree) << ',' << i << ',' << to_string(d.modes[m]) << ','
                  << detail::num((d.n[m][i][k] - d.n[ref][i][k]) * per_ev) << ',' << ((d.valid[m][i][k] && d.valid[ref][i][k]) ? 1 : 0)
                  << "\n";
        }
}

inline void write_bench_csv(const std::filesystem::path& path, const RunConfig& cfg, const Model& model, const std::vector<BenchRow>& rows) {
    auto o = detail::open_out(path);
    detail::csv_header(o, cfg);
    const auto& s = model.scheme();
    o << "task,mode,p,a,b,nop_measured,nop_predicted,nop_predicted_leading,measured_vs_standard,predicted_leading_vs_standard,wall_ms,"
         "c_s_measured,frobenius_rel\n";
    for (const auto& r : rows) {
        double std_meas = 0, std_pred = 0;
        for (const auto& q : rows)
            if (q.task == r.task && q.mode == Mode::standard) {
                std_meas = static_cast<double>(q.nop_measured);
                std_pred = q.predicted.leading;
            }
        o << to_string(r.task) << ',' << to_string(r.mode) << ',' << detail::num(r.p) << ',' << s.a() << ',' << s.b() << ','
          << r.nop_measured << ',' << detail::num(r.predicted.total()) << ',' << detail::num(r.predicted.leading) << ','
          << detail::num(std_meas > 0 ? static_cast<double>(r.nop_measured) / std_meas : 0) << ','
          << detail::num(std_pred > 0 ? r.predicted.leading / std_pred : 0) << ',' << detail::num(r.wall_ms) << ','
          << detail::num(r.c_s_measured) << ',' << detail::num(r.frobenius_rel) << "\n";
    }
}

}  // namespace mskit
