#pragma once

// Multiplication-count model for the tau solvers.
//
// Leading terms (a small-l, b large-l dimension):
//   tau_col   standard (a+b)^3/3   ours a^3/3 + c_s p a^2 b   zhang a^3/3
//   tau_diag  standard (a+b)^3     ours a^3   + c_s p a^2 b   zhang a^3 + a^2 b
// exact-schur always forms the full block inverse, (a+b)^3.
// Secondary terms follow the solver's own steps (solves, C products, t products).

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mskit/angmom.hpp"
#include "mskit/solver.hpp"

namespace mskit {

struct CostModel {
    int l_max = 0;
    std::vector<int> lpt;  // per site
    double p = 1.0;
    double c_s = 1.0;      // overhead of the sparse product relative to dense; >= 1

    static CostModel uniform(int n_sites, int l_max, int lpt, double p = 1.0, double c_s = 1.0) {
        return CostModel{l_max, std::vector<int>(static_cast<std::size_t>(n_sites), lpt), p, c_s};
    }
    static CostModel from_scheme(const PartitionScheme& s, double p = 1.0, double c_s = 1.0) {
        return CostModel{s.l_max(), s.lpt_map(), p, c_s};
    }

    int n_sites() const noexcept { return static_cast<int>(lpt.size()); }
    double a() const {
        double s = 0;
        for (int l : lpt) s += num_lm(l);
        return s;
    }
    double b() const { return static_cast<double>(n_sites()) * num_lm(l_max) - a(); }

    void validate() const {
        if (lpt.empty()) throw std::invalid_argument("CostModel: no sites");
        if (!(c_s >= 1.0)) throw std::invalid_argument("CostModel: c_s must be >= 1");
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("CostModel: p must lie in [0, 1]");
        for (int l : lpt)
            if (l < 0 || l > l_max) throw std::invalid_argument("CostModel: l_pt outside [0, l_max]");
    }
};

struct NopPrediction {
    double leading = 0;
    double secondary = 0;
    double total() const noexcept { return leading + secondary; }
};

/// Effective B fill for a mode: 1 for dense B, p for the sparse one.
inline double b_fill(const CostModel& m, Mode mode) { return mode == Mode::ours_sparse ? m.p : 1.0; }

inline NopPrediction predict_nop(const CostModel& m, Task task, Mode mode) {
    m.validate();
    const double a = m.a(), b = m.b(), n = a + b;
    const double nl = num_lm(m.l_max);
    const double N = m.n_sites();
    NopPrediction out;
    const double p = b_fill(m, mode);
    const double cs = mode == Mode::ours_sparse ? m.c_s : 1.0;

    if (task == Task::tau_col) {
        // site 0 is the column site
        const double n0 = nl;
        const double ns0 = num_lm(m.lpt.front());
        const double nb0 = n0 - ns0;
        out.secondary = n * n0 * n0;  // tau = M t0
        switch (mode) {
            case Mode::standard:
                out.leading = n * n * n / 3;
                out.secondary += n * n * n0;
                break;
            case Mode::exact_schur:
                out.leading = n * n * n;
                break;
            case Mode::ours_dense:
            case Mode::ours_sparse:
                out.leading = a * a * a / 3 + cs * p * a * a * b;
                out.secondary += a * a * n0 + b * a * (ns0 + nb0);
                break;
            case Mode::zhang:
                out.leading = a * a * a / 3;
                out.secondary += a * a * n0;
                break;
        }
    } else {
        out.secondary = N * nl * nl * nl;  // tau^{ii} = M^{ii} t^i
        switch (mode) {
            case Mode::standard:
            case Mode::exact_schur:
                out.leading = n * n * n;
                break;
            case Mode::ours_dense:
            case Mode::ours_sparse: {
                out.leading = a * a * a + cs * p * a * a * b;
                double site_terms = 0;
                for (int l : m.lpt) {
                    const double ns = num_lm(l), nb = nl - ns;
                    site_terms += nb * a * ns + nb * a * nb;
                }
                // Bi column blocks: one a-column per stored B entry
                out.secondary += p * a * a * b + site_terms;
                break;
            }
            case Mode::zhang:
                out.leading = a * a * a + a * a * b;
                break;
        }
    }
    return out;
}

/// Leading-order ratio ours / standard, the headline figure of merit.
inline double predicted_ratio(const CostModel& m, Task task) {
    return predict_nop(m, task, Mode::ours_sparse).leading / predict_nop(m, task, Mode::standard).leading;
}

}  // namespace mskit
