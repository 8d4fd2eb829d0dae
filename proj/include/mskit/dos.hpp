#pragma once

// Inscribed-sphere local density of states.
//
//   n_i(E) = -(2/pi) Im [ sum_{LL'} tau_{LL'} (S^-T rho S^-1)_{LL'} - sum_{LL'} S^-1_{L'L} rhobar_{L'L} ]
//   rho_{L1L2}    = int_0^Rin r^2 R_{L1} R_{L2} dr
//   rhobar_{L'L}  = int_0^Rin r^2 Lambda_{L'} R_L dr
//
// R is the regular solution, Lambda the irregular one matched to j_l at R_b. The
// prefactor 2 gives states per Hartree; the minus in front of the single-site term
// comes from G = Phibar tau Phibar - Phibar Lambda. No complex conjugation anywhere.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mskit/angmom.hpp"
#include "mskit/single_site.hpp"

namespace mskit {

constexpr double kEvPerHartree = 27.211386245988;

namespace detail {

// Lagrange cubic through nodes x0..x0+3h (values f[k0..k0+3]) evaluated at x.
inline cplx cubic_at(const std::vector<cplx>& f, std::size_t k0, double h, double x) {
    const double s = x / h - static_cast<double>(k0);
    cplx out = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        double w = 1;
        for (std::size_t j = 0; j < 4; ++j)
            if (j != i) w *= (s - static_cast<double>(j)) / (static_cast<double>(i) - static_cast<double>(j));
        out += w * f[k0 + i];
    }
    return out;
}

}  // namespace detail

/// int_0^x_end f(r) dr for f sampled at r_k = k h, k = 0..n (f[0] at the origin).
/// Composite Simpson over whole intervals (3/8 rule on the last three when the
/// count is odd) plus a 3-point Gauss rule on the cubic interpolant for the rest.
inline cplx integrate_uniform(const std::vector<cplx>& f, double h, double x_end) {
    if (f.size() < 4) throw std::invalid_argument("integrate_uniform: need at least 4 samples");
    const double xmax = h * static_cast<double>(f.size() - 1);
    if (x_end < 0 || x_end > xmax * (1 + 1e-12)) throw std::invalid_argument("integrate_uniform: upper limit outside the mesh");
    x_end = std::min(x_end, xmax);
    auto m = static_cast<std::size_t>(std::floor(x_end / h + 1e-9));
    m = std::min(m, f.size() - 1);
    cplx sum = 0;
    std::size_t simpson_end = m;
    if (m == 1) {
        sum += 0.5 * h * (f[0] + f[1]);
    } else if (m >= 2) {
        if (m % 2 == 1) {
            if (m >= 3) {
                const std::size_t k = m - 3;
                sum += 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
                simpson_end = m - 3;
            }
        }
        for (std::size_t k = 0; k + 2 <= simpson_end; k += 2) sum += h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
    }
    const double x0 = h * static_cast<double>(m);
    const double rest = x_end - x0;
    if (rest > 1e-14 * h) {
        const std::size_t k0 = std::min(m >= 1 ? m - 1 : 0, f.size() - 4);
        static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
        static const double gw[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
        for (int q = 0; q < 3; ++q) {
            const double x = x0 + 0.5 * rest * (1 + gx[q]);
            sum += 0.5 * rest * gw[q] * detail::cubic_at(f, k0, h, x);
        }
    }
    return sum;
}

struct RhoIntegrals {
    Matrix rho;      // int r^2 R R
    Matrix rho_bar;  // int r^2 Lambda R
};

/// Number of mesh points near the origin where the irregular product is replaced
/// by its linear small-r form (Numerov loses accuracy there for the r^-l-1 branch).
constexpr int kIrregularOriginPoints = 8;

inline RhoIntegrals rho_integrals(const SiteScatterer& site, double r_in) {
    if (site.regular.empty()) throw std::invalid_argument("rho_integrals: no regular solutions");
    if (site.irregular.size() != site.regular.size()) throw std::invalid_argument("rho_integrals: irregular solutions required");
    const double h = site.regular.front().step;
    const double rb = site.regular.front().rb();
    if (r_in < 0 || r_in > rb * (1 + 1e-12)) throw std::invalid_argument("rho_integrals: R_in must lie in [0, R_b]; the mesh does not cover it");
    const int l_max = static_cast<int>(site.regular.size()) - 1;
    const int n = num_lm(l_max);
    RhoIntegrals out{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    for (int l = 0; l <= l_max; ++l) {
        const auto& R = site.regular[static_cast<std::size_t>(l)];
        const auto& Lam = site.irregular[static_cast<std::size_t>(l)];
        const std::size_t np = R.value.size();
        std::vector<cplx> frr(np + 1, 0.0), frl(np + 1, 0.0);
        for (std::size_t k = 0; k < np; ++k) {
            const double r = h * static_cast<double>(k + 1);
            frr[k + 1] = r * r * R.value[k] * R.value[k];
            frl[k + 1] = r * r * Lam.value[k] * R.value[k];
        }
        const auto k_ref = static_cast<std::size_t>(kIrregularOriginPoints);
        if (np > k_ref + 1)
            for (std::size_t k = 1; k < k_ref; ++k) frl[k] = frl[k_ref] * (static_cast<double>(k) / static_cast<double>(k_ref));
        const cplx rr = integrate_uniform(frr, h, r_in);
        const cplx rl = integrate_uniform(frl, h, r_in);
        for (int m = -l; m <= l; ++m) {
            const int k = lm_index(l, m);
            out.rho(k, k) = rr;
            out.rho_bar(k, k) = rl;
        }
    }
    return out;
}

struct DosValue {
    double n = 0;  // states per Hartree
    bool valid = true;
};

/// S^-1 or nothing when S is numerically singular at this energy.
inline std::optional<Matrix> invert_S(const Matrix& S, double rcond_min = 1e-13) {
    if (S.size() == 0) return Matrix(0, 0);
    const double scale = S.cwiseAbs().maxCoeff();
    if (!(scale > 0) || !std::isfinite(scale)) return std::nullopt;
    Eigen::PartialPivLU<Matrix> lu(S);
    if (!(lu.rcond() > rcond_min)) return std::nullopt;
    return lu.inverse();
}

inline DosValue local_dos(const Matrix& tau_ii, const Matrix& S_inv, const RhoIntegrals& rho) {
    if (tau_ii.rows() != S_inv.rows() || rho.rho.rows() != S_inv.rows())
        throw std::invalid_argument("local_dos: dimension mismatch");
    const Matrix W = S_inv.transpose() * rho.rho * S_inv;
    const cplx back = (tau_ii.array() * W.array()).sum();
    const cplx single = (S_inv.array() * rho.rho_bar.array()).sum();
    DosValue v;
    v.n = -2.0 / pi * (back - single).imag();
    v.valid = std::isfinite(v.n);
    return v;
}

inline DosValue local_dos(const Matrix& tau_ii, const SiteMatrices& m, const RhoIntegrals& rho) {
    // a free site leaves S at the level of the radial discretisation error
    if (m.S_mat.norm() <= 1e-8 * m.E_mat.norm()) return {0.0, false};
    const auto Si = invert_S(m.S_mat);
    if (!Si) return {0.0, false};
    return local_dos(tau_ii, *Si, rho);
}

/// Gaussian smoothing on an increasing grid. Both ends are reflected so the curve
/// does not droop at the window edges; invalid points carry no weight. sigma = 0
/// returns the input.
inline std::vector<double> gaussian_broaden(const std::vector<double>& x, const std::vector<double>& y, double sigma,
                                            const std::vector<bool>& valid = {}) {
    if (x.size() != y.size()) throw std::invalid_argument("gaussian_broaden: size mismatch");
    if (sigma < 0) throw std::invalid_argument("gaussian_broaden: negative width");
    if (sigma == 0 || x.size() < 2) return y;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw std::invalid_argument("gaussian_broaden: grid must be strictly increasing");
    const double lo = x.front(), hi = x.back();
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double num = 0, den = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (!valid.empty() && !valid[j]) continue;
            for (double xj : {x[j], 2 * lo - x[j], 2 * hi - x[j]}) {
                const double d = (x[i] - xj) / sigma;
                const double w = std::exp(-0.5 * d * d);
                num += w * y[j];
                den += w;
            }
        }
        out[i] = den > 0 ? num / den : y[i];
    }
    return out;
}

}  // namespace mskit
