#pragma once

// Single-site scattering for spherical potentials in Hartree atomic units.
//
// Radial equation for R_l(r) (u = r R):
//     u'' = [ l(l+1)/r^2 + 2 (V(r) - E) ] u
// solved by fixed-step Numerov on a uniform mesh r_k = k h, k = 1..n, r_n = R_b.
// Outside R_b the potential is the (zero) interstitial constant and
// kappa = sqrt(2E) on the principal branch.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mskit/angmom.hpp"

namespace mskit {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// A numerical failure tied to one energy point (singular E or S, poles).
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, cplx energy)
        : std::runtime_error(what + " at E = (" + std::to_string(energy.real()) + ", " + std::to_string(energy.imag()) + ")"),
          energy_(energy) {}
    cplx energy() const noexcept { return energy_; }

private:
    cplx energy_;
};

/// Principal-branch wave number for a (complex) energy in Hartree.
inline cplx wave_number(cplx energy) {
    // keep the upper half plane on the negative real axis
    if (energy.imag() == 0.0) energy = cplx(energy.real(), 0.0);
    return std::sqrt(2.0 * energy);
}

// ---------------------------------------------------------------------------

/// Spherical potential sampled on a uniform mesh that ends at the bounding radius.
class RadialPotential {
public:
    RadialPotential(double rb, std::vector<double> values) : rb_(rb), v_(std::move(values)) {
        if (!(rb_ > 0)) throw std::invalid_argument("RadialPotential: R_b must be positive");
        if (v_.size() < 16) throw std::invalid_argument("RadialPotential: need at least 16 mesh points");
        for (double x : v_)
            if (!std::isfinite(x)) throw std::invalid_argument("RadialPotential: non-finite potential value");
    }

    static RadialPotential zero(double rb, int npts) { return RadialPotential(rb, std::vector<double>(static_cast<std::size_t>(npts), 0.0)); }

    /// Flat well of depth v0 (< 0 attractive) filling the whole sphere.
    static RadialPotential square_well(double v0, double rb, int npts) {
        return RadialPotential(rb, std::vector<double>(static_cast<std::size_t>(npts), v0));
    }

    /// -z / sqrt(r^2 + a^2), a Coulomb tail with a smooth core.
    static RadialPotential soft_coulomb(double z, double a, double rb, int npts) {
        std::vector<double> v(static_cast<std::size_t>(npts));
        const double h = rb / npts;
        for (int k = 1; k <= npts; ++k) v[static_cast<std::size_t>(k - 1)] = -z / std::sqrt(k * h * k * h + a * a);
        return RadialPotential(rb, std::move(v));
    }

    /// Resample arbitrary increasing (r, V) samples onto a uniform mesh of npts points.
    static RadialPotential from_samples(const std::vector<double>& r, const std::vector<double>& v, int npts) {
        if (r.size() != v.size() || r.size() < 2) throw std::invalid_argument("RadialPotential: need matching r/V samples");
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i] > r[i - 1])) throw std::invalid_argument("RadialPotential: mesh must be strictly increasing");
        const double rb = r.back();
        std::vector<double> out(static_cast<std::size_t>(npts));
        const double h = rb / npts;
        std::size_t j = 0;
        for (int k = 1; k <= npts; ++k) {
            const double x = k * h;
            if (x <= r.front()) {
                out[static_cast<std::size_t>(k - 1)] = v.front();
                continue;
            }
            while (j + 1 < r.size() && r[j + 1] < x) ++j;
            const std::size_t j1 = std::min(j + 1, r.size() - 1);
            const double w = (r[j1] == r[j]) ? 0.0 : (x - r[j]) / (r[j1] - r[j]);
            out[static_cast<std::size_t>(k - 1)] = (1 - w) * v[j] + w * v[j1];
        }
        return RadialPotential(rb, std::move(out));
    }

    double rb() const noexcept { return rb_; }
    int size() const noexcept { return static_cast<int>(v_.size()); }
    double step() const noexcept { return rb_ / static_cast<double>(v_.size()); }
    /// r_k for k = 1..n
    double r(int k) const noexcept { return k * step(); }
    /// V(r_k), k = 1..n
    double v(int k) const { return v_[static_cast<std::size_t>(k - 1)]; }
    const std::vector<double>& values() const noexcept { return v_; }

private:
    double rb_;
    std::vector<double> v_;
};

/// Potential file: header `npts <n> rb <R_b> unit hartree-bohr` then n lines `r V`.
inline RadialPotential load_potential(const std::string& path, int npts_mesh = 0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open potential file '" + path + "'");
    std::string line, tag;
    int lineno = 0, n = -1;
    double rb = 0;
    std::vector<double> r, v;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
        std::istringstream ls(line);
        if (!(ls >> tag)) continue;
        if (n < 0) {
            std::string rbt, unitt, unit;
            if (tag != "npts" || !(ls >> n >> rbt >> rb >> unitt >> unit) || rbt != "rb" || unitt != "unit")
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'npts <n> rb <R_b> unit hartree-bohr'");
            if (unit != "hartree-bohr") throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unsupported unit '" + unit + "'");
            continue;
        }
        std::istringstream vs(line);
        double a = 0, b = 0;
        if (!(vs >> a >> b)) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'r V'");
        r.push_back(a);
        v.push_back(b);
    }
    if (n < 0) throw std::runtime_error(path + ": missing header");
    if (static_cast<int>(r.size()) != n)
        throw std::runtime_error(path + ": header declares " + std::to_string(n) + " points, found " + std::to_string(r.size()));
    if (std::abs(r.back() - rb) > 1e-9 * rb) throw std::runtime_error(path + ": last mesh point differs from rb");
    return RadialPotential::from_samples(r, v, npts_mesh > 0 ? npts_mesh : n);
}

// ---------------------------------------------------------------------------

enum class SolutionKind { regular, irregular_bessel_matched };

/// R_l and dR_l/dr on the potential mesh (r_1..r_n).
struct RadialSolution {
    int l = 0;
    cplx energy;
    SolutionKind kind = SolutionKind::regular;
    double step = 0;
    std::vector<cplx> value;
    std::vector<cplx> slope;

    double rb() const noexcept { return step * static_cast<double>(value.size()); }
    cplx at_rb() const { return value.back(); }
    cplx slope_at_rb() const { return slope.back(); }
};

namespace detail {

// First derivative at the last node from the seven trailing values, O(h^6).
inline cplx backward_derivative(const std::vector<cplx>& u, std::size_t k, double h) {
    static constexpr double c[7] = {49.0 / 20, -6.0, 15.0 / 2, -20.0 / 3, 15.0 / 4, -6.0 / 5, 1.0 / 6};
    cplx d = 0;
    for (std::size_t i = 0; i < 7; ++i) d += c[i] * u[k - i];
    return d / h;
}

inline cplx forward_derivative(const std::vector<cplx>& u, std::size_t k, double h) {
    static constexpr double c[7] = {49.0 / 20, -6.0, 15.0 / 2, -20.0 / 3, 15.0 / 4, -6.0 / 5, 1.0 / 6};
    cplx d = 0;
    for (std::size_t i = 0; i < 7; ++i) d -= c[i] * u[k + i];
    return d / h;
}

// u' on every node: 5-point central inside, 7-point one-sided at the ends.
inline std::vector<cplx> mesh_derivative(const std::vector<cplx>& u, double h) {
    const std::size_t n = u.size();
    std::vector<cplx> d(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k >= 2 && k + 2 < n)
            d[k] = (u[k - 2] - 8.0 * u[k - 1] + 8.0 * u[k + 1] - u[k + 2]) / (12.0 * h);
        else if (k < 2)
            d[k] = forward_derivative(u, k, h);
        else
            d[k] = backward_derivative(u, k, h);
    }
    return d;
}

// Numerov coefficient f(r) in u'' = f u at mesh node k (1-based).
inline cplx numerov_f(const RadialPotential& V, int l, cplx E, int k) {
    const double r = V.r(k);
    return static_cast<double>(l * (l + 1)) / (r * r) + 2.0 * (V.v(k) - E);
}

// Regular solution near the origin as r^l times a power series, leading
// coefficient 1. 2(V - E) is taken as the cubic through the first four mesh
// values, so the seed error sits well below Numerov's own h^4.
inline cplx regular_seed(int l, const std::array<cplx, 4>& w, double r) {
    constexpr int nterm = 40;
    std::array<cplx, nterm> a{};
    a[0] = 1.0;
    cplx sum = 1.0, rp = 1.0;
    for (int j = 1; j < nterm; ++j) {
        cplx acc = 0;
        for (int m = 0; m < 4 && m <= j - 2; ++m) acc += w[static_cast<std::size_t>(m)] * a[static_cast<std::size_t>(j - 2 - m)];
        a[static_cast<std::size_t>(j)] = acc / static_cast<double>(j * (j + 2 * l + 1));
        rp *= r;
        const cplx term = a[static_cast<std::size_t>(j)] * rp;
        sum += term;
        if (j > 8 && std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return std::pow(r, l) * sum;
}

// Power-series coefficients of 2(V(r) - E) about r = 0.
inline std::array<cplx, 4> seed_potential(const RadialPotential& V, cplx E) {
    std::array<cplx, 4> w{};
    if (V.size() < 4) {
        w[0] = 2.0 * (V.v(1) - E);
        return w;
    }
    Eigen::Matrix4d A;
    Eigen::Vector4d b;
    for (int k = 1; k <= 4; ++k) {
        const double r = V.r(k);
        A.row(k - 1) << 1, r, r * r, r * r * r;
        b(k - 1) = V.v(k);
    }
    const Eigen::Vector4d c = A.colPivHouseholderQr().solve(b);
    for (std::size_t m = 0; m < 4; ++m) w[m] = 2.0 * c(static_cast<Eigen::Index>(m));
    w[0] -= 2.0 * E;
    return w;
}

// Convert u = rR values to R and R'.
inline RadialSolution to_radial(int l, cplx E, SolutionKind kind, double h, const std::vector<cplx>& u) {
    RadialSolution s;
    s.l = l;
    s.energy = E;
    s.kind = kind;
    s.step = h;
    const auto du = mesh_derivative(u, h);
    s.value.resize(u.size());
    s.slope.resize(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double r = static_cast<double>(k + 1) * h;
        s.value[k] = u[k] / r;
        s.slope[k] = du[k] / r - u[k] / (r * r);
    }
    return s;
}

inline void check_finite(const std::vector<cplx>& u, cplx E) {
    for (const auto& x : u)
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) throw NumericalError("radial integration diverged", E);
}

// u = rR of the regular solution, outward Numerov.
inline std::vector<cplx> integrate_outward(const RadialPotential& V, int l, cplx E) {
    const int n = V.size();
    const double h = V.step(), h2 = h * h / 12.0;
    std::vector<cplx> u(static_cast<std::size_t>(n));
    const auto w = seed_potential(V, E);
    for (int k = 1; k <= 2; ++k) u[static_cast<std::size_t>(k - 1)] = V.r(k) * regular_seed(l, w, V.r(k));
    cplx fm = numerov_f(V, l, E, 1), f0 = numerov_f(V, l, E, 2);
    for (int k = 2; k < n; ++k) {
        const cplx fp = numerov_f(V, l, E, k + 1);
        const auto i = static_cast<std::size_t>(k);
        u[i] = (2.0 * (1.0 + 5.0 * h2 * f0) * u[i - 1] - (1.0 - h2 * fm) * u[i - 2]) / (1.0 - h2 * fp);
        fm = f0;
        f0 = fp;
    }
    check_finite(u, E);
    return u;
}

// A second, irregular solution: u(R_b) = 0, u(R_b - h) = 1, inward Numerov.
inline std::vector<cplx> integrate_inward(const RadialPotential& V, int l, cplx E) {
    const int n = V.size();
    const double h = V.step(), h2 = h * h / 12.0;
    std::vector<cplx> u(static_cast<std::size_t>(n));
    u[static_cast<std::size_t>(n - 1)] = 0.0;
    u[static_cast<std::size_t>(n - 2)] = 1.0;
    cplx fp = numerov_f(V, l, E, n), f0 = numerov_f(V, l, E, n - 1);
    for (int k = n - 1; k > 1; --k) {
        const cplx fm = numerov_f(V, l, E, k - 1);
        const auto i = static_cast<std::size_t>(k - 1);
        u[i - 1] = (2.0 * (1.0 + 5.0 * h2 * f0) * u[i] - (1.0 - h2 * fp) * u[i + 1]) / (1.0 - h2 * fm);
        fp = f0;
        f0 = fm;
    }
    check_finite(u, E);
    return u;
}

}  // namespace detail

/// Regular solution, R_l ~ r^l at the origin.
inline RadialSolution solve_radial_regular(const RadialPotential& V, int l, cplx E) {
    if (l < 0) throw std::invalid_argument("solve_radial_regular: negative l");
    return detail::to_radial(l, E, SolutionKind::regular, V.step(), detail::integrate_outward(V, l, E));
}

/// Irregular solution that equals j_l(kappa r) in value and slope at R_b.
inline RadialSolution solve_radial_irregular(const RadialPotential& V, int l, cplx E) {
    if (l < 0) throw std::invalid_argument("solve_radial_irregular: negative l");
    const double h = V.step(), rb = V.rb();
    const auto ur = detail::integrate_outward(V, l, E);
    const auto uq = detail::integrate_inward(V, l, E);
    const std::size_t last = ur.size() - 1;
    const cplx kap = wave_number(E);
    const auto jb = sph_bessel_j_vs(l, kap * rb);
    // target u = r j_l(kappa r) at R_b
    const cplx ut = rb * jb.value, dut = jb.value + rb * kap * jb.slope;
    const cplx a11 = ur[last], a12 = uq[last];
    const cplx a21 = detail::backward_derivative(ur, last, h), a22 = detail::backward_derivative(uq, last, h);
    const cplx det = a11 * a22 - a12 * a21;
    if (std::abs(det) == 0.0) throw NumericalError("degenerate solution pair", E);
    const cplx alpha = (ut * a22 - a12 * dut) / det;
    const cplx beta = (a11 * dut - a21 * ut) / det;
    std::vector<cplx> u(ur.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = alpha * ur[k] + beta * uq[k];
    auto sol = detail::to_radial(l, E, SolutionKind::irregular_bessel_matched, h, u);
    // pin the boundary data exactly
    sol.value.back() = jb.value;
    sol.slope.back() = kap * jb.slope;
    return sol;
}

// ---------------------------------------------------------------------------

/// E, S and t for one site, (l_max+1)^2 square.
struct SiteMatrices {
    cplx energy;
    cplx kappa;
    Matrix E_mat;
    Matrix S_mat;
    Matrix t_mat;
};

/// W[f, g] = f g' - g f'
inline cplx wronskian(cplx f, cplx df, cplx g, cplx dg) { return f * dg - g * df; }

/// E_{LL'} = R_b^2 W[-i kappa h+_l, R_{LL'}],  S_{LL'} = R_b^2 W[j_l, R_{LL'}],
/// Wronskians in r evaluated at R_b. `regular[l]` holds R_l for l = 0..l_max;
/// spherical potentials give diagonal matrices.
inline SiteMatrices wronskian_matrices(const std::vector<RadialSolution>& regular, cplx kappa) {
    if (regular.empty()) throw std::invalid_argument("wronskian_matrices: no solutions");
    const int l_max = static_cast<int>(regular.size()) - 1;
    const double rb = regular.front().rb();
    const cplx E = regular.front().energy;
    const int n = num_lm(l_max);
    SiteMatrices m;
    m.energy = E;
    m.kappa = kappa;
    m.E_mat = Matrix::Zero(n, n);
    m.S_mat = Matrix::Zero(n, n);
    const cplx z = kappa * rb;
    const auto jb = sph_bessel_j_all(l_max + 1, z);
    const auto hb = sph_hankel_plus_all(l_max + 1, z);
    const auto djb = sph_derivatives(jb);
    const auto dhb = sph_derivatives(hb);
    for (int l = 0; l <= l_max; ++l) {
        const auto& s = regular[static_cast<std::size_t>(l)];
        if (s.l != l) throw std::invalid_argument("wronskian_matrices: solutions must be ordered by l");
        const auto li = static_cast<std::size_t>(l);
        const cplx e = rb * rb * wronskian(-I * kappa * hb[li], -I * kappa * kappa * dhb[li], s.at_rb(), s.slope_at_rb());
        const cplx sv = rb * rb * wronskian(jb[li], kappa * djb[li], s.at_rb(), s.slope_at_rb());
        for (int mm = -l; mm <= l; ++mm) {
            const int k = lm_index(l, mm);
            m.E_mat(k, k) = e;
            m.S_mat(k, k) = sv;
        }
    }
    return m;
}

/// t = -S E^{-1}
inline Matrix t_matrix(const SiteMatrices& m) {
    Eigen::FullPivLU<Matrix> lu(m.E_mat);
    if (!lu.isInvertible()) throw NumericalError("singular E matrix", m.energy);
    return -m.S_mat * lu.inverse();
}

/// Everything single-site scattering produces at one energy.
struct SiteScatterer {
    SiteMatrices matrices;
    std::vector<RadialSolution> regular;
    std::vector<RadialSolution> irregular;  // empty unless requested
};

inline SiteScatterer solve_site(const RadialPotential& V, int l_max, cplx E, bool with_irregular = false) {
    SiteScatterer out;
    const cplx kap = wave_number(E);
    if (kap == cplx(0.0)) throw NumericalError("zero wave number", E);
    for (int l = 0; l <= l_max; ++l) {
        out.regular.push_back(solve_radial_regular(V, l, E));
        if (with_irregular) out.irregular.push_back(solve_radial_irregular(V, l, E));
    }
    out.matrices = wronskian_matrices(out.regular, kap);
    out.matrices.t_mat = t_matrix(out.matrices);
    return out;
}

/// Diagonal t plus a symmetric pseudo-random coupling
///   Delta_{LL'} = strength exp(-decay |l - l'|) sqrt(|t_l t_l'|) xi_{LL'},  L != L',
/// xi complex Gaussian with E|xi|^2 = 1. Deterministic for a given seed.
inline Matrix synthetic_anisotropic_t(const Matrix& t_diag, double strength, double decay, std::uint64_t seed) {
    if (strength < 0) throw std::invalid_argument("synthetic_anisotropic_t: negative strength");
    if (t_diag.rows() != t_diag.cols()) throw std::invalid_argument("synthetic_anisotropic_t: t must be square");
    Matrix t = t_diag;
    if (strength == 0.0) return t;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(2.0));
    const int n = static_cast<int>(t.rows());
    for (int a = 0; a < n; ++a) {
        const int la = lm_from_index(a).l;
        for (int b = a + 1; b < n; ++b) {
            const int lb = lm_from_index(b).l;
            const double env = strength * std::exp(-decay * std::abs(la - lb)) * std::sqrt(std::abs(t_diag(a, a) * t_diag(b, b)));
            const cplx xi(gauss(rng), gauss(rng));
            t(a, b) += env * xi;
            t(b, a) += env * xi;
        }
    }
    return t;
}

}  // namespace mskit
