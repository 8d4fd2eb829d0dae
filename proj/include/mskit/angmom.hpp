#pragma once

// Angular-momentum bookkeeping and the special functions the scattering code
// is built on: spherical Bessel/Hankel functions of complex argument, real
// spherical harmonics and their Gaunt coefficients.
//
// Real harmonics convention (fixed for the whole toolkit, no Condon-Shortley
// phase):
//   Y_{l0}  = N_l0 P_l(cos t)
//   Y_{lm}  = sqrt(2) N_lm P_l^m(cos t) cos(m p)     m > 0
//   Y_{l-m} = sqrt(2) N_lm P_l^m(cos t) sin(m p)     m > 0
// so that Y_{11} is proportional to +x and Y_{1-1} to +y.

#include <array>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mskit {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// (l, m) pair with -l <= m <= l.
struct AngularIndex {
    int l = 0;
    int m = 0;

    constexpr bool valid() const noexcept { return l >= 0 && m >= -l && m <= l; }
    friend constexpr bool operator==(AngularIndex, AngularIndex) = default;
};

/// Number of (l, m) channels up to and including l_max.
constexpr int num_lm(int l_max) noexcept { return (l_max + 1) * (l_max + 1); }

/// Flattened offset of (l, m) within a site block.
constexpr int lm_index(int l, int m) noexcept { return l * l + l + m; }
constexpr int lm_index(AngularIndex L) noexcept { return lm_index(L.l, L.m); }

/// Inverse of lm_index.
inline AngularIndex lm_from_index(int k) {
    if (k < 0) throw std::invalid_argument("lm_from_index: negative offset");
    int l = static_cast<int>(std::sqrt(static_cast<double>(k)));
    while (l * l > k) --l;
    while ((l + 1) * (l + 1) <= k) ++l;
    return {l, k - l * l - l};
}

/// Position of (site, L) in the unpartitioned global basis.
inline int composite_index(int site, AngularIndex L, int l_max) {
    if (site < 0) throw std::invalid_argument("composite_index: negative site");
    if (!L.valid()) throw std::invalid_argument("composite_index: invalid (l,m)");
    if (L.l > l_max)
        throw std::invalid_argument("composite_index: l=" + std::to_string(L.l) +
                                    " exceeds l_max=" + std::to_string(l_max));
    return site * num_lm(l_max) + lm_index(L);
}

struct SiteChannel {
    int site;
    AngularIndex L;
};

inline SiteChannel composite_to_site(int index, int l_max) {
    if (index < 0) throw std::invalid_argument("composite_to_site: negative index");
    const int n = num_lm(l_max);
    return {index / n, lm_from_index(index % n)};
}

// ---------------------------------------------------------------------------
// Spherical Bessel and Hankel functions

namespace detail {

// |Im z| beyond this overflows sin/cos of z in double precision.
inline constexpr double kMaxImag = 700.0;

inline void check_range(cplx z, const char* who) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::domain_error(std::string(who) + ": non-finite argument");
    if (std::abs(z.imag()) > kMaxImag)
        throw std::range_error(std::string(who) + ": |Im z| too large, result overflows");
}

// Power series j_l(z) = z^l/(2l+1)!! sum_k (-z^2/2)^k / (k! (2l+3)...(2l+2k+1))
inline cplx bessel_j_series(int l, cplx z) {
    cplx lead = 1.0;
    for (int k = 1; k <= l; ++k) lead *= z / static_cast<double>(2 * k + 1);
    const cplx x = -0.5 * z * z;
    cplx term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= x / (static_cast<double>(k) * (2 * l + 2 * k + 1));
        sum += term;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    return lead * sum;
}

// Miller's downward recurrence, normalised against the closed forms of j_0 / j_1.
inline std::vector<cplx> bessel_j_miller(int l_max, cplx z) {
    const int top = std::max(l_max, 1);
    const int start = std::max(top, static_cast<int>(std::abs(z))) + 30 + static_cast<int>(std::sqrt(40.0 * top));
    std::vector<cplx> f(static_cast<std::size_t>(start) + 2, cplx(0.0));
    f[static_cast<std::size_t>(start)] = 1e-300;
    const cplx zinv = 1.0 / z;
    for (int l = start; l >= 1; --l) {
        const auto k = static_cast<std::size_t>(l);
        f[k - 1] = static_cast<double>(2 * l + 1) * zinv * f[k] - f[k + 1];
        if (std::abs(f[k - 1]) > 1e250)
            for (std::size_t i = k - 1; i < f.size(); ++i) f[i] *= 1e-250;
    }
    const cplx j0 = std::sin(z) / z;
    const cplx j1 = std::sin(z) / (z * z) - std::cos(z) / z;
    const cplx scale = std::abs(j0) >= std::abs(j1) ? j0 / f[0] : j1 / f[1];
    f.resize(static_cast<std::size_t>(l_max) + 1);
    for (auto& v : f) v *= scale;
    return f;
}

}  // namespace detail

/// j_l(z) for l = 0..l_max.
inline std::vector<cplx> sph_bessel_j_all(int l_max, cplx z) {
    if (l_max < 0) throw std::invalid_argument("sph_bessel_j: negative order");
    detail::check_range(z, "sph_bessel_j");
    std::vector<cplx> out(static_cast<std::size_t>(l_max) + 1);
    if (z == cplx(0.0)) {
        out[0] = 1.0;
        return out;
    }
    const double az = std::abs(z);
    // Series where |z| is small compared to the order, Miller elsewhere.
    std::vector<cplx> miller;
    if (az >= 1e-3) miller = detail::bessel_j_miller(l_max, z);
    for (int l = 0; l <= l_max; ++l) {
        if (az < 0.5 * l || az < 1e-3)
            out[static_cast<std::size_t>(l)] = detail::bessel_j_series(l, z);
        else
            out[static_cast<std::size_t>(l)] = miller[static_cast<std::size_t>(l)];
    }
    return out;
}

inline cplx sph_bessel_j(int l, cplx z) { return sph_bessel_j_all(l, z)[static_cast<std::size_t>(l)]; }

/// Outgoing spherical Hankel functions h+_l(z) = j_l + i y_l, l = 0..l_max.
inline std::vector<cplx> sph_hankel_plus_all(int l_max, cplx z) {
    if (l_max < 0) throw std::invalid_argument("sph_hankel_plus: negative order");
    if (z == cplx(0.0)) throw std::domain_error("sph_hankel_plus: singular at z = 0");
    detail::check_range(z, "sph_hankel_plus");
    std::vector<cplx> h(static_cast<std::size_t>(l_max) + 1);
    const cplx e = std::exp(I * z);
    h[0] = -I * e / z;
    if (l_max >= 1) h[1] = -(e / z) * (1.0 + I / z);
    for (int l = 1; l < l_max; ++l)
        h[static_cast<std::size_t>(l + 1)] =
            static_cast<double>(2 * l + 1) / z * h[static_cast<std::size_t>(l)] - h[static_cast<std::size_t>(l - 1)];
    return h;
}

inline cplx sph_hankel_plus(int l, cplx z) { return sph_hankel_plus_all(l, z)[static_cast<std::size_t>(l)]; }

/// Derivatives d/dz from an array holding orders 0..l_max+1:
/// f'_l = (l f_{l-1} - (l+1) f_{l+1}) / (2l+1), which has no 1/z.
inline std::vector<cplx> sph_derivatives(const std::vector<cplx>& f) {
    assert(f.size() >= 2);
    std::vector<cplx> d(f.size() - 1);
    d[0] = -f[1];
    for (std::size_t l = 1; l < d.size(); ++l)
        d[l] = (static_cast<double>(l) * f[l - 1] - static_cast<double>(l + 1) * f[l + 1]) / static_cast<double>(2 * l + 1);
    return d;
}

/// Value and z-derivative pair.
struct ValueSlope {
    cplx value;
    cplx slope;
};

inline ValueSlope sph_bessel_j_vs(int l, cplx z) {
    const auto f = sph_bessel_j_all(l + 1, z);
    return {f[static_cast<std::size_t>(l)], sph_derivatives(f)[static_cast<std::size_t>(l)]};
}

inline ValueSlope sph_hankel_plus_vs(int l, cplx z) {
    const auto f = sph_hankel_plus_all(l + 1, z);
    return {f[static_cast<std::size_t>(l)], sph_derivatives(f)[static_cast<std::size_t>(l)]};
}

// ---------------------------------------------------------------------------
// Real spherical harmonics

/// All Y_L(u) for l <= l_max, indexed by lm_index. u must be a unit vector.
inline std::vector<double> real_sph_harm_all(int l_max, const Vec3& u) {
    if (l_max < 0) throw std::invalid_argument("real_sph_harm: negative l_max");
    const double n2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw std::invalid_argument("real_sph_harm: direction is not a unit vector");

    std::vector<double> Y(static_cast<std::size_t>(num_lm(l_max)));
    const double x = u[2];
    // q(l,m) = normalised P_l^m / sin^m, the sin^m goes into (ux + i uy)^m below.
    std::vector<double> q(static_cast<std::size_t>((l_max + 1) * (l_max + 2) / 2), 0.0);
    auto Q = [&](int l, int m) -> double& { return q[static_cast<std::size_t>(l * (l + 1) / 2 + m)]; };
    Q(0, 0) = 1.0 / std::sqrt(4.0 * pi);
    for (int m = 1; m <= l_max; ++m) Q(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * Q(m - 1, m - 1);
    for (int m = 0; m < l_max; ++m) Q(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * Q(m, m);
    for (int m = 0; m <= l_max; ++m) {
        for (int l = m + 2; l <= l_max; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l * l - m * m)));
            const double b = std::sqrt((static_cast<double>((l - 1) * (l - 1) - m * m)) / (4.0 * (l - 1) * (l - 1) - 1.0));
            Q(l, m) = a * (x * Q(l - 1, m) - b * Q(l - 2, m));
        }
    }
    const std::complex<double> xy(u[0], u[1]);
    std::complex<double> pw = 1.0;
    for (int m = 0; m <= l_max; ++m) {
        for (int l = m; l <= l_max; ++l) {
            if (m == 0) {
                Y[static_cast<std::size_t>(lm_index(l, 0))] = Q(l, 0);
            } else {
                Y[static_cast<std::size_t>(lm_index(l, m))] = std::sqrt(2.0) * Q(l, m) * pw.real();
                Y[static_cast<std::size_t>(lm_index(l, -m))] = std::sqrt(2.0) * Q(l, m) * pw.imag();
            }
        }
        pw *= xy;
    }
    return Y;
}

inline double real_sph_harm(AngularIndex L, const Vec3& u) {
    if (!L.valid()) throw std::invalid_argument("real_sph_harm: invalid (l,m)");
    return real_sph_harm_all(L.l, u)[static_cast<std::size_t>(lm_index(L))];
}

// ---------------------------------------------------------------------------
// Wigner 3j and Gaunt coefficients

namespace detail {

inline double factorial(int n) {
    static const std::vector<double> table = [] {
        std::vector<double> t(171);
        t[0] = 1.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
        return t;
    }();
    if (n < 0 || n > 170) throw std::out_of_range("factorial argument out of range");
    return table[static_cast<std::size_t>(n)];
}

}  // namespace detail

/// Wigner 3j symbol for integer arguments (Racah formula).
inline double wigner3j(int j1, int j2, int j3, int m1, int m2, int m3) {
    using detail::factorial;
    if (m1 + m2 + m3 != 0) return 0.0;
    if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
    if (j3 < std::abs(j1 - j2) || j3 > j1 + j2) return 0.0;
    const double tri = factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3) /
                       factorial(j1 + j2 + j3 + 1);
    const double pre = std::sqrt(tri * factorial(j1 + m1) * factorial(j1 - m1) * factorial(j2 + m2) *
                                 factorial(j2 - m2) * factorial(j3 + m3) * factorial(j3 - m3));
    const int kmin = std::max({0, j2 - j3 - m1, j1 - j3 + m2});
    const int kmax = std::min({j1 + j2 - j3, j1 - m1, j2 + m2});
    double sum = 0.0;
    for (int k = kmin; k <= kmax; ++k) {
        const double den = factorial(k) * factorial(j3 - j2 + k + m1) * factorial(j3 - j1 + k - m2) *
                           factorial(j1 + j2 - j3 - k) * factorial(j1 - k - m1) * factorial(j2 - k + m2);
        sum += ((k % 2) ? -1.0 : 1.0) / den;
    }
    const int phase = j1 - j2 - m3;
    return ((phase % 2 != 0) ? -1.0 : 1.0) * pre * sum;
}

namespace detail {

// Coefficients of a real harmonic in the complex (Condon-Shortley) basis:
// Y^real_{lm} = sum over at most two m' of u * Y_l^{m'}.
struct ComplexComponent {
    int m;
    cplx u;
};

inline std::array<ComplexComponent, 2> real_to_complex(int m, int& count) {
    const double s = 1.0 / std::sqrt(2.0);
    if (m == 0) {
        count = 1;
        return {ComplexComponent{0, 1.0}, ComplexComponent{0, 0.0}};
    }
    const int mu = std::abs(m);
    const double sign = (mu % 2) ? -1.0 : 1.0;
    count = 2;
    if (m > 0) return {ComplexComponent{mu, sign * s}, ComplexComponent{-mu, s}};
    return {ComplexComponent{mu, -I * sign * s}, ComplexComponent{-mu, I * s}};
}

}  // namespace detail

/// Integral of Y_{L1} Y_{L2} Y_{L3} over the unit sphere, real harmonics.
inline double gaunt(AngularIndex L1, AngularIndex L2, AngularIndex L3) {
    if (!L1.valid() || !L2.valid() || !L3.valid()) throw std::invalid_argument("gaunt: invalid (l,m)");
    const int l1 = L1.l, l2 = L2.l, l3 = L3.l;
    if ((l1 + l2 + l3) % 2 != 0) return 0.0;
    if (l3 < std::abs(l1 - l2) || l3 > l1 + l2) return 0.0;
    const double w000 = wigner3j(l1, l2, l3, 0, 0, 0);
    if (w000 == 0.0) return 0.0;
    const double pre = std::sqrt((2.0 * l1 + 1.0) * (2.0 * l2 + 1.0) * (2.0 * l3 + 1.0) / (4.0 * pi)) * w000;
    int n1 = 0, n2 = 0, n3 = 0;
    const auto c1 = detail::real_to_complex(L1.m, n1);
    const auto c2 = detail::real_to_complex(L2.m, n2);
    const auto c3 = detail::real_to_complex(L3.m, n3);
    cplx sum = 0.0;
    for (int a = 0; a < n1; ++a)
        for (int b = 0; b < n2; ++b)
            for (int c = 0; c < n3; ++c) {
                const int ma = c1[static_cast<std::size_t>(a)].m, mb = c2[static_cast<std::size_t>(b)].m,
                          mc = c3[static_cast<std::size_t>(c)].m;
                if (ma + mb + mc != 0) continue;
                sum += c1[static_cast<std::size_t>(a)].u * c2[static_cast<std::size_t>(b)].u *
                       c3[static_cast<std::size_t>(c)].u * wigner3j(l1, l2, l3, ma, mb, mc);
            }
    return pre * sum.real();
}

/// Gaunt coefficients C(L1 L2 | L3) cached for l1, l2 <= l_max and l3 <= 2 l_max.
/// Built once; read-only afterwards.
class GauntTable {
public:
    struct Entry {
        int lm3;
        double value;
    };

    explicit GauntTable(int l_max) : l_max_(l_max), n_(num_lm(l_max)) {
        if (l_max < 0) throw std::invalid_argument("GauntTable: negative l_max");
        entries_.resize(static_cast<std::size_t>(n_ * n_));
        for (int a = 0; a < n_; ++a) {
            const AngularIndex L1 = lm_from_index(a);
            for (int b = 0; b < n_; ++b) {
                const AngularIndex L2 = lm_from_index(b);
                auto& list = entries_[static_cast<std::size_t>(a * n_ + b)];
                for (int l3 = std::abs(L1.l - L2.l); l3 <= L1.l + L2.l; l3 += 2)
                    for (int m3 = -l3; m3 <= l3; ++m3) {
                        const double v = gaunt(L1, L2, {l3, m3});
                        if (std::abs(v) > 1e-14) list.push_back({lm_index(l3, m3), v});
                    }
            }
        }
    }

    int l_max() const noexcept { return l_max_; }

    /// Nonzero C(L1 L2 | L3) over L3.
    const std::vector<Entry>& row(int lm1, int lm2) const {
        return entries_[static_cast<std::size_t>(lm1 * n_ + lm2)];
    }

    double operator()(AngularIndex L1, AngularIndex L2, AngularIndex L3) const {
        if (L1.l > l_max_ || L2.l > l_max_) throw std::out_of_range("GauntTable: l beyond cached range");
        for (const auto& e : row(lm_index(L1), lm_index(L2)))
            if (e.lm3 == lm_index(L3)) return e.value;
        return 0.0;
    }

private:
    int l_max_;
    int n_;
    std::vector<std::vector<Entry>> entries_;
};

}  // namespace mskit
