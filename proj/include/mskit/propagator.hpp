#pragma once

// Free-electron real-space structure constants.
//
// g^{ij}_{LL'} is defined by the two-centre re-expansion
//     H_L(kappa, r - R) = sum_{L'} g_{LL'}(R) J_{L'}(kappa, r),   |r| < |R|,
// with R = pos_i - pos_j, J_L = j_l(kappa r) Y_L and H_L = -i kappa h+_l(kappa r) Y_L.
// The closed form evaluated here is
//     g_{LL'}(R) = 4 pi sum_{L''} i^{l'-l-l''} C(L L'|L'') (-i kappa) h+_{l''}(kappa R) Y_{L''}(R^)
// whose phase was fixed against the identity above (see verify_reexpansion).

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <stdexcept>
#include <vector>

#include "mskit/angmom.hpp"
#include "mskit/cluster.hpp"

namespace mskit {

using Matrix = Eigen::MatrixXcd;

namespace detail {

// i^e for even e
inline double even_power_of_i(int e) {
    const int half = e / 2;
    return (half % 2 == 0) ? 1.0 : -1.0;
}

// m3 values for which a real Gaunt coefficient with m1, m2 can be nonzero.
inline std::vector<int> gaunt_m3_candidates(int m1, int m2) {
    std::vector<int> out;
    for (int s : {std::abs(m1) + std::abs(m2), std::abs(std::abs(m1) - std::abs(m2))})
        for (int sign : {1, -1}) {
            const int m3 = sign * s;
            if (std::find(out.begin(), out.end(), m3) == out.end()) out.push_back(m3);
        }
    return out;
}

}  // namespace detail

/// One (i, j) block evaluated on the fly, rows l <= l_row, columns l' <= l_col.
/// Used for re-expansion tails beyond the cached Gaunt range.
inline Matrix structure_block(const Vec3& R, cplx kappa, int l_row, int l_col) {
    const double d = norm(R);
    if (d <= kMinSeparation) throw std::invalid_argument("structure_block: coincident sites");
    const Vec3 u{R[0] / d, R[1] / d, R[2] / d};
    const int l3max = l_row + l_col;
    const auto h = sph_hankel_plus_all(l3max, kappa * d);
    const auto Y = real_sph_harm_all(l3max, u);
    Matrix g = Matrix::Zero(num_lm(l_row), num_lm(l_col));
    for (int a = 0; a < num_lm(l_row); ++a) {
        const AngularIndex L = lm_from_index(a);
        for (int b = 0; b < num_lm(l_col); ++b) {
            const AngularIndex Lp = lm_from_index(b);
            const auto m3s = detail::gaunt_m3_candidates(L.m, Lp.m);
            cplx s = 0;
            for (int l3 = std::abs(L.l - Lp.l); l3 <= L.l + Lp.l; l3 += 2) {
                const double phase = detail::even_power_of_i(Lp.l - L.l - l3);
                for (int m3 : m3s) {
                    if (std::abs(m3) > l3) continue;
                    const double c = gaunt(L, Lp, {l3, m3});
                    if (c == 0.0) continue;
                    s += phase * c * h[static_cast<std::size_t>(l3)] * Y[static_cast<std::size_t>(lm_index(l3, m3))];
                }
            }
            g(a, b) = 4.0 * pi * (-I * kappa) * s;
        }
    }
    return g;
}

/// Blocked (site, L) x (site, L') matrix; site-diagonal blocks are zero.
class StructureConstants {
public:
    StructureConstants(int n_sites, int l_max, cplx kappa)
        : n_sites_(n_sites), l_max_(l_max), kappa_(kappa),
          g_(Matrix::Zero(static_cast<Eigen::Index>(n_sites) * num_lm(l_max), static_cast<Eigen::Index>(n_sites) * num_lm(l_max))) {}

    int n_sites() const noexcept { return n_sites_; }
    int l_max() const noexcept { return l_max_; }
    int block_size() const noexcept { return num_lm(l_max_); }
    cplx kappa() const noexcept { return kappa_; }
    const Matrix& matrix() const noexcept { return g_; }
    Matrix& matrix() noexcept { return g_; }

    auto block(int i, int j) const { return g_.block(i * block_size(), j * block_size(), block_size(), block_size()); }
    auto block(int i, int j) { return g_.block(i * block_size(), j * block_size(), block_size(), block_size()); }

private:
    int n_sites_;
    int l_max_;
    cplx kappa_;
    Matrix g_;
};

/// g for every ordered site pair. Only i < j is evaluated; the j,i block follows
/// from parity, g^{ji}_{LL'} = (-1)^{l+l'} g^{ij}_{LL'}.
inline StructureConstants structure_constants(const Cluster& cluster, cplx kappa, int l_max, const GauntTable& gt) {
    if (kappa == cplx(0.0)) throw std::invalid_argument("structure_constants: kappa must be nonzero");
    if (gt.l_max() < l_max) throw std::invalid_argument("structure_constants: Gaunt table too small");
    const int N = cluster.size();
    const int n = num_lm(l_max);
    StructureConstants g(N, l_max, kappa);
    const int l3max = 2 * l_max;
    std::vector<int> lvals(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) lvals[static_cast<std::size_t>(a)] = lm_from_index(a).l;

    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            const Vec3& pi_ = cluster.site(i).position;
            const Vec3& pj = cluster.site(j).position;
            const Vec3 R{pi_[0] - pj[0], pi_[1] - pj[1], pi_[2] - pj[2]};
            const double d = norm(R);
            if (d <= kMinSeparation) throw std::invalid_argument("structure_constants: coincident sites");
            const Vec3 u{R[0] / d, R[1] / d, R[2] / d};
            const auto h = sph_hankel_plus_all(l3max, kappa * d);
            const auto Y = real_sph_harm_all(l3max, u);
            auto bij = g.block(i, j);
            auto bji = g.block(j, i);
            for (int a = 0; a < n; ++a) {
                const int l = lvals[static_cast<std::size_t>(a)];
                for (int b = 0; b < n; ++b) {
                    const int lp = lvals[static_cast<std::size_t>(b)];
                    cplx s = 0;
                    for (const auto& e : gt.row(a, b)) {
                        const int l3 = lm_from_index(e.lm3).l;
                        s += detail::even_power_of_i(lp - l - l3) * e.value * h[static_cast<std::size_t>(l3)] *
                             Y[static_cast<std::size_t>(e.lm3)];
                    }
                    const cplx v = 4.0 * pi * (-I * kappa) * s;
                    bij(a, b) = v;
                    bji(a, b) = ((l + lp) % 2 == 0) ? v : -v;
                }
            }
        }
    return g;
}

inline StructureConstants structure_constants(const Cluster& cluster, cplx kappa, int l_max) {
    return structure_constants(cluster, kappa, l_max, GauntTable(l_max));
}

/// Max over test points and rows L of |LHS - RHS| / |LHS| for the re-expansion
/// of the (i, j) block. The stored block supplies l' <= l_max; columns beyond
/// that, up to `l_tail`, come from structure_block so the sum converges.
inline double verify_reexpansion(const StructureConstants& g, const Cluster& cluster, int i, int j,
                                 const std::vector<Vec3>& points, int l_tail = -1) {
    if (i == j) throw std::invalid_argument("verify_reexpansion: need two distinct sites");
    const Vec3& pi_ = cluster.site(i).position;
    const Vec3& pj = cluster.site(j).position;
    const Vec3 R{pi_[0] - pj[0], pi_[1] - pj[1], pi_[2] - pj[2]};
    const double d = norm(R);
    const cplx kap = g.kappa();
    const int l_max = g.l_max();
    double rmax = 0;
    for (const auto& r : points) {
        if (norm(r) >= d) throw std::invalid_argument("verify_reexpansion: test point outside the convergence sphere |r| < |R|");
        rmax = std::max(rmax, norm(r));
    }
    if (l_tail < 0) l_tail = l_max + 30 + static_cast<int>(std::abs(kap) * rmax);
    const Matrix tail = l_tail > l_max ? structure_block(R, kap, l_max, l_tail) : Matrix();
    const Matrix stored = g.block(i, j);

    double worst = 0;
    for (const auto& r : points) {
        const double rn = norm(r);
        const Vec3 dr{r[0] - R[0], r[1] - R[1], r[2] - R[2]};
        const double dn = norm(dr);
        const auto hl = sph_hankel_plus_all(l_max, kap * dn);
        const auto Yd = real_sph_harm_all(l_max, {dr[0] / dn, dr[1] / dn, dr[2] / dn});
        const int lcol = std::max(l_max, l_tail);
        const auto jl = sph_bessel_j_all(lcol, kap * rn);
        std::vector<double> Yr(static_cast<std::size_t>(num_lm(lcol)), 0.0);
        if (rn > 0) Yr = real_sph_harm_all(lcol, {r[0] / rn, r[1] / rn, r[2] / rn});
        else Yr[0] = 1.0 / std::sqrt(4.0 * pi);
        for (int a = 0; a < num_lm(l_max); ++a) {
            const int l = lm_from_index(a).l;
            const cplx lhs = -I * kap * hl[static_cast<std::size_t>(l)] * Yd[static_cast<std::size_t>(a)];
            cplx rhs = 0;
            for (int b = 0; b < num_lm(lcol); ++b) {
                const int lp = lm_from_index(b).l;
                const cplx coeff = b < num_lm(l_max) ? stored(a, b) : tail(a, b);
                rhs += coeff * jl[static_cast<std::size_t>(lp)] * Yr[static_cast<std::size_t>(b)];
            }
            if (std::abs(lhs) == 0.0) continue;
            worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
        }
    }
    return worst;
}

/// Debug dump: "MSKG" magic, int32 n_sites, int32 l_max, int32 dim, then dim*dim
/// row-major (float32 re, float32 im) pairs, little-endian.
inline void dump_structure_constants(const StructureConstants& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    auto put32 = [&](std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto putf = [&](float f) {
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        put32(v);
    };
    out.write("MSKG", 4);
    const auto dim = static_cast<std::uint32_t>(g.matrix().rows());
    put32(static_cast<std::uint32_t>(g.n_sites()));
    put32(static_cast<std::uint32_t>(g.l_max()));
    put32(dim);
    for (Eigen::Index r = 0; r < g.matrix().rows(); ++r)
        for (Eigen::Index c = 0; c < g.matrix().cols(); ++c) {
            putf(static_cast<float>(g.matrix()(r, c).real()));
            putf(static_cast<float>(g.matrix()(r, c).imag()));
        }
}

}  // namespace mskit
