#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "mskit/dos.hpp"
#include "mskit/verify.hpp"

using namespace mskit;

namespace {

cplx sph_y(int l, cplx z) { return (sph_hankel_plus(l, z) - sph_bessel_j(l, z)) / I; }

// 20-point Gauss-Legendre on [a, b] over `panels` panels
template <class F>
cplx gauss(F&& f, double a, double b, int panels = 16) {
    static const auto xw = [] {
        const int n = 20;
        std::vector<std::pair<double, double>> out;
        for (int i = 0; i < n; ++i) {
            double z = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1);
                z -= p1 / dp;
            }
            out.emplace_back(z, 2 / ((1 - z * z) * dp * dp));
        }
        return out;
    }();
    cplx s = 0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
        for (const auto& [x, w] : xw) s += 0.5 * (hi - lo) * w * f(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
    }
    return s;
}

// Isolated square well: G_l(r, r) = -i kappa phi_l(r) psi_l(r), phi regular and equal
// to j_l - i kappa t_l h_l outside, psi equal to h_l outside. Both are closed-form
// Bessel combinations inside the well.
double square_well_dos(double v0, double rb, cplx E, int l_max, double r_in) {
    const cplx k = wave_number(E), kp = std::sqrt(2.0 * (E - v0));
    cplx total = 0;
    for (int l = 0; l <= l_max; ++l) {
        const auto ji = sph_bessel_j_vs(l, kp * rb), hi = sph_hankel_plus_vs(l, kp * rb);
        const auto jo = sph_bessel_j_vs(l, k * rb), ho = sph_hankel_plus_vs(l, k * rb);
        const cplx yi = (hi.value - ji.value) / I, dyi = (hi.slope - ji.slope) / I;
        // phi = A j_l(k'r); t from the log-derivative match, A from the value
        const cplx ws = jo.value * kp * ji.slope - ji.value * k * jo.slope;
        const cplx we = -I * k * (ho.value * kp * ji.slope - ji.value * k * ho.slope);
        const cplx t = -ws / we;
        const cplx A = (jo.value - I * k * t * ho.value) / ji.value;
        // psi = B j(k'r) + C y(k'r)
        Eigen::Matrix2cd M;
        M << ji.value, yi, kp * ji.slope, kp * dyi;
        const Eigen::Vector2cd bc = M.fullPivLu().solve(Eigen::Vector2cd(ho.value, k * ho.slope));
        total += static_cast<double>(2 * l + 1) * gauss(
                                                      [&](double r) {
                                                          const cplx phi = A * sph_bessel_j(l, kp * r);
                                                          const cplx psi = bc(0) * sph_bessel_j(l, kp * r) + bc(1) * sph_y(l, kp * r);
                                                          return r * r * (-I * k) * phi * psi;
                                                      },
                                                      0.0, r_in);
    }
    return -2.0 / pi * total.imag();
}

}  // namespace

TEST(Quadrature, IntegrateUniform) {
    auto samples = [](int n, double xmax) {
        std::vector<cplx> f;
        for (int k = 0; k <= n; ++k) {
            const double x = xmax * k / n;
            f.emplace_back(x * x * std::sin(x), std::cos(2 * x));
        }
        return f;
    };
    auto exact = [](double a) {
        return cplx(-a * a * std::cos(a) + 2 * a * std::sin(a) + 2 * std::cos(a) - 2, 0.5 * std::sin(2 * a));
    };
    for (double end : {3.0, 2.37, 0.05, 0.3})
        for (int n : {40, 41}) EXPECT_LT(std::abs(integrate_uniform(samples(n, 3.0), 3.0 / n, end) - exact(end)), 1e-5) << end;
    // fourth-order convergence under step halving, limits on the mesh so the
    // ragged-end panel does not change shape between levels
    for (double end : {3.0, 2.4}) {
        const double e1 = std::abs(integrate_uniform(samples(20, 3.0), 0.15, end) - exact(end));
        const double e2 = std::abs(integrate_uniform(samples(40, 3.0), 0.075, end) - exact(end));
        const double e3 = std::abs(integrate_uniform(samples(80, 3.0), 0.0375, end) - exact(end));
        EXPECT_NEAR(e1 / e2, 16.0, 0.2 * 16.0) << end;
        EXPECT_NEAR(e2 / e3, 16.0, 0.2 * 16.0) << end;
    }
    EXPECT_THROW(integrate_uniform(samples(10, 3.0), 0.3, 3.5), std::invalid_argument);
}

TEST(Rho, FreeBesselIntegral) {
    // int_0^a r^2 j_l(kr)^2 dr = a^3/2 [j_l(ka)^2 - j_{l-1}(ka) j_{l+1}(ka)]
    const double rb = 2.5;
    const cplx E(0.8, 0.02), k = wave_number(E);
    const auto s = solve_site(RadialPotential::zero(rb, 1000), 3, E, true);
    for (double a : {2.5, 1.7}) {
        const auto rho = rho_integrals(s, a);
        for (int l = 0; l <= 3; ++l) {
            const cplx c = s.regular[static_cast<std::size_t>(l)].at_rb() / sph_bessel_j(l, k * rb);
            const cplx z = k * a;
            const cplx jm = l == 0 ? std::cos(z) / z : sph_bessel_j(l - 1, z);
            const cplx ref = 0.5 * a * a * a * (std::pow(sph_bessel_j(l, z), 2) - jm * sph_bessel_j(l + 1, z));
            const cplx got = rho.rho(lm_index(l, 0), lm_index(l, 0)) / (c * c);
            EXPECT_LT(std::abs(got - ref), 1e-7 * std::abs(ref)) << "l=" << l << " a=" << a;
        }
    }
}

TEST(Rho, VanishingRadius) {
    const auto s = solve_site(RadialPotential::square_well(-0.5, 2.0, 800), 2, cplx(0.5, 0.01), true);
    const auto r0 = rho_integrals(s, 0.0);
    EXPECT_EQ(r0.rho.norm(), 0.0);
    EXPECT_EQ(r0.rho_bar.norm(), 0.0);
    const auto small = rho_integrals(s, 0.01), tiny = rho_integrals(s, 0.001);
    EXPECT_LT(tiny.rho.norm(), small.rho.norm());
    EXPECT_THROW(rho_integrals(s, 2.5), std::invalid_argument);
    EXPECT_THROW(rho_integrals(solve_site(RadialPotential::zero(2.0, 100), 1, 0.5, false), 1.0), std::invalid_argument);
}

TEST(LocalDos, FreeSphereOracle) {
    const double rb = 2.5;
    const auto V = RadialPotential::square_well(-1e-5, rb, 1200);
    for (double e : {0.1, 0.5, 1.4}) {
        const cplx E(e, 0.01);
        const auto s = solve_site(V, 3, E, true);
        const auto n = local_dos(s.matrices.t_mat, s.matrices, rho_integrals(s, rb));
        ASSERT_TRUE(n.valid);
        EXPECT_NEAR(n.n / free_sphere_dos(E, 3, rb), 1.0, 1e-3) << e;
    }
    // exactly free: S = 0, flagged
    const auto f = solve_site(RadialPotential::zero(rb, 400), 2, cplx(0.5, 0.01), true);
    EXPECT_FALSE(local_dos(f.matrices.t_mat, f.matrices, rho_integrals(f, rb)).valid);
}

TEST(LocalDos, IsolatedScattererOracle) {
    const double v0 = -0.7, rb = 2.2;
    const auto V = RadialPotential::square_well(v0, rb, 1500);
    for (double e : {0.2, 0.6, 1.3})
        for (double r_in : {2.2, 1.6}) {
            const cplx E(e, 0.02);
            const auto s = solve_site(V, 3, E, true);
            // an isolated site has tau = t
            const auto n = local_dos(s.matrices.t_mat, s.matrices, rho_integrals(s, r_in));
            const double ref = square_well_dos(v0, rb, E, 3, r_in);
            EXPECT_NEAR(n.n, ref, 1e-5 * std::abs(ref)) << "E=" << e << " Rin=" << r_in;
        }
}

TEST(LocalDos, LorentzianWeightConserved) {
    const auto V = RadialPotential::square_well(-1.5, 2.0, 600);
    auto weight = [&](double eta) {
        double s = 0, prev = 0;
        const int n = 300;
        for (int k = 0; k <= n; ++k) {
            const double e = 0.1 + 2.4 * k / n;
            const auto site = solve_site(V, 2, cplx(e, eta), true);
            const double v = local_dos(site.matrices.t_mat, site.matrices, rho_integrals(site, 2.0)).n;
            if (k > 0) s += 0.5 * (v + prev) * 2.4 / n;
            prev = v;
        }
        return s;
    };
    const double a = weight(0.01), b = weight(0.04);
    EXPECT_NEAR(b / a, 1.0, 0.02);
}

TEST(Broadening, Limits) {
    std::vector<double> x, y;
    for (int k = 0; k < 40; ++k) {
        x.push_back(0.1 * k);
        y.push_back(std::sin(0.3 * k) + 0.05 * k);
    }
    EXPECT_EQ(gaussian_broaden(x, y, 0.0), y);
    const auto flat = gaussian_broaden(x, y, 1e4);
    double mean = 0;
    for (double v : y) mean += v / static_cast<double>(y.size());
    for (double v : flat) EXPECT_NEAR(v, mean, 1e-6);
    std::vector<bool> valid(40, true);
    valid[7] = false;
    auto spiked = y;
    spiked[7] = 1e6;
    const auto b = gaussian_broaden(x, spiked, 0.2, valid);
    for (double v : b) EXPECT_LT(std::abs(v), 10.0);
    EXPECT_THROW(gaussian_broaden(x, y, -1.0), std::invalid_argument);
}

TEST(DosSweep, PositivityAndOrdering) {
    const Model m = fixtures::fcc13(4, 2);
    const auto grid = fixtures::grid(0.2, 1.4, 16, 0.01);
    const auto d = dos_sweep(m, {SolverMode::standard(), SolverMode::ours(), SolverMode::zhang()}, grid);
    ASSERT_TRUE(d.failures.empty());
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    for (int i : {0, 1, 7}) {
        const auto si = static_cast<std::size_t>(i);
        std::vector<double> e_ours, e_zhang;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            ASSERT_TRUE(d.valid[0][si][k]);
            EXPECT_GE(d.n[0][si][k], -1e-6);
            const double ref = d.n[0][si][k];
            e_ours.push_back(std::abs(d.n[1][si][k] - ref));
            e_zhang.push_back(std::abs(d.n[2][si][k] - ref));
        }
        EXPECT_LT(median(e_ours), median(e_zhang)) << "site " << i;
    }

    // sigma = 0 leaves the raw curve; threads do not change results
    const auto t2 = dos_sweep(m, {SolverMode::ours()}, grid, 0.0, 2);
    EXPECT_EQ(t2.n[0], d.n[1]);
}
