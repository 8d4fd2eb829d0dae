#pragma once

// Shared test systems.

#include <random>

#include "mskit/pipeline.hpp"

namespace fixtures {

using namespace mskit;

// Copper-like 13-site fcc cluster of square wells.
inline Model fcc13(int l_max, int lpt, double v0 = -0.5, double rb = 2.3) {
    Cluster c = build_fcc_first_shell(3.61 * kBohrPerAngstrom).with_species({{0, lpt, rb}});
    SpeciesModel sp;
    sp.potential = RadialPotential::square_well(v0, rb, 600);
    sp.rin = rb;
    return Model(std::move(c), l_max, {{0, sp}}, 7);
}

// Graphene-like flake with empty cells at the hexagon centres; the atoms carry a
// synthetic anisotropic t.
inline Model honeycomb_ec(int l_max = 4, int lpt_atom = 3, int lpt_ec = 2, double radius_bonds = 2.0) {
    const double bond = 1.42 * kBohrPerAngstrom;
    const double rb = 0.5 * bond;
    Cluster c = build_honeycomb(bond, radius_bonds * bond, true).with_species({{0, lpt_atom, rb}, {1, lpt_ec, rb}});
    SpeciesModel atom;
    atom.id = 0;
    atom.potential = RadialPotential::soft_coulomb(4.0, 0.3, rb, 600);
    atom.rin = rb;
    atom.aniso_strength = 0.3;
    atom.aniso_decay = 1.0;
    SpeciesModel ec;
    ec.id = 1;
    ec.potential = RadialPotential::square_well(-0.1, rb, 400);
    ec.rin = rb;
    return Model(std::move(c), l_max, {{0, atom}, {1, ec}}, 11);
}

inline std::vector<cplx> grid(double e0, double e1, int n, double imag) {
    std::vector<cplx> g;
    for (int k = 0; k < n; ++k) g.emplace_back(e0 + (e1 - e0) * k / std::max(1, n - 1), imag);
    return g;
}

// I + noise, comfortably invertible
inline MatrixXc random_well_conditioned(Eigen::Index n, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXc m(n, n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) m(r, c) = cplx(g(rng), g(rng)) * (scale / std::sqrt(2.0 * static_cast<double>(n)));
    m += MatrixXc::Identity(n, n);
    return m;
}

inline double rel(const MatrixXc& x, const MatrixXc& ref) { return (x - ref).norm() / ref.norm(); }

}  // namespace fixtures
