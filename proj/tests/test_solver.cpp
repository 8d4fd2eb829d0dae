#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "mskit/solver.hpp"

using namespace mskit;
using fixtures::rel;

namespace {

const cplx kE(0.6, 0.01);

std::vector<SolverMode> all_modes() {
    return {SolverMode::standard(), SolverMode::exact_schur(), SolverMode::ours(), SolverMode::ours_sparse(0.1), SolverMode::zhang()};
}

}  // namespace

TEST(Partition, SmallChannelsComeFirst) {
    const PartitionScheme s({1, 0, 2}, 2);
    EXPECT_EQ(s.a(), 4 + 1 + 9);
    EXPECT_EQ(s.b(), 5 + 8 + 0);
    // site 1, L = 0 is the fifth small channel; site 0, L = 4 the first large one
    EXPECT_EQ(s.local_to_partitioned(1, 0), 4);
    EXPECT_EQ(s.local_to_partitioned(0, 4), s.a());
    EXPECT_EQ(s.local_to_partitioned(1, 1), s.a() + 5);
    std::set<Eigen::Index> seen(s.order().begin(), s.order().end());
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(s.dim()));
    for (Eigen::Index p = 0; p < s.dim(); ++p) EXPECT_EQ(s.position()[static_cast<std::size_t>(s.order()[static_cast<std::size_t>(p)])], p);
    EXPECT_THROW(PartitionScheme({3}, 2), std::invalid_argument);
}

TEST(Partition, ReassemblyIsBitwise) {
    const PartitionScheme s({1, 2, 0, 3}, 3);
    const MatrixXc M = fixtures::random_well_conditioned(s.dim(), 3);
    const auto P = partition(M, s);
    EXPECT_EQ(reassemble(P, s), M);
    EXPECT_EQ(s.unpermute(s.permute(M)), M);
}

TEST(Partition, ExactSchurMatchesDenseInverse) {
    for (const auto& lpt : {std::vector<int>{2, 2, 2}, std::vector<int>{0, 3, 1, 2}, std::vector<int>{3, 3}, std::vector<int>{0, 0}}) {
        const PartitionScheme s(lpt, 3);
        const MatrixXc M = fixtures::random_well_conditioned(s.dim(), 5 + lpt.size());
        OpCounter ops;
        const auto inv = exact_schur_inverse(partition(M, s), &ops);
        EXPECT_LT(rel(s.unpermute(inv.assemble()), Eigen::PartialPivLU<MatrixXc>(M).inverse()), 1e-12);
        EXPECT_GT(ops.mults, 0u);
    }
    const auto sys = fixtures::fcc13(4, 2).system(kE);
    const MatrixXc M = assemble_M(sys.t, sys.g);
    EXPECT_LT(rel(sys.scheme.unpermute(exact_schur_inverse(partition(M, sys.scheme)).assemble()), Eigen::PartialPivLU<MatrixXc>(M).inverse()),
              1e-10);
}

TEST(Partition, ApproxEqualsExactWhenDIsUnit) {
    const PartitionScheme s({1, 2, 1}, 2);
    MatrixXc M = fixtures::random_well_conditioned(s.dim(), 9);
    auto P = partition(M, s);
    P.D.setIdentity();
    const auto exact = exact_schur_inverse(P);
    const auto approx = approx_inverse_blocks(P);
    EXPECT_LT(rel(approx.assemble(), exact.assemble()), 1e-12);
    const auto sp = sparsify_B(P.B, 1.0);
    EXPECT_LT(rel(approx_inverse_blocks(P, &sp.B).assemble(), exact.assemble()), 1e-12);
}

TEST(Sparsify, CountsAndSelection) {
    const MatrixXc B = fixtures::random_well_conditioned(30, 4).leftCols(20) - MatrixXc::Identity(30, 20);
    const auto all = sparsify_B(B, 1.0);
    EXPECT_EQ(all.B.nnz(), 600u);
    EXPECT_EQ(all.B.to_dense(), B);
    std::size_t prev = 0;
    for (double p : {0.001, 0.01, 0.05, 0.3, 0.7, 1.0}) {
        const auto r = sparsify_B(B, p);
        EXPECT_EQ(r.B.nnz(), static_cast<std::size_t>(std::ceil(p * 600 - 1e-9)));
        EXPECT_GE(r.B.nnz(), prev);
        prev = r.B.nnz();
        // every kept magnitude beats every dropped one
        const MatrixXc d = r.B.to_dense();
        double min_kept = 1e300, max_dropped = 0;
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j) {
                if (d(i, j) != cplx(0)) min_kept = std::min(min_kept, std::abs(B(i, j)));
                else max_dropped = std::max(max_dropped, std::abs(B(i, j)));
            }
        EXPECT_GE(min_kept, max_dropped);
    }
    MatrixXc one = MatrixXc::Constant(4, 5, 1e-3);
    one(2, 3) = 10.0;
    const auto top = sparsify_B(one, 0.01);
    ASSERT_EQ(top.B.nnz(), 1u);
    EXPECT_EQ(top.B.row[0], 2);
    EXPECT_EQ(top.B.col[0], 3);
    EXPECT_EQ(top.threshold, 10.0);
    // ties: lowest (row, col) wins
    const auto tie = sparsify_B(MatrixXc::Constant(3, 3, 1.0), 0.2);
    ASSERT_EQ(tie.B.nnz(), 2u);
    EXPECT_EQ(tie.B.row[0], 0);
    EXPECT_EQ(tie.B.col[1], 1);
    EXPECT_THROW(sparsify_B(B, 0.0), std::invalid_argument);
    EXPECT_THROW(sparsify_B(B, 1.5), std::invalid_argument);
}

TEST(Sparsify, ThresholdReuseAndPerBlock) {
    const PartitionScheme s({1, 1, 2}, 2);
    const MatrixXc M = fixtures::random_well_conditioned(s.dim(), 12, 3.0);
    const MatrixXc B = partition(M, s).B;
    const auto first = sparsify_B(B, 0.1);
    const auto again = sparsify_B(B, 0.1, first.threshold);
    EXPECT_EQ(again.B.nnz(), first.B.nnz());
    const auto pb = sparsify_B(B, 0.1, std::nullopt, SparsifyScope::per_block, &s);
    // at least one entry from every (i, j) block with large channels
    EXPECT_GE(pb.B.nnz(), 6u);
    EXPECT_THROW(sparsify_B(B, 0.1, std::nullopt, SparsifyScope::per_block), std::invalid_argument);
}

TEST(Solver, ModeNames) {
    for (Mode m : {Mode::standard, Mode::exact_schur, Mode::ours_dense, Mode::ours_sparse, Mode::zhang}) EXPECT_EQ(parse_mode(to_string(m)), m);
    EXPECT_THROW(parse_mode("fast"), std::invalid_argument);
}

TEST(Solver, DimerClosedForm) {
    // l_max = 0: tau00 = t / (1 - t^2 g^2), tau10 = t g tau00
    const Cluster d = build_shells({{0, 0, 0}, {0, 0, 3.0}}).with_species({{0, 0, 1.4}});
    SpeciesModel sp;
    sp.potential = RadialPotential::square_well(-0.8, 1.4, 400);
    const Model m(d, 0, {{0, sp}}, 1);
    const auto sys = m.system(kE);
    const cplx t = sys.t[0](0, 0), g = sys.g.block(0, 1)(0, 0);
    const cplx tau00 = t / (1.0 - t * t * g * g), tau10 = t * g * tau00;
    for (const auto& mode : all_modes()) {
        const auto r = tau_col(sys, 0, mode);
        EXPECT_LT(std::abs(r.blocks[0](0, 0) - tau00), 1e-13 * std::abs(tau00)) << to_string(mode.kind);
        EXPECT_LT(std::abs(r.blocks[1](0, 0) - tau10), 1e-13 * std::abs(tau10)) << to_string(mode.kind);
    }
}

TEST(Solver, SingleSiteTauIsT) {
    const Cluster one = build_shells({{0, 0, 0}}).with_species({{0, 1, 2.0}});
    SpeciesModel sp;
    sp.potential = RadialPotential::square_well(-0.5, 2.0, 300);
    const auto sys = Model(one, 3, {{0, sp}}, 1).system(kE);
    for (const auto& mode : all_modes()) {
        EXPECT_EQ(tau_col(sys, 0, mode).blocks[0], sys.t[0]) << to_string(mode.kind);
        EXPECT_EQ(tau_site_diagonal(sys, mode).blocks[0], sys.t[0]) << to_string(mode.kind);
    }
}

TEST(Solver, FullPartitionEqualsStandard) {
    const auto sys = fixtures::fcc13(3, 3).system(kE);
    for (Task task : {Task::tau_col, Task::tau_diag}) {
        const auto ref = solve_tau(sys, task, SolverMode::standard());
        for (const auto& mode : all_modes()) EXPECT_LT(error_metrics(solve_tau(sys, task, mode), ref).frobenius_rel, 1e-12);
    }
}

TEST(Solver, ExactSchurEqualsStandard) {
    const auto sys = fixtures::honeycomb_ec(3, 2, 1, 1.5).system(kE);
    for (Task task : {Task::tau_col, Task::tau_diag}) {
        const auto ref = solve_tau(sys, task, SolverMode::standard(), 2);
        EXPECT_LT(error_metrics(solve_tau(sys, task, SolverMode::exact_schur(), 2), ref).frobenius_rel, 1e-11);
    }
}

TEST(Solver, SparseAtPOneEqualsDense) {
    const auto sys = fixtures::fcc13(3, 1).system(kE);
    for (Task task : {Task::tau_col, Task::tau_diag}) {
        const auto dense = solve_tau(sys, task, SolverMode::ours());
        EXPECT_LT(error_metrics(solve_tau(sys, task, SolverMode::ours_sparse(1.0)), dense).frobenius_rel, 1e-14);
    }
}

TEST(Solver, ZhangEqualsOursWithoutLargeLScattering) {
    auto sys = fixtures::fcc13(3, 1).system(kE);
    for (std::size_t i = 0; i < sys.t.size(); ++i) {
        const Eigen::Index ns = sys.scheme.n_small(static_cast<int>(i));
        MatrixXc t = MatrixXc::Zero(sys.t[i].rows(), sys.t[i].cols());
        t.topLeftCorner(ns, ns) = sys.t[i].topLeftCorner(ns, ns);
        sys.t[i] = t;
    }
    for (Task task : {Task::tau_col, Task::tau_diag}) {
        const auto ref = solve_tau(sys, task, SolverMode::standard());
        EXPECT_LT(error_metrics(solve_tau(sys, task, SolverMode::zhang()), ref).frobenius_rel, 1e-12);
        EXPECT_LT(error_metrics(solve_tau(sys, task, SolverMode::ours()), ref).frobenius_rel, 1e-12);
    }
}

TEST(Solver, ColumnAndDiagonalAgree) {
    // tau^{00} from both tasks uses the same approximate inverse
    const auto sys = fixtures::fcc13(3, 1).system(kE);
    for (const auto& mode : all_modes()) {
        const auto c = tau_col(sys, 0, mode), d = tau_site_diagonal(sys, mode);
        EXPECT_LT(rel(c.blocks[0], d.blocks[0]), 1e-12) << to_string(mode.kind);
    }
    const auto c5 = tau_col(sys, 5, SolverMode::ours()), d = tau_site_diagonal(sys, SolverMode::ours());
    EXPECT_LT(rel(c5.blocks[5], d.blocks[5]), 1e-12);
}

TEST(Solver, OursBeatsZhangOnFcc) {
    const Model m = fixtures::fcc13(4, 2);
    for (double e : {0.3, 0.7, 1.1}) {
        const auto sys = m.system(cplx(e, 0.01));
        const auto ref = tau_col(sys, 0, SolverMode::standard());
        EXPECT_LT(error_metrics(tau_col(sys, 0, SolverMode::ours()), ref).frobenius_rel,
                  error_metrics(tau_col(sys, 0, SolverMode::zhang()), ref).frobenius_rel);
    }
}

TEST(Solver, ErrorsAndMetadata) {
    const auto sys = fixtures::fcc13(2, 1).system(kE);
    EXPECT_THROW(tau_col(sys, 13, SolverMode::standard()), std::out_of_range);
    const auto a = tau_col(sys, 0, SolverMode::standard());
    const auto b = tau_site_diagonal(sys, SolverMode::standard());
    EXPECT_THROW(error_metrics(a, b), std::invalid_argument);
    const auto sp = tau_col(sys, 0, SolverMode::ours_sparse(0.05));
    EXPECT_NEAR(sp.kept_fraction, 0.05, 0.01);
    EXPECT_GT(sp.threshold, 0.0);
    EXPECT_GT(a.rcond, 0.0);
    EXPECT_LE(a.rcond, 1.0);
    EXPECT_EQ(error_metrics(a, a).max_abs, 0.0);
}
