#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mskit/linalg.hpp"

using namespace mskit;
using fixtures::rel;

TEST(CountedLU, CountMatchesClosedForm) {
    for (int n : {1, 2, 5, 63, 64, 65, 130, 200})
        for (int nb : {1, 7, 64}) {
            OpCounter ops;
            CountedLU lu(fixtures::random_well_conditioned(n, static_cast<std::uint64_t>(n)), &ops, nb);
            EXPECT_EQ(ops.mults, lu_mults(static_cast<std::uint64_t>(n))) << "n=" << n << " nb=" << nb;
        }
}

TEST(CountedLU, SolveAndInverseAgainstEigen) {
    for (int n : {3, 64, 150}) {
        const MatrixXc A = fixtures::random_well_conditioned(n, 42 + static_cast<std::uint64_t>(n), 2.0);
        const MatrixXc B = fixtures::random_well_conditioned(n, 7, 1.0).leftCols(5);
        const Eigen::PartialPivLU<MatrixXc> ref(A);
        CountedLU lu(A, nullptr, 16);
        OpCounter s;
        EXPECT_LT(rel(lu.solve(B, &s), ref.solve(B)), 1e-12);
        EXPECT_EQ(s.mults, static_cast<std::uint64_t>(n) * n * 5);
        OpCounter inv;
        EXPECT_LT(rel(lu.inverse(&inv), ref.inverse()), 1e-12);
        // about 2 n^3 / 3
        const double expect = 2.0 * n * n * n / 3.0;
        EXPECT_NEAR(static_cast<double>(inv.mults) / expect, 1.0, 3.0 / n + 0.01);
    }
}

TEST(CountedLU, PivotingAndSingular) {
    MatrixXc A(2, 2);
    A << 0, 1, 1, 0;
    CountedLU lu(A);
    EXPECT_EQ(lu.perm()[0], 1);
    EXPECT_LT((lu.inverse() - A).norm(), 1e-15);
    MatrixXc Z = MatrixXc::Zero(3, 3);
    Z(0, 0) = 1;
    EXPECT_THROW(CountedLU{Z}, SingularMatrix);
    EXPECT_THROW(CountedLU{MatrixXc(2, 3)}, std::invalid_argument);
}

TEST(CountedLU, ConditionEstimate) {
    const MatrixXc I4 = MatrixXc::Identity(4, 4);
    EXPECT_NEAR(CountedLU(I4).rcond(), 1.0, 1e-14);
    MatrixXc D = I4;
    D(3, 3) = 1e-8;
    const double rc = CountedLU(D).rcond();
    EXPECT_NEAR(rc, 1e-8, 1e-10);
}

TEST(Products, CountedProduct) {
    OpCounter ops;
    const MatrixXc a = MatrixXc::Random(4, 6), b = MatrixXc::Random(6, 3);
    EXPECT_LT(rel(counted_product(a, b, &ops), a * b), 1e-15);
    EXPECT_EQ(ops.mults, 72u);
}

TEST(Sparse, DenseRoundTripAndCounts) {
    MatrixXc d = MatrixXc::Zero(5, 7);
    d(0, 1) = {1, 2};
    d(3, 6) = -4.0;
    d(4, 0) = {0, 1};
    const auto s = SparseMatrix::from_dense(d);
    EXPECT_EQ(s.nnz(), 3u);
    EXPECT_NEAR(s.density(), 3.0 / 35.0, 1e-15);
    EXPECT_EQ(s.to_dense(), d);
    EXPECT_EQ(s.column(6), d.col(6));

    const MatrixXc x = MatrixXc::Random(7, 4);
    OpCounter ops;
    EXPECT_LT(rel(s.times(x, &ops), d * x), 1e-15);
    EXPECT_EQ(ops.mults, 12u);

    const MatrixXc y = MatrixXc::Random(3, 5);
    OpCounter lops;
    EXPECT_LT(rel(s.left_times_columns(y, 1, 6, &lops), (y * d).middleCols(1, 6)), 1e-15);
    EXPECT_EQ(lops.mults, 2u * 3u);
    EXPECT_THROW(s.times(MatrixXc(3, 1)), std::invalid_argument);
}
