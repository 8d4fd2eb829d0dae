#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mskit/opcount.hpp"

using namespace mskit;

TEST(Predict, PublishedRatios) {
    for (int n : {1, 13, 459}) {
        const auto m = CostModel::uniform(n, 6, 3, 0.01, 3.0);
        // a = 16 N, b = 33 N
        EXPECT_EQ(m.a(), 16.0 * n);
        EXPECT_EQ(m.b(), 33.0 * n);
        EXPECT_NEAR(predicted_ratio(m, Task::tau_col), (16.0 * 16 * 16 / 3 + 3 * 0.01 * 16 * 16 * 33) / (49.0 * 49 * 49 / 3), 1e-15);
        EXPECT_NEAR(100 * predicted_ratio(m, Task::tau_col), 4.1, 0.05);
        EXPECT_NEAR(100 * predicted_ratio(m, Task::tau_diag), 3.7, 0.05);
    }
}

TEST(Predict, ZeroFillIsZhang) {
    const auto m = CostModel::uniform(20, 6, 3, 0.0, 3.0);
    EXPECT_DOUBLE_EQ(predict_nop(m, Task::tau_col, Mode::ours_sparse).leading, std::pow(m.a(), 3) / 3);
    EXPECT_DOUBLE_EQ(predict_nop(m, Task::tau_col, Mode::ours_sparse).leading, predict_nop(m, Task::tau_col, Mode::zhang).leading);
}

TEST(Predict, Monotone) {
    for (Task task : {Task::tau_col, Task::tau_diag})
        for (Mode mode : {Mode::standard, Mode::ours_dense, Mode::ours_sparse, Mode::zhang}) {
            double prev = 0;
            for (int n : {1, 2, 13, 100}) {
                const double v = predict_nop(CostModel::uniform(n, 5, 2, 0.1), task, mode).total();
                EXPECT_GT(v, prev);
                prev = v;
            }
            if (mode == Mode::standard) continue;
            prev = 0;
            for (int l : {0, 1, 2, 3, 4}) {
                const double v = predict_nop(CostModel::uniform(13, 5, l, 0.1), task, mode).leading;
                EXPECT_GT(v, prev) << to_string(mode) << " lpt=" << l;
                prev = v;
            }
        }
    double prev = 0;
    for (double p : {0.001, 0.01, 0.1, 0.5, 1.0}) {
        const double v = predict_nop(CostModel::uniform(13, 5, 2, p), Task::tau_diag, Mode::ours_sparse).total();
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Predict, Validation) {
    EXPECT_THROW(predict_nop(CostModel::uniform(3, 4, 5), Task::tau_col, Mode::standard), std::invalid_argument);
    EXPECT_THROW(predict_nop(CostModel::uniform(3, 4, 2, 1.5), Task::tau_col, Mode::standard), std::invalid_argument);
    EXPECT_THROW(predict_nop(CostModel::uniform(3, 4, 2, 0.1, 0.5), Task::tau_col, Mode::standard), std::invalid_argument);
    EXPECT_THROW(predict_nop(CostModel{}, Task::tau_col, Mode::standard), std::invalid_argument);
}

TEST(Measure, DenseLuNearCubeOverThree) {
    for (int n : {200, 320}) {
        OpCounter ops;
        CountedLU lu(fixtures::random_well_conditioned(n, 1), &ops);
        EXPECT_NEAR(static_cast<double>(ops.mults) / (std::pow(n, 3) / 3), 1.0, 0.15);
    }
}

TEST(Measure, SparseProductExact) {
    const MatrixXc B = fixtures::random_well_conditioned(40, 2).leftCols(90 / 3);
    const auto s = sparsify_B(B, 0.05);
    const MatrixXc C = MatrixXc::Random(30, 40);
    OpCounter ops;
    s.B.times(C, &ops);
    // p a^2 b with B (a x b) and C (b x a)
    EXPECT_EQ(ops.mults, s.B.nnz() * 40u);
    EXPECT_EQ(s.B.nnz(), static_cast<std::size_t>(std::ceil(0.05 * 40 * 30)));
}

TEST(Measure, PipelineAgreesWithPrediction) {
    for (const Model& m : {fixtures::fcc13(4, 2), fixtures::honeycomb_ec(4, 3, 2, 1.5)}) {
        const auto sys = m.system(cplx(0.7, 0.01));
        for (Task task : {Task::tau_col, Task::tau_diag})
            for (auto mode : {SolverMode::standard(), SolverMode::exact_schur(), SolverMode::ours(), SolverMode::ours_sparse(0.03), SolverMode::zhang()}) {
                const auto r = solve_tau(sys, task, mode);
                const double pred = predict_nop(CostModel::from_scheme(sys.scheme, mode.p), task, mode.kind).total();
                EXPECT_NEAR(static_cast<double>(r.nop) / pred, 1.0, 0.25) << to_string(task) << " " << to_string(mode.kind);
            }
    }
}
