#pragma once

// Scattering path operator tau = (I - t g)^-1 t, column blocks tau^{i0} and
// site-diagonal blocks tau^{ii}, in every solver mode.

#include <Eigen/Dense>

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mskit/linalg.hpp"
#include "mskit/partition.hpp"
#include "mskit/propagator.hpp"

namespace mskit {

enum class Mode { standard, exact_schur, ours_dense, ours_sparse, zhang };
enum class Task { tau_col, tau_diag };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::standard: return "standard";
        case Mode::exact_schur: return "exact-schur";
        case Mode::ours_dense: return "ours-dense";
        case Mode::ours_sparse: return "ours-sparse";
        case Mode::zhang: return "zhang";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::standard, Mode::exact_schur, Mode::ours_dense, Mode::ours_sparse, Mode::zhang})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown solver mode '" + s + "'");
}

inline const char* to_string(Task t) { return t == Task::tau_col ? "tau_col" : "tau_diag"; }

struct SolverMode {
    SolverMode(Mode k = Mode::standard, double p_ = 1.0) : kind(k), p(p_) {}

    Mode kind = Mode::standard;
    double p = 1.0;                    // ours_sparse only
    std::optional<double> threshold;   // reuse a previous energy's threshold
    SparsifyScope scope = SparsifyScope::global;

    static SolverMode standard() { return {}; }
    static SolverMode exact_schur() { return {Mode::exact_schur}; }
    static SolverMode ours() { return {Mode::ours_dense}; }
    static SolverMode ours_sparse(double p) { return {Mode::ours_sparse, p}; }
    static SolverMode zhang() { return {Mode::zhang}; }
};

/// Everything the solvers need at one energy.
struct ScatteringSystem {
    PartitionScheme scheme;
    std::vector<MatrixXc> t;
    StructureConstants g;
};

struct TauResult {
    Task task = Task::tau_col;
    SolverMode mode;
    int site0 = 0;                  // tau_col only
    std::vector<MatrixXc> blocks;   // tau^{i0} or tau^{ii}, one per site i
    std::uint64_t nop = 0;          // counted complex multiplications
    double wall_ms = 0;
    double rcond = 0;
    double threshold = 0;           // sparse B
    double kept_fraction = 1;
};

struct ErrorMetrics {
    double max_abs = 0;
    double frobenius_rel = 0;
};

inline ErrorMetrics error_metrics(const TauResult& approx, const TauResult& ref) {
    if (approx.task != ref.task || approx.blocks.size() != ref.blocks.size())
        throw std::invalid_argument("error_metrics: results have different shapes");
    ErrorMetrics e;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ref.blocks.size(); ++i) {
        const auto& x = approx.blocks[i];
        const auto& y = ref.blocks[i];
        if (x.rows() != y.rows() || x.cols() != y.cols()) throw std::invalid_argument("error_metrics: block shape mismatch");
        if (x.size() == 0) continue;
        e.max_abs = std::max(e.max_abs, (x - y).cwiseAbs().maxCoeff());
        num += (x - y).squaredNorm();
        den += y.squaredNorm();
    }
    e.frobenius_rel = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    return e;
}

namespace detail {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(); }
};

inline MatrixXc unit_columns(Eigen::Index rows, Eigen::Index first, Eigen::Index count) {
    MatrixXc e = MatrixXc::Zero(rows, count);
    for (Eigen::Index k = 0; k < count; ++k) e(first + k, k) = 1.0;
    return e;
}

// The small-l part of the system after the D ~ I treatment: B (dense or sparse), C.
struct ReducedSystem {
    PartitionedM P;
    std::optional<SparsifyResult> sparse;
};

inline ReducedSystem reduce(const ScatteringSystem& sys, const SolverMode& mode) {
    ReducedSystem r;
    if (mode.kind == Mode::zhang) {
        r.P = zhang_blocks(sys.t, sys.g, sys.scheme);
        return r;
    }
    r.P = partition(assemble_M(sys.t, sys.g), sys.scheme, false);
    if (mode.kind == Mode::ours_sparse) r.sparse = sparsify_B(r.P.B, mode.p, mode.threshold, mode.scope, &sys.scheme);
    return r;
}

// B * C, counted as the sparse or dense product actually performed.
inline MatrixXc bc_product(const ReducedSystem& r, OpCounter* ops) {
    if (r.sparse) return r.sparse->B.times(r.P.C, ops);
    return counted_product(r.P.B, r.P.C, ops);
}

// Columns [c0, c0 + nc) of B as a dense block.
inline MatrixXc b_columns(const ReducedSystem& r, Eigen::Index c0, Eigen::Index nc) {
    if (!r.sparse) return r.P.B.middleCols(c0, nc);
    MatrixXc out = MatrixXc::Zero(r.P.B.rows(), nc);
    const auto& s = r.sparse->B;
    for (std::size_t k = 0; k < s.nnz(); ++k)
        if (s.col[k] >= c0 && s.col[k] < c0 + nc) out(s.row[k], s.col[k] - c0) = s.val[k];
    return out;
}

// Rows of a partitioned-order column block put back in composite order.
inline MatrixXc to_composite_rows(const MatrixXc& part, const PartitionScheme& s) {
    MatrixXc out(part.rows(), part.cols());
    for (Eigen::Index p = 0; p < part.rows(); ++p) out.row(s.order()[static_cast<std::size_t>(p)]) = part.row(p);
    return out;
}

inline void finish(TauResult& res, const OpCounter& ops, const Stopwatch& sw) {
    res.nop = ops.mults;
    res.wall_ms = sw.ms();
}

}  // namespace detail

/// tau^{i0} for every site i.
inline TauResult tau_col(const ScatteringSystem& sys, int site0, const SolverMode& mode) {
    const auto& s = sys.scheme;
    if (site0 < 0 || site0 >= s.n_sites()) throw std::out_of_range("tau_col: site0 out of range");
    const Eigen::Index n = s.block_size();
    const Eigen::Index dim = s.dim();
    detail::Stopwatch sw;
    OpCounter ops;
    TauResult res;
    res.task = Task::tau_col;
    res.mode = mode;
    res.site0 = site0;
    const MatrixXc& t0 = sys.t[static_cast<std::size_t>(site0)];

    MatrixXc col;  // composite-order rows, n columns of site0
    if (mode.kind == Mode::standard) {
        CountedLU lu(assemble_M(sys.t, sys.g), &ops);
        res.rcond = lu.rcond();
        col = lu.solve(detail::unit_columns(dim, static_cast<Eigen::Index>(site0) * n, n), &ops);
    } else if (mode.kind == Mode::exact_schur) {
        const auto inv = exact_schur_inverse(partition(assemble_M(sys.t, sys.g), s, true), &ops);
        res.rcond = inv.rcond;
        const MatrixXc full = inv.assemble();
        MatrixXc part(dim, n);
        for (Eigen::Index L = 0; L < n; ++L) part.col(L) = full.col(s.local_to_partitioned(site0, static_cast<int>(L)));
        col = detail::to_composite_rows(part, s);
    } else {
        const auto red = detail::reduce(sys, mode);
        if (red.sparse) {
            res.threshold = red.sparse->threshold;
            res.kept_fraction = red.sparse->kept_fraction;
        }
        const bool zhang = mode.kind == Mode::zhang;
        const Eigen::Index a = s.a(), b = s.b();
        const Eigen::Index ns = s.n_small(site0), nb = s.n_large(site0);
        const Eigen::Index so = s.small_offset(site0), bo = s.large_offset(site0);

        MatrixXc schur = red.P.A;
        if (!zhang && b > 0) schur -= detail::bc_product(red, &ops);
        CountedLU lu(std::move(schur), &ops);
        res.rcond = lu.rcond();

        const MatrixXc As = lu.solve(detail::unit_columns(a, so, ns), &ops);
        const MatrixXc Bb = nb > 0 ? MatrixXc(-lu.solve(detail::b_columns(red, bo, nb), &ops)) : MatrixXc(a, 0);
        MatrixXc Cs = MatrixXc::Zero(b, ns);
        MatrixXc Db = detail::unit_columns(b, bo, nb);
        if (!zhang && b > 0) {
            Cs = -counted_product(red.P.C, As, &ops);
            if (nb > 0) Db -= counted_product(red.P.C, Bb, &ops);
        }
        MatrixXc part(dim, n);
        part.topLeftCorner(a, ns) = As;
        part.bottomLeftCorner(b, ns) = Cs;
        part.topRightCorner(a, nb) = Bb;
        part.bottomRightCorner(b, nb) = Db;
        col = detail::to_composite_rows(part, s);
    }
    const MatrixXc tau = counted_product(col, t0, &ops);
    for (int i = 0; i < s.n_sites(); ++i) res.blocks.push_back(tau.middleRows(static_cast<Eigen::Index>(i) * n, n));
    detail::finish(res, ops, sw);
    return res;
}

/// tau^{ii} for every site i.
inline TauResult tau_site_diagonal(const ScatteringSystem& sys, const SolverMode& mode) {
    const auto& s = sys.scheme;
    const Eigen::Index n = s.block_size();
    detail::Stopwatch sw;
    OpCounter ops;
    TauResult res;
    res.task = Task::tau_diag;
    res.mode = mode;
    std::vector<MatrixXc> Mii(static_cast<std::size_t>(s.n_sites()));

    if (mode.kind == Mode::standard) {
        CountedLU lu(assemble_M(sys.t, sys.g), &ops);
        res.rcond = lu.rcond();
        const MatrixXc inv = lu.inverse(&ops);
        for (int i = 0; i < s.n_sites(); ++i) Mii[static_cast<std::size_t>(i)] = inv.block(i * n, i * n, n, n);
    } else if (mode.kind == Mode::exact_schur) {
        const auto inv = exact_schur_inverse(partition(assemble_M(sys.t, sys.g), s, true), &ops);
        res.rcond = inv.rcond;
        const MatrixXc full = s.unpermute(inv.assemble());
        for (int i = 0; i < s.n_sites(); ++i) Mii[static_cast<std::size_t>(i)] = full.block(i * n, i * n, n, n);
    } else {
        const auto red = detail::reduce(sys, mode);
        if (red.sparse) {
            res.threshold = red.sparse->threshold;
            res.kept_fraction = red.sparse->kept_fraction;
        }
        const bool zhang = mode.kind == Mode::zhang;
        const Eigen::Index b = s.b();
        MatrixXc schur = red.P.A;
        if (!zhang && b > 0) schur -= detail::bc_product(red, &ops);
        CountedLU lu(std::move(schur), &ops);
        res.rcond = lu.rcond();
        const MatrixXc Ai = lu.inverse(&ops);
        for (int i = 0; i < s.n_sites(); ++i) {
            const Eigen::Index ns = s.n_small(i), nb = s.n_large(i);
            const Eigen::Index so = s.small_offset(i), bo = s.large_offset(i);
            MatrixXc m = MatrixXc::Zero(n, n);
            m.topLeftCorner(ns, ns) = Ai.block(so, so, ns, ns);
            if (nb > 0) {
                // column block i of Bi = -Ai B
                MatrixXc Bi = red.sparse ? MatrixXc(-red.sparse->B.left_times_columns(Ai, bo, nb, &ops))
                                         : MatrixXc(-counted_product(Ai, red.P.B.middleCols(bo, nb), &ops));
                m.topRightCorner(ns, nb) = Bi.middleRows(so, ns);
                m.bottomRightCorner(nb, nb) = MatrixXc::Identity(nb, nb);
                if (!zhang) {
                    const auto Crow = red.P.C.middleRows(bo, nb);
                    m.bottomLeftCorner(nb, ns) = -counted_product(Crow, Ai.middleCols(so, ns), &ops);
                    m.bottomRightCorner(nb, nb) -= counted_product(Crow, Bi, &ops);
                }
            }
            Mii[static_cast<std::size_t>(i)] = std::move(m);
        }
    }
    for (int i = 0; i < s.n_sites(); ++i)
        res.blocks.push_back(counted_product(Mii[static_cast<std::size_t>(i)], sys.t[static_cast<std::size_t>(i)], &ops));
    detail::finish(res, ops, sw);
    return res;
}

inline TauResult solve_tau(const ScatteringSystem& sys, Task task, const SolverMode& mode, int site0 = 0) {
    return task == Task::tau_col ? tau_col(sys, site0, mode) : tau_site_diagonal(sys, mode);
}

}  // namespace mskit
