#pragma once

// M = I - t g, its small-l / large-l partition and the block inverses.
//
// Partitioned order: every site's channels with l <= l_pt(site) first (site-major,
// L order inside a site), then every site's remaining channels in the same order.
//
//   M = [A B; C D]     exact:  Ai = (A - B D^-1 C)^-1, Bi = -Ai B D^-1,
//                              Ci = -D^-1 C Ai,       Di = D^-1 + D^-1 C Ai B D^-1
//                      D ~ I:  Ai = (A - B C)^-1,     Bi = -Ai B,
//                              Ci = -C Ai,            Di = I + C Ai B

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mskit/angmom.hpp"
#include "mskit/cluster.hpp"
#include "mskit/linalg.hpp"
#include "mskit/propagator.hpp"

namespace mskit {

class PartitionScheme {
public:
    PartitionScheme(std::vector<int> lpt, int l_max) : l_max_(l_max), lpt_(std::move(lpt)) {
        if (l_max < 0) throw std::invalid_argument("PartitionScheme: negative l_max");
        if (lpt_.empty()) throw std::invalid_argument("PartitionScheme: no sites");
        const int n = num_lm(l_max);
        Eigen::Index a = 0, b = 0;
        for (int lp : lpt_) {
            if (lp < 0 || lp > l_max)
                throw std::invalid_argument("PartitionScheme: l_pt " + std::to_string(lp) + " outside [0, l_max=" + std::to_string(l_max) + "]");
            small_off_.push_back(a);
            large_off_.push_back(b);
            a += num_lm(lp);
            b += n - num_lm(lp);
        }
        a_ = a;
        b_ = b;
        order_.resize(static_cast<std::size_t>(a + b));
        position_.resize(order_.size());
        for (int i = 0; i < n_sites(); ++i)
            for (int L = 0; L < n; ++L) {
                const Eigen::Index g = static_cast<Eigen::Index>(i) * n + L;
                const Eigen::Index p = local_to_partitioned(i, L);
                order_[static_cast<std::size_t>(p)] = g;
                position_[static_cast<std::size_t>(g)] = p;
            }
    }

    static PartitionScheme from_cluster(const Cluster& c, int l_max) {
        std::vector<int> lpt;
        for (int i = 0; i < c.size(); ++i) lpt.push_back(c.lpt(i));
        return PartitionScheme(std::move(lpt), l_max);
    }

    int n_sites() const noexcept { return static_cast<int>(lpt_.size()); }
    int l_max() const noexcept { return l_max_; }
    int block_size() const noexcept { return num_lm(l_max_); }
    int lpt(int site) const { return lpt_.at(static_cast<std::size_t>(site)); }
    const std::vector<int>& lpt_map() const noexcept { return lpt_; }
    Eigen::Index a() const noexcept { return a_; }
    Eigen::Index b() const noexcept { return b_; }
    Eigen::Index dim() const noexcept { return a_ + b_; }

    /// small channels of `site`: rows [small_offset, small_offset + n_small) of the a-block
    Eigen::Index small_offset(int site) const { return small_off_.at(static_cast<std::size_t>(site)); }
    Eigen::Index n_small(int site) const { return num_lm(lpt(site)); }
    /// large channels of `site`: rows [large_offset, ...) of the b-block
    Eigen::Index large_offset(int site) const { return large_off_.at(static_cast<std::size_t>(site)); }
    Eigen::Index n_large(int site) const { return block_size() - n_small(site); }

    /// partitioned position of channel L (flat index) of `site`
    Eigen::Index local_to_partitioned(int site, int L) const {
        const Eigen::Index ns = n_small(site);
        return L < ns ? small_offset(site) + L : a_ + large_offset(site) + (L - ns);
    }
    /// order()[p] is the unpartitioned composite index at partitioned position p
    const std::vector<Eigen::Index>& order() const noexcept { return order_; }
    const std::vector<Eigen::Index>& position() const noexcept { return position_; }

    MatrixXc permute(const MatrixXc& m) const {
        check(m);
        MatrixXc out(dim(), dim());
        for (Eigen::Index c = 0; c < dim(); ++c)
            for (Eigen::Index r = 0; r < dim(); ++r) out(r, c) = m(order_[static_cast<std::size_t>(r)], order_[static_cast<std::size_t>(c)]);
        return out;
    }
    MatrixXc unpermute(const MatrixXc& p) const {
        check(p);
        MatrixXc out(dim(), dim());
        for (Eigen::Index c = 0; c < dim(); ++c)
            for (Eigen::Index r = 0; r < dim(); ++r) out(order_[static_cast<std::size_t>(r)], order_[static_cast<std::size_t>(c)]) = p(r, c);
        return out;
    }

private:
    void check(const MatrixXc& m) const {
        if (m.rows() != dim() || m.cols() != dim()) throw std::invalid_argument("PartitionScheme: matrix dimension does not match scheme");
    }

    int l_max_;
    std::vector<int> lpt_;
    Eigen::Index a_ = 0, b_ = 0;
    std::vector<Eigen::Index> small_off_, large_off_;
    std::vector<Eigen::Index> order_, position_;
};

/// M = I - t g with t site-block-diagonal.
inline MatrixXc assemble_M(const std::vector<MatrixXc>& t, const StructureConstants& g) {
    const int N = g.n_sites();
    const int n = g.block_size();
    if (static_cast<int>(t.size()) != N) throw std::invalid_argument("assemble_M: need one t block per site");
    for (const auto& ti : t)
        if (ti.rows() != n || ti.cols() != n) throw std::invalid_argument("assemble_M: t block dimension mismatch");
    const Eigen::Index dim = static_cast<Eigen::Index>(N) * n;
    MatrixXc M(dim, dim);
    for (int i = 0; i < N; ++i) M.middleRows(static_cast<Eigen::Index>(i) * n, n).noalias() = -t[static_cast<std::size_t>(i)] * g.matrix().middleRows(static_cast<Eigen::Index>(i) * n, n);
    M.diagonal().array() += 1.0;
    return M;
}

namespace detail {

inline MatrixXc join_blocks(const MatrixXc& A, const MatrixXc& B, const MatrixXc& C, const MatrixXc& D) {
    const Eigen::Index a = A.rows(), b = D.rows();
    MatrixXc p(a + b, a + b);
    p.topLeftCorner(a, a) = A;
    p.topRightCorner(a, b) = B;
    p.bottomLeftCorner(b, a) = C;
    p.bottomRightCorner(b, b) = D;
    return p;
}

}  // namespace detail

struct PartitionedM {
    MatrixXc A, B, C, D;
    bool has_D = false;
};

/// Exact block extraction. D is skipped unless `with_D`.
inline PartitionedM partition(const MatrixXc& M, const PartitionScheme& s, bool with_D = true) {
    if (M.rows() != s.dim() || M.cols() != s.dim()) throw std::invalid_argument("partition: matrix dimension does not match scheme");
    const Eigen::Index a = s.a(), b = s.b();
    const auto& o = s.order();
    auto take = [&](Eigen::Index r0, Eigen::Index nr, Eigen::Index c0, Eigen::Index nc) {
        MatrixXc out(nr, nc);
        for (Eigen::Index c = 0; c < nc; ++c)
            for (Eigen::Index r = 0; r < nr; ++r) out(r, c) = M(o[static_cast<std::size_t>(r0 + r)], o[static_cast<std::size_t>(c0 + c)]);
        return out;
    };
    PartitionedM P;
    P.A = take(0, a, 0, a);
    P.B = take(0, a, a, b);
    P.C = take(a, b, 0, a);
    if (with_D) {
        P.D = take(a, b, a, b);
        P.has_D = true;
    }
    return P;
}

inline MatrixXc reassemble(const PartitionedM& P, const PartitionScheme& s) {
    if (!P.has_D) throw std::invalid_argument("reassemble: D block not materialized");
    return s.unpermute(detail::join_blocks(P.A, P.B, P.C, P.D));
}

struct InverseBlocks {
    MatrixXc A, B, C, D;  // blocks of M^-1 in partitioned order
    double rcond = 0;     // of the small-block factorisation
    double rcond_D = 1;   // exact mode only
    MatrixXc assemble() const {
        return detail::join_blocks(A, B, C, D);
    }
};

/// Exact block inverse through the Schur complement of D.
inline InverseBlocks exact_schur_inverse(const PartitionedM& P, OpCounter* ops = nullptr) {
    if (!P.has_D) throw std::invalid_argument("exact_schur_inverse: D block required");
    InverseBlocks r;
    const Eigen::Index a = P.A.rows(), b = P.D.rows();
    if (b == 0) {
        CountedLU lu(P.A, ops);
        r.rcond = lu.rcond();
        r.A = lu.inverse(ops);
        r.B = MatrixXc(a, 0);
        r.C = MatrixXc(0, a);
        r.D = MatrixXc(0, 0);
        return r;
    }
    std::optional<CountedLU> dlu;
    try {
        dlu.emplace(P.D, ops);
    } catch (const SingularMatrix& e) {
        throw SingularMatrix(std::string("exact_schur_inverse: singular D (") + e.what() + ")");
    }
    r.rcond_D = dlu->rcond();
    const MatrixXc Dinv = dlu->inverse(ops);
    if (a == 0) {
        r.A = MatrixXc(0, 0);
        r.B = MatrixXc(0, b);
        r.C = MatrixXc(b, 0);
        r.D = Dinv;
        return r;
    }
    const MatrixXc X = counted_product(Dinv, P.C, ops);  // D^-1 C
    const MatrixXc Y = counted_product(P.B, Dinv, ops);  // B D^-1
    const MatrixXc schur = P.A - counted_product(P.B, X, ops);
    std::optional<CountedLU> slu;
    try {
        slu.emplace(schur, ops);
    } catch (const SingularMatrix& e) {
        throw SingularMatrix(std::string("exact_schur_inverse: singular Schur complement (") + e.what() + "), rcond(D) = " + std::to_string(r.rcond_D));
    }
    r.rcond = slu->rcond();
    r.A = slu->inverse(ops);
    r.B = -counted_product(r.A, Y, ops);
    r.C = -counted_product(X, r.A, ops);
    r.D = Dinv - counted_product(X, r.B, ops);
    return r;
}

/// Block inverse with D replaced by the unit matrix. If `Bs` is given it stands in
/// for B in all four formulas; C is always dense.
inline InverseBlocks approx_inverse_blocks(const PartitionedM& P, const SparseMatrix* Bs = nullptr, OpCounter* ops = nullptr) {
    const Eigen::Index a = P.A.rows(), b = P.C.rows();
    InverseBlocks r;
    MatrixXc BC = Bs ? Bs->times(P.C, ops) : counted_product(P.B, P.C, ops);
    CountedLU lu(P.A - BC, ops);
    r.rcond = lu.rcond();
    r.A = lu.inverse(ops);
    if (Bs) {
        // Ai * Bs, one column of Ai per stored entry
        r.B = -Bs->left_times_columns(r.A, 0, b, ops);
    } else {
        r.B = -counted_product(r.A, P.B, ops);
    }
    r.C = -counted_product(P.C, r.A, ops);
    r.D = MatrixXc::Identity(b, b) - counted_product(P.C, r.B, ops);
    (void)a;
    return r;
}

// ---------------------------------------------------------------------------

enum class SparsifyScope { global, per_block };

struct SparsifyResult {
    SparseMatrix B;
    double threshold = 0;  // smallest kept magnitude (0 when everything is kept)
    double kept_fraction = 1;
};

namespace detail {

// keep the ceil(p * count) largest entries among `cand`; ties broken by (row, col)
inline void keep_largest(const MatrixXc& B, std::vector<std::pair<Eigen::Index, Eigen::Index>>& cand, double p,
                         std::vector<std::pair<Eigen::Index, Eigen::Index>>& kept) {
    const auto total = cand.size();
    auto keep = static_cast<std::size_t>(std::ceil(p * static_cast<double>(total) - 1e-9));
    keep = std::min(keep, total);
    auto cmp = [&](const auto& x, const auto& y) {
        const double ax = std::abs(B(x.first, x.second)), ay = std::abs(B(y.first, y.second));
        if (ax != ay) return ax > ay;
        return x < y;
    };
    if (keep < total) std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), cmp);
    kept.insert(kept.end(), cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep));
}

}  // namespace detail

/// Keep the ceil(p a b) largest |B_ij|, or, with `threshold_in`, every |B_ij| >= threshold.
/// The per_block scope applies the fraction inside each (site i, site j) block and needs the scheme.
inline SparsifyResult sparsify_B(const MatrixXc& B, double p, std::optional<double> threshold_in = std::nullopt,
                                 SparsifyScope scope = SparsifyScope::global, const PartitionScheme* scheme = nullptr) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("sparsify_B: p must lie in (0, 1]");
    using RC = std::pair<Eigen::Index, Eigen::Index>;
    std::vector<RC> kept;
    const Eigen::Index total = B.rows() * B.cols();
    if (threshold_in) {
        for (Eigen::Index r = 0; r < B.rows(); ++r)
            for (Eigen::Index c = 0; c < B.cols(); ++c)
                if (std::abs(B(r, c)) >= *threshold_in) kept.emplace_back(r, c);
    } else if (p >= 1.0) {
        for (Eigen::Index r = 0; r < B.rows(); ++r)
            for (Eigen::Index c = 0; c < B.cols(); ++c) kept.emplace_back(r, c);
    } else if (scope == SparsifyScope::global) {
        std::vector<RC> cand;
        cand.reserve(static_cast<std::size_t>(total));
        for (Eigen::Index r = 0; r < B.rows(); ++r)
            for (Eigen::Index c = 0; c < B.cols(); ++c) cand.emplace_back(r, c);
        detail::keep_largest(B, cand, p, kept);
    } else {
        if (!scheme) throw std::invalid_argument("sparsify_B: per-block scope needs the partition scheme");
        for (int i = 0; i < scheme->n_sites(); ++i)
            for (int j = 0; j < scheme->n_sites(); ++j) {
                std::vector<RC> cand;
                for (Eigen::Index r = 0; r < scheme->n_small(i); ++r)
                    for (Eigen::Index c = 0; c < scheme->n_large(j); ++c)
                        cand.emplace_back(scheme->small_offset(i) + r, scheme->large_offset(j) + c);
                detail::keep_largest(B, cand, p, kept);
            }
    }
    std::sort(kept.begin(), kept.end());
    SparsifyResult out;
    out.B.rows = B.rows();
    out.B.cols = B.cols();
    double thr = std::numeric_limits<double>::infinity();
    for (const auto& [r, c] : kept) {
        out.B.row.push_back(r);
        out.B.col.push_back(c);
        out.B.val.push_back(B(r, c));
        thr = std::min(thr, std::abs(B(r, c)));
    }
    if (threshold_in) out.threshold = *threshold_in;
    else out.threshold = (p >= 1.0 || kept.empty()) ? 0.0 : thr;
    out.kept_fraction = total == 0 ? 1.0 : static_cast<double>(kept.size()) / static_cast<double>(total);
    return out;
}

/// Blocks for Zhang's method: t is truncated to l, l' <= l_pt(site) before forming
/// M, which makes C = 0 and D = I.
inline PartitionedM zhang_blocks(const std::vector<MatrixXc>& t, const StructureConstants& g, const PartitionScheme& s) {
    std::vector<MatrixXc> tt(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Eigen::Index ns = s.n_small(static_cast<int>(i));
        tt[i] = MatrixXc::Zero(t[i].rows(), t[i].cols());
        tt[i].topLeftCorner(ns, ns) = t[i].topLeftCorner(ns, ns);
    }
    PartitionedM P = partition(assemble_M(tt, g), s, false);
    P.C = MatrixXc::Zero(s.b(), s.a());
    P.D = MatrixXc::Identity(s.b(), s.b());
    P.has_D = true;
    return P;
}

}  // namespace mskit
