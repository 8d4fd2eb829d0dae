#pragma once

// Dense LU with explicit multiplication counting, plus a small COO sparse type.
//
// Counting convention: one complex multiply (or divide) is one operation; additions
// are free. Blocked kernels call Eigen for speed, the count is the exact number of
// scalar multiplications the same unblocked algorithm would perform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mskit {

using cplx_t = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;

struct OpCounter {
    std::uint64_t mults = 0;
    void add(std::uint64_t n) noexcept { mults += n; }
    void add(double n) noexcept { mults += static_cast<std::uint64_t>(n); }
};

inline void count(OpCounter* ops, std::uint64_t n) {
    if (ops) ops->add(n);
}

class SingularMatrix : public std::runtime_error {
public:
    explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

/// C = A * B with rows*inner*cols multiplications charged.
template <class DA, class DB>
MatrixXc counted_product(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, OpCounter* ops) {
    count(ops, static_cast<std::uint64_t>(a.rows()) * static_cast<std::uint64_t>(a.cols()) * static_cast<std::uint64_t>(b.cols()));
    MatrixXc c(a.rows(), b.cols());
    c.noalias() = a * b;
    return c;
}

/// Right-looking blocked LU with partial pivoting, P A = L U.
class CountedLU {
public:
    explicit CountedLU(MatrixXc a, OpCounter* ops = nullptr, int block = 64) : lu_(std::move(a)) {
        if (lu_.rows() != lu_.cols()) throw std::invalid_argument("CountedLU: matrix must be square");
        anorm1_ = lu_.cwiseAbs().colwise().sum().maxCoeff();
        factor(ops, std::max(1, block));
    }

    Eigen::Index size() const noexcept { return lu_.rows(); }
    const MatrixXc& packed() const noexcept { return lu_; }
    /// row k of P A is row perm()[k] of A
    const std::vector<Eigen::Index>& perm() const noexcept { return perm_; }

    /// A^{-1} B, n^2 multiplications per column.
    MatrixXc solve(const MatrixXc& b, OpCounter* ops = nullptr) const {
        const Eigen::Index n = size();
        if (b.rows() != n) throw std::invalid_argument("CountedLU::solve: dimension mismatch");
        MatrixXc x(n, b.cols());
        for (Eigen::Index k = 0; k < n; ++k) x.row(k) = b.row(perm_[static_cast<std::size_t>(k)]);
        lu_.triangularView<Eigen::UnitLower>().solveInPlace(x);
        lu_.triangularView<Eigen::Upper>().solveInPlace(x);
        count(ops, static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(b.cols()));
        return x;
    }

    /// A^{-1} = U^{-1} L^{-1} P. The unit-vector structure of L^{-1} is used, so the
    /// inverse costs about 2n^3/3 on top of the n^3/3 factorisation.
    MatrixXc inverse(OpCounter* ops = nullptr) const {
        const Eigen::Index n = size();
        MatrixXc x = MatrixXc::Zero(n, n);
        std::uint64_t cnt = 0;
        for (Eigen::Index c = 0; c < n; ++c) {
            const Eigen::Index m = n - c;
            x(c, c) = 1.0;
            if (m > 1) {
                auto seg = x.col(c).tail(m);
                lu_.bottomRightCorner(m, m).triangularView<Eigen::UnitLower>().solveInPlace(seg);
            }
            cnt += static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m - 1) / 2;
        }
        lu_.triangularView<Eigen::Upper>().solveInPlace(x);
        cnt += static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n + 1) / 2;
        count(ops, cnt);
        MatrixXc out(n, n);
        for (Eigen::Index k = 0; k < n; ++k) out.col(perm_[static_cast<std::size_t>(k)]) = x.col(k);
        return out;
    }

    /// Reciprocal 1-norm condition estimate (Hager / Higham power iteration).
    /// Not charged to the operation count.
    double rcond() const {
        const Eigen::Index n = size();
        if (n == 0 || anorm1_ == 0.0) return 0.0;
        Eigen::VectorXcd x = Eigen::VectorXcd::Constant(n, 1.0 / static_cast<double>(n));
        double est = 0;
        for (int it = 0; it < 5; ++it) {
            Eigen::VectorXcd y = solve_vec(x, false);
            const double ny = y.cwiseAbs().sum();
            if (it > 0 && ny <= est) {
                est = std::max(est, ny);
                break;
            }
            est = ny;
            Eigen::VectorXcd s(n);
            for (Eigen::Index k = 0; k < n; ++k) s(k) = std::abs(y(k)) > 0 ? y(k) / std::abs(y(k)) : cplx_t(1.0);
            Eigen::VectorXcd z = solve_vec(s, true);
            Eigen::Index j = 0;
            z.cwiseAbs().maxCoeff(&j);
            x.setZero();
            x(j) = 1.0;
        }
        return est > 0 ? 1.0 / (anorm1_ * est) : 0.0;
    }

private:
    Eigen::VectorXcd solve_vec(const Eigen::VectorXcd& b, bool adjoint) const {
        const Eigen::Index n = size();
        if (!adjoint) {
            Eigen::VectorXcd x(n);
            for (Eigen::Index k = 0; k < n; ++k) x(k) = b(perm_[static_cast<std::size_t>(k)]);
            lu_.triangularView<Eigen::UnitLower>().solveInPlace(x);
            lu_.triangularView<Eigen::Upper>().solveInPlace(x);
            return x;
        }
        // A^H x = b  ->  U^H L^H (P x) = b
        Eigen::VectorXcd y = b;
        lu_.adjoint().triangularView<Eigen::Lower>().solveInPlace(y);
        lu_.adjoint().triangularView<Eigen::UnitUpper>().solveInPlace(y);
        Eigen::VectorXcd x(n);
        for (Eigen::Index k = 0; k < n; ++k) x(perm_[static_cast<std::size_t>(k)]) = y(k);
        return x;
    }

    void factor(OpCounter* ops, int nb) {
        const Eigen::Index n = lu_.rows();
        perm_.resize(static_cast<std::size_t>(n));
        std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
        std::uint64_t cnt = 0;
        for (Eigen::Index k0 = 0; k0 < n; k0 += nb) {
            const Eigen::Index kb = std::min<Eigen::Index>(nb, n - k0);
            const Eigen::Index kend = k0 + kb;
            for (Eigen::Index j = k0; j < kend; ++j) {
                Eigen::Index p = j;
                double best = -1;
                for (Eigen::Index r = j; r < n; ++r) {
                    const double v = std::abs(lu_(r, j));
                    if (v > best) {
                        best = v;
                        p = r;
                    }
                }
                if (!(best > 0.0) || !std::isfinite(best)) throw SingularMatrix("LU: zero pivot in column " + std::to_string(j));
                if (p != j) {
                    lu_.row(p).swap(lu_.row(j));
                    std::swap(perm_[static_cast<std::size_t>(p)], perm_[static_cast<std::size_t>(j)]);
                }
                const Eigen::Index below = n - j - 1;
                if (below > 0) {
                    lu_.col(j).tail(below) /= lu_(j, j);
                    const Eigen::Index right = kend - j - 1;
                    if (right > 0)
                        lu_.block(j + 1, j + 1, below, right).noalias() -=
                            lu_.col(j).tail(below) * lu_.row(j).segment(j + 1, right);
                    cnt += static_cast<std::uint64_t>(below) * static_cast<std::uint64_t>(1 + right);
                }
            }
            const Eigen::Index rest = n - kend;
            if (rest > 0) {
                auto a12 = lu_.block(k0, kend, kb, rest);
                lu_.block(k0, k0, kb, kb).triangularView<Eigen::UnitLower>().solveInPlace(a12);
                lu_.bottomRightCorner(rest, rest).noalias() -= lu_.block(kend, k0, rest, kb) * lu_.block(k0, kend, kb, rest);
                cnt += static_cast<std::uint64_t>(kb) * static_cast<std::uint64_t>(kb - 1) / 2 * static_cast<std::uint64_t>(rest);
                cnt += static_cast<std::uint64_t>(rest) * static_cast<std::uint64_t>(kb) * static_cast<std::uint64_t>(rest);
            }
        }
        count(ops, cnt);
    }

    MatrixXc lu_;
    std::vector<Eigen::Index> perm_;
    double anorm1_ = 0;
};

/// Multiplications of an unblocked LU of order n, sum_j (n-j-1)(n-j).
inline std::uint64_t lu_mults(std::uint64_t n) { return n == 0 ? 0 : (n - 1) * n * (n + 1) / 3; }

// ---------------------------------------------------------------------------

/// Coordinate storage sorted row-major; duplicates are not allowed.
struct SparseMatrix {
    Eigen::Index rows = 0, cols = 0;
    std::vector<Eigen::Index> row, col;
    std::vector<cplx_t> val;

    std::size_t nnz() const noexcept { return val.size(); }
    double density() const noexcept {
        return rows * cols == 0 ? 0.0 : static_cast<double>(nnz()) / static_cast<double>(rows * cols);
    }

    MatrixXc to_dense() const {
        MatrixXc d = MatrixXc::Zero(rows, cols);
        for (std::size_t k = 0; k < nnz(); ++k) d(row[k], col[k]) = val[k];
        return d;
    }

    /// Dense column c, no multiplications.
    Eigen::VectorXcd column(Eigen::Index c) const {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(rows);
        for (std::size_t k = 0; k < nnz(); ++k)
            if (col[k] == c) v(row[k]) = val[k];
        return v;
    }

    /// this * X, nnz * X.cols() multiplications.
    MatrixXc times(const MatrixXc& x, OpCounter* ops = nullptr) const {
        if (x.rows() != cols) throw std::invalid_argument("SparseMatrix::times: dimension mismatch");
        MatrixXc out = MatrixXc::Zero(rows, x.cols());
        for (std::size_t k = 0; k < nnz(); ++k) out.row(row[k]) += val[k] * x.row(col[k]);
        count(ops, static_cast<std::uint64_t>(nnz()) * static_cast<std::uint64_t>(x.cols()));
        return out;
    }

    /// X * this restricted to columns [c0, c0 + nc), X.rows() multiplications per stored entry used.
    MatrixXc left_times_columns(const MatrixXc& x, Eigen::Index c0, Eigen::Index nc, OpCounter* ops = nullptr) const {
        if (x.cols() != rows) throw std::invalid_argument("SparseMatrix::left_times_columns: dimension mismatch");
        MatrixXc out = MatrixXc::Zero(x.rows(), nc);
        std::uint64_t used = 0;
        for (std::size_t k = 0; k < nnz(); ++k)
            if (col[k] >= c0 && col[k] < c0 + nc) {
                out.col(col[k] - c0) += val[k] * x.col(row[k]);
                ++used;
            }
        count(ops, used * static_cast<std::uint64_t>(x.rows()));
        return out;
    }

    static SparseMatrix from_dense(const MatrixXc& d) {
        SparseMatrix s;
        s.rows = d.rows();
        s.cols = d.cols();
        for (Eigen::Index r = 0; r < d.rows(); ++r)
            for (Eigen::Index c = 0; c < d.cols(); ++c)
                if (d(r, c) != cplx_t(0.0)) {
                    s.row.push_back(r);
                    s.col.push_back(c);
                    s.val.push_back(d(r, c));
                }
        return s;
    }
};

}  // namespace mskit
