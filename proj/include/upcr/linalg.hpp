#ifndef UPCR_LINALG_HPP
#define UPCR_LINALG_HPP

/** @file
 * Small dense symmetric kernels: sample covariance, cyclic Jacobi
 * eigendecomposition and minimum-norm least squares.
 *
 * Everything here is templated on the scalar type and works on Eigen dense
 * objects. Matrices are expected to be small (tens of rows), so the
 * eigensolver favours determinism and accuracy over asymptotic speed.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Jacobi>

#include "upcr/errors.hpp"

namespace upcr
{

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/**
 * Symmetric matrix whose storage is always exactly symmetric.
 *
 * Only the upper triangle of any input is read; the lower triangle is a
 * mirror of it, so `S(i, j) == S(j, i)` holds bit for bit.
 */
template <typename Scalar>
class SymMatrix
{
public:
    using Dense = Matrix<Scalar>;

    explicit SymMatrix(Index dim) : m_(Dense::Zero(dim, dim))
    {
        if (dim < 1) {
            throw InputError("SymMatrix: dimension must be at least 1");
        }
    }

    /// Builds from the upper triangle of @p m (diagonal included).
    template <typename Derived>
    static SymMatrix from_upper(const Eigen::MatrixBase<Derived> &m)
    {
        if (m.rows() != m.cols()) {
            throw InputError("SymMatrix: matrix is not square");
        }
        SymMatrix s(m.rows());
        s.m_.template triangularView<Eigen::Upper>() = m.template triangularView<Eigen::Upper>();
        s.mirror();
        return s;
    }

    /// Builds from a dense matrix that must already be symmetric to within
    /// @p tol relative to its largest entry.
    template <typename Derived>
    static SymMatrix from_dense(const Eigen::MatrixBase<Derived> &m, Scalar tol = Scalar(1e-12))
    {
        if (m.rows() != m.cols()) {
            throw InputError("SymMatrix: matrix is not square");
        }
        const Scalar scale = std::max(Scalar(1), m.cwiseAbs().maxCoeff());
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
            throw InputError("SymMatrix: matrix is not symmetric");
        }
        return from_upper(m);
    }

    Index dim() const { return m_.rows(); }

    Scalar operator()(Index i, Index j) const { return m_(i, j); }

    void set(Index i, Index j, Scalar value)
    {
        m_(i, j) = value;
        m_(j, i) = value;
    }

    const Dense &dense() const { return m_; }

    Scalar trace() const { return m_.trace(); }

    /// Principal submatrix on the rows/columns listed in @p idx (in that order).
    SymMatrix principal(std::span<const Index> idx) const
    {
        SymMatrix out(static_cast<Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) {
            for (std::size_t b = a; b < idx.size(); ++b) {
                out.set(static_cast<Index>(a), static_cast<Index>(b), m_(idx[a], idx[b]));
            }
        }
        return out;
    }

private:
    void mirror() { m_.template triangularView<Eigen::StrictlyLower>() = m_.transpose(); }

    Dense m_;
};

/**
 * Leading eigenpairs of a symmetric matrix.
 *
 * `values` is non-increasing; column k of `vectors` is the unit eigenvector
 * for `values[k]`. Each vector has a non-negative entry sum, and when that sum
 * vanishes its first non-zero entry is positive.
 */
template <typename Scalar>
struct EigenPairs
{
    Vector<Scalar> values;
    Matrix<Scalar> vectors;

    Index size() const { return values.size(); }
    Scalar value(Index k) const { return values(k); }
    auto vector(Index k) const { return vectors.col(k); }
};

/// Ĉ = Z Zᵀ / n for a row-centred m×n matrix Z.
template <typename Derived>
SymMatrix<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived> &z)
{
    using Scalar = typename Derived::Scalar;
    const Index m = z.rows();
    const Index n = z.cols();
    if (m < 1) {
        throw InputError("sample_covariance: need at least one row");
    }
    if (n < 2) {
        throw InputError("sample_covariance: need at least two columns (samples)");
    }
    for (Index i = 0; i < m; ++i) {
        const Scalar scale = std::max(Scalar(1), z.row(i).cwiseAbs().maxCoeff());
        const Scalar mean = z.row(i).mean();
        if (!(std::abs(mean) <= Scalar(1e-8) * scale)) {
            std::ostringstream msg;
            msg << "sample_covariance: row " << i << " is not centred (mean " << mean << ")";
            throw InputError(msg.str());
        }
    }
    Matrix<Scalar> c = (z * z.transpose()) / static_cast<Scalar>(n);
    return SymMatrix<Scalar>::from_upper(c);
}

namespace detail
{

template <typename Scalar, typename Col>
void apply_sign_convention(Col v)
{
    const Scalar sum = v.sum();
    const Scalar tiny = Scalar(1e-12);
    bool flip = false;
    if (sum < -tiny) {
        flip = true;
    } else if (sum <= tiny) {
        for (Index i = 0; i < v.size(); ++i) {
            if (std::abs(v(i)) > tiny) {
                flip = v(i) < 0;
                break;
            }
        }
    }
    if (flip) {
        v = -v;
    }
}

} // namespace detail

/**
 * Full eigendecomposition of @p s by cyclic Jacobi rotations.
 *
 * Sweeps over every (p, q) pair in row order until the off-diagonal
 * Frobenius norm drops below machine epsilon times the matrix norm.
 * Results are sorted by decreasing eigenvalue and sign-normalised.
 */
template <typename Scalar>
EigenPairs<Scalar> jacobi_eigen(const SymMatrix<Scalar> &s, int max_sweeps = 100)
{
    const Index m = s.dim();
    Matrix<Scalar> a = s.dense();
    Matrix<Scalar> v = Matrix<Scalar>::Identity(m, m);

    const Scalar norm = a.norm();
    const Scalar target = std::numeric_limits<Scalar>::epsilon() * norm;

    auto off_norm = [&]() {
        Scalar off = 0;
        for (Index p = 0; p < m; ++p) {
            for (Index q = p + 1; q < m; ++q) {
                off += a(p, q) * a(p, q);
            }
        }
        return std::sqrt(Scalar(2) * off);
    };

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= target) {
            break;
        }
        for (Index p = 0; p < m; ++p) {
            for (Index q = p + 1; q < m; ++q) {
                if (a(p, q) == Scalar(0)) {
                    continue;
                }
                Eigen::JacobiRotation<Scalar> rot;
                rot.makeJacobi(a, p, q);
                a.applyOnTheLeft(p, q, rot.adjoint());
                a.applyOnTheRight(p, q, rot);
                a(p, q) = Scalar(0);
                a(q, p) = Scalar(0);
                v.applyOnTheRight(p, q, rot);
            }
        }
    }
    if (sweep == max_sweeps && off_norm() > target * Scalar(1e3)) {
        throw NumericalError("jacobi_eigen: no convergence");
    }

    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });

    EigenPairs<Scalar> out;
    out.values.resize(m);
    out.vectors.resize(m, m);
    for (Index k = 0; k < m; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = a(src, src);
        out.vectors.col(k) = v.col(src).normalized();
        detail::apply_sign_convention<Scalar>(out.vectors.col(k));
    }
    return out;
}

/// The @p k leading eigenpairs of @p s.
template <typename Scalar>
EigenPairs<Scalar> top_eigenpairs(const SymMatrix<Scalar> &s, Index k)
{
    if (k < 1 || k > s.dim()) {
        throw InputError("top_eigenpairs: k must lie in [1, dim]");
    }
    EigenPairs<Scalar> all = jacobi_eigen(s);
    EigenPairs<Scalar> out;
    out.values = all.values.head(k);
    out.vectors = all.vectors.leftCols(k);
    return out;
}

template <typename Scalar>
struct LeastSquaresSolution
{
    Vector<Scalar> x;
    Index rank = 0;
    bool rank_deficient = false;
};

/**
 * Minimiser of ‖Ax − b‖₂. When A has dependent columns the minimum-norm
 * minimiser is returned and `rank_deficient` is set.
 */
template <typename DerivedA, typename DerivedB>
LeastSquaresSolution<typename DerivedA::Scalar> least_squares(const Eigen::MatrixBase<DerivedA> &a,
                                                              const Eigen::MatrixBase<DerivedB> &b)
{
    using Scalar = typename DerivedA::Scalar;
    if (a.rows() != b.rows()) {
        throw InputError("least_squares: row count of A and length of b differ");
    }
    if (a.rows() < a.cols()) {
        throw InputError("least_squares: need at least as many rows as columns");
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(a);
    LeastSquaresSolution<Scalar> out;
    out.x = cod.solve(b);
    out.rank = cod.rank();
    out.rank_deficient = out.rank < a.cols();
    return out;
}

} // namespace upcr

#endif // UPCR_LINALG_HPP
