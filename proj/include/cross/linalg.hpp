#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cross/tensor.hpp"

namespace cross {

// Thin SVD m = u * diag(singular_values) * vt with singular values sorted
// non-increasing. Signs are normalized so the largest-magnitude entry of each
// left singular vector is non-negative (ties broken by lowest row index),
// which keeps intermediates bit-stable across runs.
struct SvdResult {
    Matrix u;
    Vector singular_values;
    Matrix vt;
};

inline double default_pinv_tol(Index rows, Index cols) {
    return 1e-12 * static_cast<double>(std::max(rows, cols));
}

namespace detail {

// Flip signs column-by-column of u; the first `paired` columns drag the
// matching column of v along so the product is unchanged.
inline void normalize_svd_signs(Matrix& u, Matrix* v, Index paired) {
    for (Index j = 0; j < u.cols(); ++j) {
        Index arg = 0;
        double best = std::abs(u(0, j));
        for (Index i = 1; i < u.rows(); ++i) {
            double a = std::abs(u(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (u(arg, j) < 0.0) {
            u.col(j) = -u.col(j);
            if (v && j < v->cols()) v->col(j) = -v->col(j);
        }
    }
    if (v) {
        for (Index j = paired; j < v->cols(); ++j) {
            Index arg = 0;
            double best = std::abs((*v)(0, j));
            for (Index i = 1; i < v->rows(); ++i) {
                double a = std::abs((*v)(i, j));
                if (a > best) {
                    best = a;
                    arg = i;
                }
            }
            if ((*v)(arg, j) < 0.0) v->col(j) = -v->col(j);
        }
    }
}

inline void check_finite(const Matrix& m, const char* who) {
    if (!m.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

// Jacobi is bulletproof for small problems; BDC is much faster once the
// matrices stop being tiny.
template <unsigned int Options>
inline void svd_compute(const Matrix& m, Matrix& u, Vector& s, Matrix& v, bool want_u,
                        bool want_v) {
    if (std::min(m.rows(), m.cols()) <= 16) {
        Eigen::JacobiSVD<Matrix> svd(m, Options);
        if (svd.info() != Eigen::Success)
            throw std::runtime_error("SVD failed to converge on a " + std::to_string(m.rows()) +
                                     "x" + std::to_string(m.cols()) + " matrix");
        s = svd.singularValues();
        if (want_u) u = svd.matrixU();
        if (want_v) v = svd.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> svd(m, Options);
        if (svd.info() != Eigen::Success)
            throw std::runtime_error("SVD failed to converge on a " + std::to_string(m.rows()) +
                                     "x" + std::to_string(m.cols()) + " matrix");
        s = svd.singularValues();
        if (want_u) u = svd.matrixU();
        if (want_v) v = svd.matrixV();
    }
}

}  // namespace detail

inline SvdResult svd(const Matrix& m) {
    detail::check_finite(m, "svd");
    Matrix u, v;
    Vector s;
    detail::svd_compute<Eigen::ComputeThinU | Eigen::ComputeThinV>(m, u, s, v, true, true);
    detail::normalize_svd_signs(u, &v, s.size());
    return SvdResult{std::move(u), std::move(s), v.transpose()};
}

inline Vector singular_values(const Matrix& m) {
    detail::check_finite(m, "singular_values");
    Matrix u, v;
    Vector s;
    detail::svd_compute<0>(m, u, s, v, false, false);
    return s;
}

inline double spectral_norm(const Matrix& m) {
    Vector s = singular_values(m);
    return s.size() > 0 ? s(0) : 0.0;
}

// Moore-Penrose pseudo-inverse; singular values <= rel_tol * s_max are
// treated as zero. rel_tol <= 0 selects the 1e-12 * max(rows, cols) default.
inline Matrix pinv(const Matrix& m, double rel_tol = 0.0) {
    if (rel_tol <= 0.0) rel_tol = default_pinv_tol(m.rows(), m.cols());
    if (rel_tol >= 1.0) throw std::invalid_argument("pinv: rel_tol must lie in (0,1)");
    SvdResult f = svd(m);
    const double cutoff = rel_tol * (f.singular_values.size() > 0 ? f.singular_values(0) : 0.0);
    Vector inv = Vector::Zero(f.singular_values.size());
    for (Index i = 0; i < f.singular_values.size(); ++i)
        if (f.singular_values(i) > cutoff) inv(i) = 1.0 / f.singular_values(i);
    return f.vt.transpose() * inv.asDiagonal() * f.u.transpose();
}

inline int numerical_rank(const Matrix& m, double rel_tol = 0.0) {
    if (rel_tol <= 0.0) rel_tol = default_pinv_tol(m.rows(), m.cols());
    Vector s = singular_values(m);
    if (s.size() == 0) return 0;
    const double cutoff = rel_tol * s(0);
    int r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff) ++r;
    return r;
}

inline bool has_orthonormal_columns(const Matrix& u, double tol = 1e-8) {
    if (u.cols() > u.rows()) return false;
    Matrix g = u.transpose() * u;
    g.diagonal().array() -= 1.0;
    return g.cwiseAbs().maxCoeff() <= tol;
}

// Incoherence of a p x r orthonormal basis: (p/r) * max_j || P_u e_j ||^2,
// i.e. how concentrated the projections of canonical basis vectors can get.
// 1 for a perfectly spread subspace, p/r for one aligned with coordinates.
inline double coherence(const Matrix& u) {
    if (u.rows() < 1 || u.cols() < 1) throw std::invalid_argument("coherence: empty matrix");
    if (!has_orthonormal_columns(u))
        throw std::invalid_argument("coherence: input must have orthonormal columns");
    double worst = 0.0;
    for (Index j = 0; j < u.rows(); ++j) worst = std::max(worst, u.row(j).squaredNorm());
    return worst * static_cast<double>(u.rows()) / static_cast<double>(u.cols());
}

}  // namespace cross
