#pragma once

#include <cmath>
#include <stdexcept>

#include "cross/linalg.hpp"
#include "cross/tensor.hpp"

namespace cross {

inline double relative_hs_loss(const Tensor3& estimate, const Tensor3& truth) {
    if (!estimate.same_dims(truth))
        throw std::invalid_argument("relative_hs_loss: dims mismatch");
    const double denom_sq = truth.as_vector().squaredNorm();
    if (!(denom_sq > 0.0))
        throw std::invalid_argument("relative_hs_loss: truth tensor is zero");
    double num_sq = 0.0;
    const double* e = estimate.data();
    const double* t = truth.data();
    const Index n = truth.size();
    for (Index i = 0; i < n; ++i) {
        const double d = e[i] - t[i];
        num_sq += d * d;
    }
    return std::sqrt(num_sq / denom_sq);
}

// (1 / sqrt(r_hat)) * ||u_hat^T u_tilde||_F for orthonormal bases with a
// shared row count; 1 when the spans coincide, 0 when orthogonal.
inline double subspace_alignment(const Matrix& u_hat, const Matrix& u_tilde) {
    if (u_hat.rows() != u_tilde.rows())
        throw std::invalid_argument("subspace_alignment: row counts differ");
    if (!has_orthonormal_columns(u_hat) || !has_orthonormal_columns(u_tilde))
        throw std::invalid_argument("subspace_alignment: inputs must have orthonormal columns");
    return (u_hat.transpose() * u_tilde).norm() / std::sqrt(static_cast<double>(u_hat.cols()));
}

}  // namespace cross
