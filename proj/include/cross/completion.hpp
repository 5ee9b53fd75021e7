#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cross/linalg.hpp"
#include "cross/scheme.hpp"
#include "cross/tensor.hpp"

namespace cross {

struct NoisyConfig {
    std::array<double, 3> lambda{0.0, 0.0, 0.0};
    double pinv_rel_tol = 1e-10;         // cutoff for the pseudo-inverse based diagnostics
    double singularity_rel_tol = 1e-12;  // reciprocal-condition floor in the trimming test
};

struct ModeDiagnostics {
    double sigma_min_joint_leading = 0.0;  // sigma_min of the accepted leading joint block
    double arm_joint_ratio = 0.0;          // accepted ||A[:,1:r] * J[1:r,1:r]^-1||
    int trimming_steps = 0;                // candidate block sizes examined
};

struct CompletionReport {
    Tensor3 estimate;
    Ranks3 r_hat{0, 0, 0};
    std::array<double, 3> lambda_used{0.0, 0.0, 0.0};
    std::array<ModeDiagnostics, 3> diagnostics;
    bool degenerate = false;  // some r_hat_t == 0; the estimate is the zero tensor
};

inline std::array<double, 3> default_lambda(const Dims3& p, const std::array<Index, 3>& m) {
    std::array<double, 3> lambda;
    for (int t = 0; t < 3; ++t) {
        if (m[static_cast<std::size_t>(t)] < 1 ||
            m[static_cast<std::size_t>(t)] > p[static_cast<std::size_t>(t)])
            throw std::invalid_argument("default_lambda: need 1 <= m_t <= p_t");
        lambda[static_cast<std::size_t>(t)] =
            3.0 * std::sqrt(static_cast<double>(p[static_cast<std::size_t>(t)]) /
                            static_cast<double>(m[static_cast<std::size_t>(t)]));
    }
    return lambda;
}

// Noiseless completion: estimate = body x_1 R_1 x_2 R_2 x_3 R_3 with
// R_t = arm_t * pinv(joint_t). Exact whenever the tensor has Tucker rank
// (r1,r2,r3) with r_t <= min(m_t, g_t) and each joint matricization keeps
// rank r_t. rank_rel_tol <= 0 selects the dimension-scaled pinv default.
inline Tensor3 complete_noiseless(const CrossObservations& obs, double rank_rel_tol = 0.0) {
    validate(obs);
    std::array<Matrix, 3> r;
    for (int t = 0; t < 3; ++t)
        r[static_cast<std::size_t>(t)] =
            obs.arm[static_cast<std::size_t>(t)] *
            pinv(obs.joint[static_cast<std::size_t>(t)], rank_rel_tol);
    return multi_mode_product(obs.body, r[0], r[1], r[2]);
}

namespace detail {

struct TrimmedMode {
    Index r_hat = 0;
    Matrix r_bar;  // p_t x m_t assembly factor; empty when r_hat == 0
    ModeDiagnostics diag;
};

// Rotation + adaptive trimming for one mode.
//
// Rotation: V = right singular vectors of the arm, U = left singular vectors
// of the body matricization; A = arm * V and J = U^T * joint * V concentrate
// the signal in the leading columns/rows. Only the first min(m_t, g_t)
// columns ever enter the trimming test or the assembly, so the rotation is
// computed on that leading block.
//
// Trimming walks s downward from min(m_t, g_t) and accepts the first s whose
// leading s x s joint block is non-singular (reciprocal condition above the
// floor) with ||A[:,1:s] * J[1:s,1:s]^-1|| <= lambda, i.e. the largest
// qualifying s. If no s qualifies, r_hat = 0.
inline TrimmedMode trim_mode(const Matrix& arm, const Matrix& joint, const Matrix& body_mat,
                             double lambda, double singularity_rel_tol) {
    TrimmedMode out;
    const Index k = std::min(joint.rows(), joint.cols());

    Matrix arm_u, arm_v, body_u, body_v;
    Vector arm_s, body_s;
    svd_compute<Eigen::ComputeThinU | Eigen::ComputeThinV>(arm, arm_u, arm_s, arm_v, true, true);
    normalize_svd_signs(arm_u, &arm_v, arm_s.size());
    svd_compute<Eigen::ComputeThinU | Eigen::ComputeThinV>(body_mat, body_u, body_s, body_v, true,
                                                           true);
    normalize_svd_signs(body_u, &body_v, body_s.size());

    const Matrix vk = arm_v.leftCols(std::min(k, arm_v.cols()));
    const Matrix uk = body_u.leftCols(std::min(k, body_u.cols()));
    const Matrix a = arm * vk;                       // p_t x k
    const Matrix j = uk.transpose() * joint * vk;    // k x k

    for (Index s = std::min({k, a.cols(), j.rows()}); s >= 1; --s) {
        ++out.diag.trimming_steps;
        Eigen::JacobiSVD<Matrix> js(j.topLeftCorner(s, s),
                                    Eigen::ComputeFullU | Eigen::ComputeFullV);
        const double smax = js.singularValues()(0);
        const double smin = js.singularValues()(s - 1);
        if (!(smax > 0.0) || smin / smax <= singularity_rel_tol) continue;
        // ||A[:,1:s] J^-1|| via the factorization J = P S Q^T:
        // A J^-1 = (A Q S^-1) P^T and the orthogonal P^T drops out of the norm.
        Matrix aq = a.leftCols(s) * js.matrixV();
        for (Index c = 0; c < s; ++c) aq.col(c) /= js.singularValues()(c);
        const double ratio = spectral_norm(aq);
        if (ratio <= lambda) {
            out.r_hat = s;
            out.diag.sigma_min_joint_leading = smin;
            out.diag.arm_joint_ratio = ratio;
            out.r_bar = aq * js.matrixU().transpose() * uk.leftCols(s).transpose();
            break;
        }
    }
    return out;
}

}  // namespace detail

// Noisy completion: per-mode SVD rotation, adaptive rank trimming against
// lambda_t, then assembly estimate = body x_1 R1 x_2 R2 x_3 R3 with
// R_t = A_t[:,1:r] * J_t[1:r,1:r]^-1 * U_t[:,1:r]^T. If any mode trims to
// rank zero the estimate is the zero tensor and the report is flagged.
inline CompletionReport complete_noisy(const CrossObservations& obs, const NoisyConfig& cfg) {
    validate(obs);
    for (int t = 0; t < 3; ++t)
        if (!(cfg.lambda[static_cast<std::size_t>(t)] > 0.0))
            throw std::invalid_argument("complete_noisy: lambda_" + std::to_string(t + 1) +
                                        " must be positive");
    if (!(cfg.singularity_rel_tol > 0.0 && cfg.singularity_rel_tol < 1.0) ||
        !(cfg.pinv_rel_tol > 0.0 && cfg.pinv_rel_tol < 1.0))
        throw std::invalid_argument("complete_noisy: tolerances must lie in (0, 1)");

    CompletionReport report;
    report.lambda_used = cfg.lambda;

    std::array<detail::TrimmedMode, 3> trimmed;
    for (int t = 0; t < 3; ++t)
        trimmed[static_cast<std::size_t>(t)] = detail::trim_mode(
            obs.arm[static_cast<std::size_t>(t)], obs.joint[static_cast<std::size_t>(t)],
            body_matricization(obs, t + 1), cfg.lambda[static_cast<std::size_t>(t)],
            cfg.singularity_rel_tol);

    for (int t = 0; t < 3; ++t) {
        report.r_hat[static_cast<std::size_t>(t)] = trimmed[static_cast<std::size_t>(t)].r_hat;
        report.diagnostics[static_cast<std::size_t>(t)] = trimmed[static_cast<std::size_t>(t)].diag;
    }
    report.degenerate = report.r_hat[0] == 0 || report.r_hat[1] == 0 || report.r_hat[2] == 0;
    if (report.degenerate) {
        report.estimate = Tensor3(obs.indices.dims);
        return report;
    }
    report.estimate = multi_mode_product(obs.body, trimmed[0].r_bar, trimmed[1].r_bar,
                                         trimmed[2].r_bar);
    return report;
}

// ||arm_t * pinv(joint_t)||: the quantity lambda_t must dominate (twice over)
// for the trimming threshold to be safe.
inline double arm_joint_ratio(const CrossObservations& obs, int mode, double rank_rel_tol = 0.0) {
    detail::check_mode(mode);
    return spectral_norm(obs.arm[static_cast<std::size_t>(mode - 1)] *
                         pinv(obs.joint[static_cast<std::size_t>(mode - 1)], rank_rel_tol));
}

// ||pinv(joint_t) * body matricization||: how hard the body is to express in
// terms of the joint block.
inline double joint_body_ratio(const CrossObservations& obs, int mode, double rank_rel_tol = 0.0) {
    detail::check_mode(mode);
    return spectral_norm(pinv(obs.joint[static_cast<std::size_t>(mode - 1)], rank_rel_tol) *
                         body_matricization(obs, mode));
}

}  // namespace cross
