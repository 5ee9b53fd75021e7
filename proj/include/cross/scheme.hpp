#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cross/rng.hpp"
#include "cross/tensor.hpp"

namespace cross {

// A Cross measurement pattern on a p1 x p2 x p3 tensor:
//   omega[t]  -- m_t distinct mode-(t+1) indices, sorted ascending
//   xi[t]     -- g_t distinct cross-section pairs, oriented cyclically:
//                xi[0] = (j, k) in omega[1] x omega[2]
//                xi[1] = (k, i) in omega[2] x omega[0]
//                xi[2] = (i, j) in omega[0] x omega[1]
// stored in lexicographic order. The observed set is the body block
// omega[0] x omega[1] x omega[2] plus, for each t, the full mode-(t+1)
// fibers through the pairs in xi[t] (the arms).
struct CrossIndices {
    Dims3 dims{0, 0, 0};
    std::array<std::vector<Index>, 3> omega;
    std::array<std::vector<std::array<Index, 2>>, 3> xi;

    std::array<Index, 3> m() const {
        return {static_cast<Index>(omega[0].size()), static_cast<Index>(omega[1].size()),
                static_cast<Index>(omega[2].size())};
    }
    std::array<Index, 3> g() const {
        return {static_cast<Index>(xi[0].size()), static_cast<Index>(xi[1].size()),
                static_cast<Index>(xi[2].size())};
    }
};

namespace detail {

inline bool contains_sorted(const std::vector<Index>& v, Index x) {
    return std::binary_search(v.begin(), v.end(), x);
}

// Position of x within a sorted duplicate-free vector; caller guarantees membership.
inline Index position_sorted(const std::vector<Index>& v, Index x) {
    return static_cast<Index>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
}

}  // namespace detail

inline void validate(const CrossIndices& idx) {
    for (int t = 0; t < 3; ++t)
        if (idx.dims[static_cast<std::size_t>(t)] <= 0)
            throw std::invalid_argument("cross indices: dims must be positive");
    for (int t = 0; t < 3; ++t) {
        const auto& om = idx.omega[static_cast<std::size_t>(t)];
        const Index p = idx.dims[static_cast<std::size_t>(t)];
        if (om.empty())
            throw std::invalid_argument("cross indices: omega_" + std::to_string(t + 1) +
                                        " is empty (need m_t >= 1)");
        for (std::size_t i = 0; i < om.size(); ++i) {
            if (om[i] < 0 || om[i] >= p)
                throw std::invalid_argument("cross indices: omega_" + std::to_string(t + 1) +
                                            " entry out of range [0," + std::to_string(p) + ")");
            if (i > 0 && om[i] <= om[i - 1])
                throw std::invalid_argument("cross indices: omega_" + std::to_string(t + 1) +
                                            " must be sorted ascending without duplicates");
        }
    }
    for (int t = 0; t < 3; ++t) {
        const auto& pairs = idx.xi[static_cast<std::size_t>(t)];
        const auto& first_set = idx.omega[static_cast<std::size_t>((t + 1) % 3)];
        const auto& second_set = idx.omega[static_cast<std::size_t>((t + 2) % 3)];
        if (pairs.empty())
            throw std::invalid_argument("cross indices: xi_" + std::to_string(t + 1) +
                                        " is empty (need g_t >= 1)");
        for (std::size_t c = 0; c < pairs.size(); ++c) {
            if (!detail::contains_sorted(first_set, pairs[c][0]) ||
                !detail::contains_sorted(second_set, pairs[c][1]))
                throw std::invalid_argument("cross indices: xi_" + std::to_string(t + 1) +
                                            " pair not contained in the prescribed omega sets");
            if (c > 0 && !(pairs[c - 1] < pairs[c]))
                throw std::invalid_argument("cross indices: xi_" + std::to_string(t + 1) +
                                            " must be lexicographically sorted without duplicates");
        }
    }
}

// Parameter count of the rank-(r1,r2,r3) tensor manifold in p1 x p2 x p3:
// r1*r2*r3 + sum_t r_t*(p_t - r_t).
inline long long degrees_of_freedom(const Dims3& p, const Ranks3& r) {
    for (int t = 0; t < 3; ++t) {
        if (r[static_cast<std::size_t>(t)] < 0 || p[static_cast<std::size_t>(t)] < 1)
            throw std::invalid_argument("degrees_of_freedom: need p_t >= 1 and r_t >= 0");
        if (r[static_cast<std::size_t>(t)] > p[static_cast<std::size_t>(t)])
            throw std::invalid_argument("degrees_of_freedom: r_" + std::to_string(t + 1) + " = " +
                                        std::to_string(r[static_cast<std::size_t>(t)]) +
                                        " violates r_t <= p_t (p_" + std::to_string(t + 1) +
                                        " = " +
                                        std::to_string(p[static_cast<std::size_t>(t)]) + ")");
    }
    const long long rmax = static_cast<long long>(std::max({r[0], r[1], r[2]}));
    const long long rprod = static_cast<long long>(r[0]) * r[1] * r[2];
    if (rmax * rmax > rprod)
        throw std::invalid_argument("degrees_of_freedom: max^2{r1,r2,r3} = " +
                                    std::to_string(rmax * rmax) + " violates max^2{r} <= r1*r2*r3 = " +
                                    std::to_string(rprod));
    long long dof = rprod;
    for (int t = 0; t < 3; ++t)
        dof += static_cast<long long>(r[static_cast<std::size_t>(t)]) *
               (p[static_cast<std::size_t>(t)] - r[static_cast<std::size_t>(t)]);
    return dof;
}

// m1*m2*m3 body entries plus g_t*(p_t - m_t) new entries per arm.
inline long long measurement_count(const CrossIndices& idx) {
    auto m = idx.m();
    auto g = idx.g();
    long long n = static_cast<long long>(m[0]) * m[1] * m[2];
    for (int t = 0; t < 3; ++t)
        n += static_cast<long long>(g[static_cast<std::size_t>(t)]) *
             (idx.dims[static_cast<std::size_t>(t)] - m[static_cast<std::size_t>(t)]);
    return n;
}

inline double sampling_ratio(const CrossIndices& idx) {
    return static_cast<double>(measurement_count(idx)) /
           (static_cast<double>(idx.dims[0]) * static_cast<double>(idx.dims[1]) *
            static_cast<double>(idx.dims[2]));
}

// Uniform Cross pattern: omega_t drawn without replacement from [0, p_t),
// xi_t without replacement from the product of the two other omega sets,
// everything determined by the seed.
inline CrossIndices random_cross_indices(const Dims3& p, const std::array<Index, 3>& m,
                                         const std::array<Index, 3>& g, std::uint64_t seed) {
    CrossIndices idx;
    idx.dims = p;
    for (int t = 0; t < 3; ++t) {
        if (m[static_cast<std::size_t>(t)] < 1 ||
            m[static_cast<std::size_t>(t)] > p[static_cast<std::size_t>(t)])
            throw std::invalid_argument("random_cross_indices: need 1 <= m_" +
                                        std::to_string(t + 1) + " <= p_" + std::to_string(t + 1));
    }
    for (int t = 0; t < 3; ++t) {
        const long long cap = static_cast<long long>(m[static_cast<std::size_t>((t + 1) % 3)]) *
                              m[static_cast<std::size_t>((t + 2) % 3)];
        if (g[static_cast<std::size_t>(t)] < 1 || g[static_cast<std::size_t>(t)] > cap)
            throw std::invalid_argument(
                "random_cross_indices: g_" + std::to_string(t + 1) + " = " +
                std::to_string(g[static_cast<std::size_t>(t)]) +
                " must lie in [1, " + std::to_string(cap) +
                "] (product of the other two omega sizes)");
    }
    Rng rng(mix(seed, 0x43524f53 /* "CROS" */));
    for (int t = 0; t < 3; ++t) {
        auto draw = sample_without_replacement(p[static_cast<std::size_t>(t)],
                                               m[static_cast<std::size_t>(t)], rng);
        idx.omega[static_cast<std::size_t>(t)].assign(draw.begin(), draw.end());
    }
    for (int t = 0; t < 3; ++t) {
        const auto& first_set = idx.omega[static_cast<std::size_t>((t + 1) % 3)];
        const auto& second_set = idx.omega[static_cast<std::size_t>((t + 2) % 3)];
        const Index nb = static_cast<Index>(second_set.size());
        auto flat = sample_without_replacement(
            static_cast<Index>(first_set.size()) * nb, g[static_cast<std::size_t>(t)], rng);
        auto& pairs = idx.xi[static_cast<std::size_t>(t)];
        pairs.reserve(flat.size());
        for (std::int64_t f : flat)
            pairs.push_back({first_set[static_cast<std::size_t>(f / nb)],
                             second_set[static_cast<std::size_t>(f % nb)]});
        std::sort(pairs.begin(), pairs.end());
    }
    validate(idx);
    return idx;
}

// Round half away from zero, the convention used by the rho sizing policy.
inline Index round_half_away(double v) {
    return static_cast<Index>(v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

inline std::array<Index, 3> rho_policy_m(const Dims3& p, double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("rho policy: rho must lie in (0, 1]");
    std::array<Index, 3> m;
    for (int t = 0; t < 3; ++t)
        m[static_cast<std::size_t>(t)] =
            std::clamp<Index>(round_half_away(rho * static_cast<double>(
                                                        p[static_cast<std::size_t>(t)])),
                              1, p[static_cast<std::size_t>(t)]);
    return m;
}

inline std::array<Index, 3> rho_policy_g(const Dims3& p, const std::array<Index, 3>& m) {
    const double mprod = static_cast<double>(m[0]) * static_cast<double>(m[1]) *
                         static_cast<double>(m[2]);
    std::array<Index, 3> g;
    for (int t = 0; t < 3; ++t) {
        const long long cap = static_cast<long long>(m[static_cast<std::size_t>((t + 1) % 3)]) *
                              m[static_cast<std::size_t>((t + 2) % 3)];
        Index want = round_half_away(mprod / static_cast<double>(p[static_cast<std::size_t>(t)]));
        g[static_cast<std::size_t>(t)] = std::clamp<Index>(want, 1, static_cast<Index>(cap));
    }
    return g;
}

// Sizing rule m_t = round(rho * p_t), g_t = round(m1*m2*m3 / p_t), then a
// uniform draw.
inline CrossIndices rho_policy_indices(const Dims3& p, double rho, std::uint64_t seed) {
    auto m = rho_policy_m(p, rho);
    auto g = rho_policy_g(p, m);
    return random_cross_indices(p, m, g, seed);
}

// The measured values of one Cross pattern.
//   body        -- the m1 x m2 x m3 sub-tensor on omega[0] x omega[1] x omega[2]
//   arm[t]      -- p_t x g_t, column c is the full mode-(t+1) fiber at xi[t][c]
//   joint[t]    -- m_t x g_t, arm[t] restricted to the omega[t] rows
struct CrossObservations {
    CrossIndices indices;
    Tensor3 body;
    std::array<Matrix, 3> arm;
    std::array<Matrix, 3> joint;
};

namespace detail {

// Tensor coordinate of arm entry (i, c) for 0-based mode t: the pair fixes
// the two cyclic coordinates and i runs along the mode itself.
inline std::array<Index, 3> fiber_coord(int t, Index i, const std::array<Index, 2>& pair) {
    std::array<Index, 3> coord{};
    coord[static_cast<std::size_t>(t)] = i;
    coord[static_cast<std::size_t>((t + 1) % 3)] = pair[0];
    coord[static_cast<std::size_t>((t + 2) % 3)] = pair[1];
    return coord;
}

}  // namespace detail

inline CrossObservations extract_observations(const Tensor3& x, const CrossIndices& idx) {
    if (x.dims() != idx.dims)
        throw std::invalid_argument("extract_observations: tensor dims do not match indices dims");
    validate(idx);
    auto m = idx.m();
    auto g = idx.g();
    CrossObservations obs;
    obs.indices = idx;
    obs.body = Tensor3(m[0], m[1], m[2]);
    for (Index c = 0; c < m[2]; ++c)
        for (Index b = 0; b < m[1]; ++b)
            for (Index a = 0; a < m[0]; ++a)
                obs.body(a, b, c) = x(idx.omega[0][static_cast<std::size_t>(a)],
                                      idx.omega[1][static_cast<std::size_t>(b)],
                                      idx.omega[2][static_cast<std::size_t>(c)]);
    for (int t = 0; t < 3; ++t) {
        const Index p = idx.dims[static_cast<std::size_t>(t)];
        Matrix& arm = obs.arm[static_cast<std::size_t>(t)];
        arm.resize(p, g[static_cast<std::size_t>(t)]);
        for (Index c = 0; c < g[static_cast<std::size_t>(t)]; ++c) {
            const auto& pair = idx.xi[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
            for (Index i = 0; i < p; ++i) {
                auto coord = detail::fiber_coord(t, i, pair);
                arm(i, c) = x(coord[0], coord[1], coord[2]);
            }
        }
        Matrix& joint = obs.joint[static_cast<std::size_t>(t)];
        joint.resize(m[static_cast<std::size_t>(t)], g[static_cast<std::size_t>(t)]);
        for (Index r = 0; r < m[static_cast<std::size_t>(t)]; ++r)
            joint.row(r) = arm.row(idx.omega[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)]);
    }
    return obs;
}

inline Matrix body_matricization(const CrossObservations& obs, int mode) {
    return matricize(obs.body, mode);
}

// Checks the definitional overlaps: joints are rows of arms, and every joint
// entry reappears bit-identically in the body block.
inline void validate(const CrossObservations& obs) {
    validate(obs.indices);
    auto m = obs.indices.m();
    auto g = obs.indices.g();
    if (obs.body.dims() != Dims3{m[0], m[1], m[2]})
        throw std::invalid_argument("observations: body dims do not match omega sizes");
    for (int t = 0; t < 3; ++t) {
        const Matrix& arm = obs.arm[static_cast<std::size_t>(t)];
        const Matrix& joint = obs.joint[static_cast<std::size_t>(t)];
        if (arm.rows() != obs.indices.dims[static_cast<std::size_t>(t)] ||
            arm.cols() != g[static_cast<std::size_t>(t)])
            throw std::invalid_argument("observations: arm_" + std::to_string(t + 1) +
                                        " has wrong shape");
        if (joint.rows() != m[static_cast<std::size_t>(t)] ||
            joint.cols() != g[static_cast<std::size_t>(t)])
            throw std::invalid_argument("observations: joint_" + std::to_string(t + 1) +
                                        " has wrong shape");
        if (!arm.allFinite())
            throw std::invalid_argument("observations: arm_" + std::to_string(t + 1) +
                                        " has non-finite entries");
        for (Index r = 0; r < joint.rows(); ++r)
            for (Index c = 0; c < joint.cols(); ++c)
                if (joint(r, c) !=
                    arm(obs.indices.omega[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)], c))
                    throw std::invalid_argument("observations: joint_" + std::to_string(t + 1) +
                                                " disagrees with arm_" + std::to_string(t + 1) +
                                                " at the omega rows");
        for (Index c = 0; c < joint.cols(); ++c) {
            const auto& pair = obs.indices.xi[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
            const Index pos_a = detail::position_sorted(
                obs.indices.omega[static_cast<std::size_t>((t + 1) % 3)], pair[0]);
            const Index pos_b = detail::position_sorted(
                obs.indices.omega[static_cast<std::size_t>((t + 2) % 3)], pair[1]);
            for (Index r = 0; r < joint.rows(); ++r) {
                std::array<Index, 3> body_coord{};
                body_coord[static_cast<std::size_t>(t)] = r;
                body_coord[static_cast<std::size_t>((t + 1) % 3)] = pos_a;
                body_coord[static_cast<std::size_t>((t + 2) % 3)] = pos_b;
                if (obs.body(body_coord[0], body_coord[1], body_coord[2]) != joint(r, c))
                    throw std::invalid_argument("observations: body and joint_" +
                                                std::to_string(t + 1) +
                                                " disagree on an overlapping entry");
            }
        }
    }
    if (!obs.body.as_vector().allFinite())
        throw std::invalid_argument("observations: body has non-finite entries");
}

}  // namespace cross
