#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "cross/linalg.hpp"
#include "cross/rng.hpp"
#include "cross/scheme.hpp"
#include "cross/tensor.hpp"

namespace cross {

enum class GeneratorKind { gaussian_lowrank, approx_lowrank, nonneg_normalized };

// Synthetic test tensors:
//   gaussian_lowrank  -- core x_1 E1 x_2 E2 x_3 E3, all entries iid N(0,1);
//                        Tucker rank (r1,r2,r3) almost surely.
//   approx_lowrank    -- W x_1 (Q1 D1) x_2 (Q2 D2) x_3 (Q3 D3): Gaussian W,
//                        Haar-random orthogonal Q_t, and diagonal decay
//                        D_t = diag(1, 1, 1^-alpha, 2^-alpha, ..., (p_t-2)^-alpha),
//                        so the matricization spectra decay at rate alpha and
//                        the tensor approaches rank (3,3,3) as alpha grows.
//                        The decay is applied before the rotation (Q*D, not
//                        D*Q): scaling after rotating would pin the leading
//                        subspace to the first coordinate axes, which no
//                        uniform sampling scheme can observe.
//   nonneg_normalized -- |N(0,1)| core and factors, rescaled to sum to one;
//                        a probability tensor for the count noise models.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::gaussian_lowrank;
    Dims3 p{0, 0, 0};
    Ranks3 r{0, 0, 0};
    double alpha = 0.0;  // approx_lowrank only
    std::uint64_t seed = 0;
};

enum class NoiseKind { none, gaussian, poisson, multinomial };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double sigma = 0.0;          // gaussian
    double intensity = 0.0;      // poisson: counts ~ Poisson(intensity * x)
    long long total_count = 0;   // multinomial: N draws over all cells of x
    std::uint64_t seed = 0;
};

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
    return m;
}

inline Tensor3 gaussian_tensor(const Dims3& dims, Rng& rng) {
    Tensor3 t(dims);
    double* d = t.data();
    const Index n = t.size();
    for (Index i = 0; i < n; ++i) d[i] = rng.normal();
    return t;
}

// Haar-distributed orthogonal matrix: QR of a Ginibre matrix with the R
// diagonal signs absorbed into Q.
inline Matrix haar_orthogonal(Index p, Rng& rng) {
    Matrix g = gaussian_matrix(p, p, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(p, p);
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < p; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

inline void check_exact_rank_spec(const GeneratorSpec& spec) {
    for (int t = 0; t < 3; ++t) {
        if (spec.r[static_cast<std::size_t>(t)] < 1)
            throw std::invalid_argument("generate_tensor: ranks must be positive");
        if (spec.r[static_cast<std::size_t>(t)] > spec.p[static_cast<std::size_t>(t)])
            throw std::invalid_argument("generate_tensor: r_" + std::to_string(t + 1) +
                                        " exceeds p_" + std::to_string(t + 1));
    }
    const long long rmax = static_cast<long long>(std::max({spec.r[0], spec.r[1], spec.r[2]}));
    if (rmax * rmax > static_cast<long long>(spec.r[0]) * spec.r[1] * spec.r[2])
        throw std::invalid_argument(
            "generate_tensor: rank combination violates max^2{r} <= r1*r2*r3");
}

}  // namespace detail

inline Tensor3 generate_tensor(const GeneratorSpec& spec) {
    for (Index d : spec.p)
        if (d < 1) throw std::invalid_argument("generate_tensor: dims must be positive");
    Rng rng(mix(spec.seed, 0x47454e /* "GEN" */));
    switch (spec.kind) {
        case GeneratorKind::gaussian_lowrank: {
            detail::check_exact_rank_spec(spec);
            Tensor3 core = detail::gaussian_tensor({spec.r[0], spec.r[1], spec.r[2]}, rng);
            Matrix e1 = detail::gaussian_matrix(spec.p[0], spec.r[0], rng);
            Matrix e2 = detail::gaussian_matrix(spec.p[1], spec.r[1], rng);
            Matrix e3 = detail::gaussian_matrix(spec.p[2], spec.r[2], rng);
            return multi_mode_product(core, e1, e2, e3);
        }
        case GeneratorKind::approx_lowrank: {
            if (spec.alpha < 0.0)
                throw std::invalid_argument("generate_tensor: alpha must be >= 0");
            Tensor3 w = detail::gaussian_tensor(spec.p, rng);
            std::array<Matrix, 3> f;
            for (int t = 0; t < 3; ++t) {
                const Index p = spec.p[static_cast<std::size_t>(t)];
                Matrix q = detail::haar_orthogonal(p, rng);
                Vector d(p);
                for (Index i = 0; i < p; ++i)
                    d(i) = i < 2 ? 1.0
                                 : std::pow(static_cast<double>(i - 1), -spec.alpha);
                f[static_cast<std::size_t>(t)] = q * d.asDiagonal();
            }
            return multi_mode_product(w, f[0], f[1], f[2]);
        }
        case GeneratorKind::nonneg_normalized: {
            detail::check_exact_rank_spec(spec);
            Tensor3 core = detail::gaussian_tensor({spec.r[0], spec.r[1], spec.r[2]}, rng);
            for (Index i = 0; i < core.size(); ++i) core.data()[i] = std::abs(core.data()[i]);
            std::array<Matrix, 3> e;
            for (int t = 0; t < 3; ++t)
                e[static_cast<std::size_t>(t)] =
                    detail::gaussian_matrix(spec.p[static_cast<std::size_t>(t)],
                                            spec.r[static_cast<std::size_t>(t)], rng)
                        .cwiseAbs();
            Tensor3 x = multi_mode_product(core, e[0], e[1], e[2]);
            const double total = x.as_vector().sum();
            if (!(total > 0.0))
                throw std::runtime_error("generate_tensor: nonnegative tensor sums to zero");
            return x.scaled(1.0 / total);
        }
    }
    throw std::invalid_argument("generate_tensor: unknown generator kind");
}

namespace detail {

// One noise draw per physical tensor entry, keyed by (seed, linear index), so
// overlapping body/arm/joint cells always receive the same perturbed value.
class EntryNoise {
public:
    EntryNoise(const NoiseSpec& spec, const Dims3& dims) : spec_(spec), dims_(dims) {}

    double operator()(Index i, Index j, Index k, double x) const {
        const std::uint64_t key =
            mix(spec_.seed, static_cast<std::uint64_t>(i + dims_[0] * (j + dims_[1] * k)),
                0x4e4f495345 /* "NOISE" */);
        Rng rng(key);
        switch (spec_.kind) {
            case NoiseKind::none:
                return x;
            case NoiseKind::gaussian:
                return x + spec_.sigma * rng.normal();
            case NoiseKind::poisson:
                return static_cast<double>(rng.poisson(spec_.intensity * x));
            default:
                throw std::logic_error("EntryNoise: multinomial is drawn globally");
        }
    }

private:
    NoiseSpec spec_;
    Dims3 dims_;
};

// Multinomial(N; x) over every cell of x via sequential binomial splitting in
// storage order. Returns the full count tensor.
inline Tensor3 multinomial_counts(const Tensor3& x, long long n, std::uint64_t seed) {
    Tensor3 counts(x.dims());
    Rng rng(mix(seed, 0x4d4e4f4d /* "MNOM" */));
    long long remaining = n;
    double remaining_mass = x.as_vector().sum();
    const Index total = x.size();
    for (Index c = 0; c < total && remaining > 0; ++c) {
        const double p = x.data()[c];
        long long draw;
        if (c == total - 1 || remaining_mass <= p) {
            draw = remaining;
        } else {
            const double q = std::clamp(p / remaining_mass, 0.0, 1.0);
            draw = rng.binomial(remaining, q);
        }
        counts.data()[c] = static_cast<double>(draw);
        remaining -= draw;
        remaining_mass -= p;
    }
    return counts;
}

}  // namespace detail

// Observe x on the Cross pattern under the given noise model. Count models
// require nonnegative entries (multinomial additionally a unit sum); the raw
// counts are stored unrescaled, so losses against x must divide the estimate
// by the intensity or total count first.
inline CrossObservations apply_noise(const Tensor3& x, const CrossIndices& idx,
                                     const NoiseSpec& noise) {
    if (x.dims() != idx.dims)
        throw std::invalid_argument("apply_noise: tensor dims do not match indices dims");
    switch (noise.kind) {
        case NoiseKind::none:
            return extract_observations(x, idx);
        case NoiseKind::gaussian:
            if (noise.sigma < 0.0)
                throw std::invalid_argument("apply_noise: sigma must be >= 0");
            break;
        case NoiseKind::poisson:
            if (!(noise.intensity > 0.0))
                throw std::invalid_argument("apply_noise: poisson intensity must be positive");
            if (x.as_vector().minCoeff() < 0.0)
                throw std::invalid_argument(
                    "apply_noise: poisson noise requires nonnegative entries");
            break;
        case NoiseKind::multinomial: {
            if (noise.total_count < 1)
                throw std::invalid_argument("apply_noise: multinomial total count must be >= 1");
            if (x.as_vector().minCoeff() < 0.0)
                throw std::invalid_argument(
                    "apply_noise: multinomial noise requires nonnegative entries");
            const double total = x.as_vector().sum();
            if (std::abs(total - 1.0) > 1e-8)
                throw std::invalid_argument(
                    "apply_noise: multinomial noise requires entries summing to 1, got sum = " +
                    std::to_string(total));
            Tensor3 counts = detail::multinomial_counts(x, noise.total_count, noise.seed);
            return extract_observations(counts, idx);
        }
    }

    validate(idx);
    detail::EntryNoise draw(noise, x.dims());
    auto m = idx.m();
    auto g = idx.g();
    CrossObservations obs;
    obs.indices = idx;
    obs.body = Tensor3(m[0], m[1], m[2]);
    for (Index c = 0; c < m[2]; ++c)
        for (Index b = 0; b < m[1]; ++b)
            for (Index a = 0; a < m[0]; ++a) {
                const Index i = idx.omega[0][static_cast<std::size_t>(a)];
                const Index j = idx.omega[1][static_cast<std::size_t>(b)];
                const Index k = idx.omega[2][static_cast<std::size_t>(c)];
                obs.body(a, b, c) = draw(i, j, k, x(i, j, k));
            }
    for (int t = 0; t < 3; ++t) {
        const Index p = idx.dims[static_cast<std::size_t>(t)];
        Matrix& arm = obs.arm[static_cast<std::size_t>(t)];
        arm.resize(p, g[static_cast<std::size_t>(t)]);
        for (Index c = 0; c < g[static_cast<std::size_t>(t)]; ++c) {
            const auto& pair = idx.xi[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
            for (Index i = 0; i < p; ++i) {
                auto coord = detail::fiber_coord(t, i, pair);
                arm(i, c) = draw(coord[0], coord[1], coord[2], x(coord[0], coord[1], coord[2]));
            }
        }
        Matrix& joint = obs.joint[static_cast<std::size_t>(t)];
        joint.resize(m[static_cast<std::size_t>(t)], g[static_cast<std::size_t>(t)]);
        for (Index r = 0; r < m[static_cast<std::size_t>(t)]; ++r)
            joint.row(r) =
                arm.row(idx.omega[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)]);
    }
    return obs;
}

}  // namespace cross
