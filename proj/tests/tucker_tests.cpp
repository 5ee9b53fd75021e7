#include <doctest.h>

#include "cross/generators.hpp"
#include "cross/metrics.hpp"
#include "cross/tucker.hpp"
#include "oracles.hpp"

using namespace cross;

TEST_CASE("hosvd reproduces a tensor of exactly the requested rank") {
    GeneratorSpec spec{GeneratorKind::gaussian_lowrank, {12, 10, 14}, {3, 2, 4}, 0.0, 5};
    Tensor3 y = generate_tensor(spec);
    TuckerFactors f = hosvd(y, {3, 2, 4});
    CHECK(relative_hs_loss(f.reconstruct(), y) < 1e-10);
    for (int t = 0; t < 3; ++t) CHECK(has_orthonormal_columns(f.u[static_cast<std::size_t>(t)], 1e-10));
}

TEST_CASE("hosvd at full ranks is exact") {
    Tensor3 y = oracles::random_tensor({5, 6, 4}, 6);
    TuckerFactors f = hosvd(y, {5, 6, 4});
    CHECK(relative_hs_loss(f.reconstruct(), y) < 1e-13);
}

TEST_CASE("hosvd satisfies the discarded-spectrum quasi-optimality bound") {
    Tensor3 y = oracles::random_tensor({10, 10, 10}, 7);
    const Ranks3 ranks{2, 2, 2};
    HosvdResult h = hosvd_with_spectra(y, ranks);
    double budget = 0.0;
    for (int t = 0; t < 3; ++t) {
        double tail = 0.0;
        const Vector& s = h.spectra[static_cast<std::size_t>(t)];
        for (Index i = ranks[static_cast<std::size_t>(t)]; i < s.size(); ++i) tail += s(i) * s(i);
        budget += std::sqrt(tail);
    }
    Tensor3 recon = h.factors.reconstruct();
    Tensor3 diff = y;
    for (Index i = 0; i < diff.size(); ++i) diff.data()[i] -= recon.data()[i];
    CHECK(hs_norm(diff) <= budget * (1.0 + 1e-12));
}

TEST_CASE("hosvd rejects ranks above the dimensions") {
    Tensor3 y(4, 4, 4);
    CHECK_THROWS_AS(hosvd(y, {5, 2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(hosvd(y, {0, 2, 2}), std::invalid_argument);
}

TEST_CASE("tucker reconstruction has componentwise bounded rank") {
    GeneratorSpec spec{GeneratorKind::gaussian_lowrank, {9, 11, 8}, {2, 3, 2}, 0.0, 9};
    Tensor3 y = generate_tensor(spec);
    TuckerFactors f = hosvd(y, {2, 3, 2});
    Tensor3 recon = f.reconstruct();
    CHECK(numerical_rank(matricize(recon, 1)) <= 2);
    CHECK(numerical_rank(matricize(recon, 2)) <= 3);
    CHECK(numerical_rank(matricize(recon, 3)) <= 2);
    CHECK(f.core.dims() == Dims3{2, 3, 2});
}
