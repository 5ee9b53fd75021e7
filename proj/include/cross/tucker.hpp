#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "cross/linalg.hpp"
#include "cross/tensor.hpp"

namespace cross {

// Tucker decomposition core ×_1 u1 ×_2 u2 ×_3 u3 with orthonormal factors.
struct TuckerFactors {
    Tensor3 core;               // r1 x r2 x r3
    std::array<Matrix, 3> u;    // u[t]: p_t x r_t, orthonormal columns

    Tensor3 reconstruct() const { return multi_mode_product(core, u[0], u[1], u[2]); }
};

struct HosvdResult {
    TuckerFactors factors;
    std::array<Vector, 3> spectra;  // full singular values of each matricization
};

// Classical HOSVD: factor t is the leading left singular subspace of the
// mode-t matricization; the core is the projection of y onto those subspaces.
inline HosvdResult hosvd_with_spectra(const Tensor3& y, const Ranks3& ranks) {
    const Dims3& d = y.dims();
    for (int t = 0; t < 3; ++t) {
        if (ranks[static_cast<std::size_t>(t)] < 1 ||
            ranks[static_cast<std::size_t>(t)] > d[static_cast<std::size_t>(t)])
            throw std::invalid_argument(
                "hosvd: rank " + std::to_string(ranks[static_cast<std::size_t>(t)]) +
                " out of range for mode-" + std::to_string(t + 1) + " extent " +
                std::to_string(d[static_cast<std::size_t>(t)]));
    }
    HosvdResult out;
    std::array<Matrix, 3> ut;
    for (int t = 0; t < 3; ++t) {
        SvdResult f = svd(matricize(y, t + 1));
        out.spectra[static_cast<std::size_t>(t)] = f.singular_values;
        out.factors.u[static_cast<std::size_t>(t)] =
            f.u.leftCols(ranks[static_cast<std::size_t>(t)]);
        ut[static_cast<std::size_t>(t)] =
            out.factors.u[static_cast<std::size_t>(t)].transpose();
    }
    out.factors.core = multi_mode_product(y, ut[0], ut[1], ut[2]);
    return out;
}

inline TuckerFactors hosvd(const Tensor3& y, const Ranks3& ranks) {
    return hosvd_with_spectra(y, ranks).factors;
}

}  // namespace cross
