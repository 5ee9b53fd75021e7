#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cross {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Dims3 = std::array<Index, 3>;
using Ranks3 = std::array<Index, 3>;

namespace detail {
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void check_mode(int mode) {
    if (mode < 1 || mode > 3)
        throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(mode));
}
}  // namespace detail

// Dense order-3 tensor of doubles.
//
// Entry (i, j, k) of a p1 x p2 x p3 tensor lives at linear offset
// i + p1*j + p1*p2*k (first index fastest). Written formulas and file-format
// docs use 1-based indices; every C++ interface here is 0-based. Mode
// arguments select a tensor direction and are 1, 2 or 3.
class Tensor3 {
public:
    Tensor3() : dims_{0, 0, 0} {}

    Tensor3(Index p1, Index p2, Index p3) : Tensor3(Dims3{p1, p2, p3}) {}

    explicit Tensor3(const Dims3& dims) : dims_(dims) {
        check_dims(dims);
        data_.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), 0.0);
    }

    Tensor3(const Dims3& dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
        check_dims(dims);
        if (static_cast<Index>(data_.size()) != dims[0] * dims[1] * dims[2])
            throw std::invalid_argument("Tensor3: data length " + std::to_string(data_.size()) +
                                        " does not match dims product " +
                                        std::to_string(dims[0] * dims[1] * dims[2]));
    }

    const Dims3& dims() const { return dims_; }
    Index extent(int axis0) const { return dims_[static_cast<std::size_t>(axis0)]; }
    Index size() const { return static_cast<Index>(data_.size()); }

    double operator()(Index i, Index j, Index k) const {
        return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
    }
    double& operator()(Index i, Index j, Index k) {
        return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
    }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& storage() const { return data_; }

    Eigen::Map<const Vector> as_vector() const {
        return Eigen::Map<const Vector>(data_.data(), size());
    }

    Tensor3 scaled(double c) const {
        Tensor3 out = *this;
        for (double& v : out.data_) v *= c;
        return out;
    }

    bool same_dims(const Tensor3& other) const { return dims_ == other.dims_; }

private:
    static void check_dims(const Dims3& dims) {
        for (Index d : dims)
            if (d <= 0) throw std::invalid_argument("Tensor3: dimensions must be positive");
    }

    Dims3 dims_;
    std::vector<double> data_;
};

inline double hs_norm(const Tensor3& x) { return std::sqrt(x.as_vector().squaredNorm()); }

// Cyclic matricization: entry (i, j, k) maps to
//   mode 1: row i, column j + p2*k
//   mode 2: row j, column k + p3*i
//   mode 3: row k, column i + p1*j
// (0-based form of the usual 1-based convention). Modes 1 and 3 are pure
// reshapes of the storage; mode 2 needs an explicit permutation.
inline Matrix matricize(const Tensor3& x, int mode) {
    detail::check_mode(mode);
    const Dims3& d = x.dims();
    switch (mode) {
        case 1:
            return Eigen::Map<const Matrix>(x.data(), d[0], d[1] * d[2]);
        case 2: {
            Matrix out(d[1], d[2] * d[0]);
            const double* src = x.data();
            for (Index i = 0; i < d[0]; ++i)
                for (Index k = 0; k < d[2]; ++k) {
                    double* col = out.col(k + d[2] * i).data();
                    const double* s = src + i + d[0] * d[1] * k;
                    for (Index j = 0; j < d[1]; ++j) col[j] = s[d[0] * j];
                }
            return out;
        }
        default:
            return Eigen::Map<const detail::RowMajorMatrix>(x.data(), d[2], d[0] * d[1]);
    }
}

inline Tensor3 fold(const Matrix& m, int mode, const Dims3& dims) {
    detail::check_mode(mode);
    const Index rows_expect = dims[static_cast<std::size_t>(mode - 1)];
    const Index cols_expect = dims[0] * dims[1] * dims[2] / rows_expect;
    if (m.rows() != rows_expect || m.cols() != cols_expect)
        throw std::invalid_argument("fold: matrix is " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + " but mode-" + std::to_string(mode) +
                                    " of the target dims needs " + std::to_string(rows_expect) +
                                    "x" + std::to_string(cols_expect));
    Tensor3 out(dims);
    switch (mode) {
        case 1:
            Eigen::Map<Matrix>(out.data(), dims[0], dims[1] * dims[2]) = m;
            break;
        case 2: {
            double* dst = out.data();
            for (Index i = 0; i < dims[0]; ++i)
                for (Index k = 0; k < dims[2]; ++k) {
                    const double* col = m.col(k + dims[2] * i).data();
                    double* s = dst + i + dims[0] * dims[1] * k;
                    for (Index j = 0; j < dims[1]; ++j) s[dims[0] * j] = col[j];
                }
            break;
        }
        default:
            Eigen::Map<detail::RowMajorMatrix>(out.data(), dims[2], dims[0] * dims[1]) = m;
            break;
    }
    return out;
}

// Tensor-matrix product along one mode: (x ×_1 E)_{ijk} = sum_s E_{is} x_{sjk},
// and the mode-2/3 analogues. Output replaces the mode-t extent with E.rows().
inline Tensor3 mode_product(const Tensor3& x, const Matrix& e, int mode) {
    detail::check_mode(mode);
    const Dims3& d = x.dims();
    if (e.cols() != d[static_cast<std::size_t>(mode - 1)])
        throw std::invalid_argument("mode_product: matrix has " + std::to_string(e.cols()) +
                                    " cols but mode-" + std::to_string(mode) + " extent is " +
                                    std::to_string(d[static_cast<std::size_t>(mode - 1)]));
    Dims3 out_dims = d;
    out_dims[static_cast<std::size_t>(mode - 1)] = e.rows();
    switch (mode) {
        case 1: {
            Tensor3 out(out_dims);
            Eigen::Map<Matrix>(out.data(), out_dims[0], d[1] * d[2]).noalias() =
                e * Eigen::Map<const Matrix>(x.data(), d[0], d[1] * d[2]);
            return out;
        }
        case 2:
            return fold(e * matricize(x, 2), 2, out_dims);
        default: {
            Tensor3 out(out_dims);
            Eigen::Map<detail::RowMajorMatrix>(out.data(), out_dims[2], d[0] * d[1]).noalias() =
                e * Eigen::Map<const detail::RowMajorMatrix>(x.data(), d[2], d[0] * d[1]);
            return out;
        }
    }
}

// x ×_1 E1 ×_2 E2 ×_3 E3 with null entries skipped. Mode products commute, so
// the factors are applied greedily by smallest intermediate size; ties pick
// the higher mode, which leaves the reshape-only mode-1 product for the
// largest step.
inline Tensor3 multi_mode_product(const Tensor3& x, const Matrix* e1, const Matrix* e2,
                                  const Matrix* e3) {
    std::array<const Matrix*, 3> factors{e1, e2, e3};
    Tensor3 cur = x;
    std::array<bool, 3> done{e1 == nullptr, e2 == nullptr, e3 == nullptr};
    for (;;) {
        int best = -1;
        Index best_size = 0;
        for (int t = 2; t >= 0; --t) {
            if (done[static_cast<std::size_t>(t)]) continue;
            Dims3 nd = cur.dims();
            nd[static_cast<std::size_t>(t)] = factors[static_cast<std::size_t>(t)]->rows();
            Index sz = nd[0] * nd[1] * nd[2];
            if (best < 0 || sz < best_size) {
                best = t;
                best_size = sz;
            }
        }
        if (best < 0) break;
        cur = mode_product(cur, *factors[static_cast<std::size_t>(best)], best + 1);
        done[static_cast<std::size_t>(best)] = true;
    }
    return cur;
}

inline Tensor3 multi_mode_product(const Tensor3& x, const Matrix& e1, const Matrix& e2,
                                  const Matrix& e3) {
    return multi_mode_product(x, &e1, &e2, &e3);
}

}  // namespace cross
