#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mponet/errors.hpp"

namespace mponet {

/// Dense multi-dimensional tensor of 64-bit reals, row-major (last index
/// fastest). Tensors behave as immutable values: every operation returns a
/// new tensor. The flat data buffer is exposed for numerical kernels.
class Tensor {
  public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    /// Tensor wrapping an existing flat buffer, length must equal
    /// product(shape).
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    /// Element access by multi-index (bounds unchecked beyond debug builds).
    double at(std::span<const std::size_t> idx) const;

    /// Row-major strides for the current shape.
    std::vector<std::size_t> strides() const;

    /// Same data, new shape. Element counts must agree.
    Tensor reshape(std::vector<std::size_t> new_shape) const&;
    Tensor reshape(std::vector<std::size_t> new_shape) &&;

    /// Axis permutation: out[i_{axes[0]}, ..., i_{axes[r-1]}] = in[i_0, ..., i_{r-1}],
    /// i.e. out.shape[m] == shape[axes[m]] (numpy transpose semantics).
    Tensor permute(std::span<const std::size_t> axes) const;
    Tensor permute(std::initializer_list<std::size_t> axes) const;

    /// Fuse row_axes into a row index and col_axes into a column index,
    /// each enumerated row-major in the listed order. The two lists together
    /// must form a permutation of all axes.
    Tensor matricize(std::span<const std::size_t> row_axes,
                     std::span<const std::size_t> col_axes) const;
    Tensor matricize(std::initializer_list<std::size_t> row_axes,
                     std::initializer_list<std::size_t> col_axes) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Pairwise tensor contraction over the listed axes (tensordot). Result axes
/// are a's free axes followed by b's free axes, in original order.
Tensor contract(const Tensor& a, const Tensor& b,
                std::span<const std::size_t> axes_a,
                std::span<const std::size_t> axes_b);
Tensor contract(const Tensor& a, const Tensor& b,
                std::initializer_list<std::size_t> axes_a,
                std::initializer_list<std::size_t> axes_b);

/// Thin singular value decomposition of a rank-2 tensor: input == U diag(S) Vt
/// with orthonormal U columns and Vt rows, S non-negative and non-increasing,
/// r = min(rows, cols).
struct SvdResult {
    Tensor U;              // m x r
    std::vector<double> S; // r, non-increasing
    Tensor Vt;             // r x n
};

/// One-sided Jacobi SVD. Deterministic; throws NumericalError if the sweep
/// cap is exceeded.
SvdResult svd(const Tensor& m);

/// U(:,0:k) diag(S(0:k)) Vt(0:k,:) — the Eckart–Young best rank-k
/// approximation of the decomposed matrix.
Tensor svd_reconstruct(const SvdResult& f, std::size_t k);

namespace detail {

std::size_t shape_product(std::span<const std::size_t> shape);

// Row-major GEMM kernels, C is overwritten. Deterministic loop order.
void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c); // C = A(m,k) B(k,n)
void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c); // C = A(m,k) B(n,k)^T
void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c); // C = A(k,m)^T B(k,n)

} // namespace detail

} // namespace mponet
