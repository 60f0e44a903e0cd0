#include "mponet/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace mponet {

namespace detail {

std::size_t shape_product(std::span<const std::size_t> shape)
{
    std::size_t p = 1;
    for (std::size_t e : shape)
        p *= e;
    return p;
}

namespace {

std::string shape_str(std::span<const std::size_t> s)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i)
        os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

void check_positive(std::span<const std::size_t> shape)
{
    for (std::size_t e : shape)
        if (e == 0)
            throw ShapeError("zero extent in shape " + shape_str(shape));
}

} // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c)
{
    std::fill(c, c + m * n, 0.0);
    // 4-row blocks keep a stripe of C in cache while streaming B.
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        double* c0 = c + (i + 0) * n;
        double* c1 = c + (i + 1) * n;
        double* c2 = c + (i + 2) * n;
        double* c3 = c + (i + 3) * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* bp = b + p * n;
            const double a0 = a[(i + 0) * k + p];
            const double a1 = a[(i + 1) * k + p];
            const double a2 = a[(i + 2) * k + p];
            const double a3 = a[(i + 3) * k + p];
            for (std::size_t j = 0; j < n; ++j) {
                const double bj = bp[j];
                c0[j] += a0 * bj;
                c1[j] += a1 * bj;
                c2[j] += a2 * bj;
                c3[j] += a3 * bj;
            }
        }
    }
    for (; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* bp = b + p * n;
            const double ai = a[i * k + p];
            for (std::size_t j = 0; j < n; ++j)
                ci[j] += ai * bp[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c)
{
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c)
{
    std::fill(c, c + m * n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            if (av == 0.0)
                continue;
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j)
                ci[j] += av * bp[j];
        }
    }
}

} // namespace detail

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape))
{
    detail::check_positive(shape_);
    data_.assign(detail::shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    detail::check_positive(shape_);
    if (detail::shape_product(shape_) != data_.size())
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + detail::shape_str(shape_));
}

std::vector<std::size_t> Tensor::strides() const
{
    std::vector<std::size_t> s(shape_.size(), 1);
    for (std::size_t i = shape_.size(); i-- > 1;)
        s[i - 1] = s[i] * shape_[i];
    return s;
}

double Tensor::at(std::span<const std::size_t> idx) const
{
    if (idx.size() != shape_.size())
        throw AxisError("index rank mismatch");
    std::size_t flat = 0, stride = 1;
    for (std::size_t i = shape_.size(); i-- > 0;) {
        if (idx[i] >= shape_[i])
            throw AxisError("index out of range on axis " + std::to_string(i));
        flat += idx[i] * stride;
        stride *= shape_[i];
    }
    return data_[flat];
}

Tensor Tensor::reshape(std::vector<std::size_t> new_shape) const&
{
    detail::check_positive(new_shape);
    if (detail::shape_product(new_shape) != data_.size())
        throw ShapeError("reshape " + detail::shape_str(shape_) + " -> " +
                         detail::shape_str(new_shape) + " changes element count");
    return Tensor(std::move(new_shape), data_);
}

Tensor Tensor::reshape(std::vector<std::size_t> new_shape) &&
{
    detail::check_positive(new_shape);
    if (detail::shape_product(new_shape) != data_.size())
        throw ShapeError("reshape " + detail::shape_str(shape_) + " -> " +
                         detail::shape_str(new_shape) + " changes element count");
    return Tensor(std::move(new_shape), std::move(data_));
}

Tensor Tensor::permute(std::span<const std::size_t> axes) const
{
    const std::size_t r = rank();
    if (axes.size() != r)
        throw AxisError("permutation rank mismatch");
    std::vector<bool> seen(r, false);
    for (std::size_t a : axes) {
        if (a >= r || seen[a])
            throw AxisError("invalid permutation");
        seen[a] = true;
    }

    std::vector<std::size_t> out_shape(r);
    const std::vector<std::size_t> in_strides = strides();
    std::vector<std::size_t> gather(r);
    for (std::size_t m = 0; m < r; ++m) {
        out_shape[m] = shape_[axes[m]];
        gather[m] = in_strides[axes[m]];
    }

    Tensor out(std::move(out_shape));
    if (r == 0) {
        out.data_ = data_;
        return out;
    }

    // Odometer over the output index space, accumulating the input offset.
    const std::size_t inner = out.shape_.back();
    const std::size_t inner_stride = gather.back();
    const std::size_t outer = out.size() / inner;
    std::vector<std::size_t> idx(r, 0);
    const double* src = data_.data();
    double* dst = out.data_.data();
    std::size_t base = 0;
    for (std::size_t o = 0; o < outer; ++o) {
        if (inner_stride == 1) {
            std::memcpy(dst, src + base, inner * sizeof(double));
            dst += inner;
        } else {
            std::size_t off = base;
            for (std::size_t j = 0; j < inner; ++j, off += inner_stride)
                *dst++ = src[off];
        }
        // advance the outer odometer (axes r-2 .. 0)
        for (std::size_t ax = r - 1; ax-- > 0;) {
            base += gather[ax];
            if (++idx[ax] < out.shape_[ax])
                break;
            base -= gather[ax] * out.shape_[ax];
            idx[ax] = 0;
        }
    }
    return out;
}

Tensor Tensor::permute(std::initializer_list<std::size_t> axes) const
{
    return permute(std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor Tensor::matricize(std::span<const std::size_t> row_axes,
                         std::span<const std::size_t> col_axes) const
{
    const std::size_t r = rank();
    if (row_axes.size() + col_axes.size() != r)
        throw AxisError("matricize: row and column axes must cover all axes");
    std::vector<std::size_t> perm;
    perm.reserve(r);
    perm.insert(perm.end(), row_axes.begin(), row_axes.end());
    perm.insert(perm.end(), col_axes.begin(), col_axes.end());
    // permute() validates that perm is a real permutation
    Tensor p = permute(perm);
    std::size_t rows = 1, cols = 1;
    for (std::size_t a : row_axes)
        rows *= shape_[a];
    for (std::size_t a : col_axes)
        cols *= shape_[a];
    return std::move(p).reshape({rows, cols});
}

Tensor Tensor::matricize(std::initializer_list<std::size_t> row_axes,
                         std::initializer_list<std::size_t> col_axes) const
{
    return matricize(std::span<const std::size_t>(row_axes.begin(), row_axes.size()),
                     std::span<const std::size_t>(col_axes.begin(), col_axes.size()));
}

Tensor contract(const Tensor& a, const Tensor& b,
                std::span<const std::size_t> axes_a,
                std::span<const std::size_t> axes_b)
{
    if (axes_a.size() != axes_b.size())
        throw AxisError("contract: axis lists differ in length");
    const std::size_t ra = a.rank(), rb = b.rank(), nc = axes_a.size();

    std::vector<bool> used_a(ra, false), used_b(rb, false);
    std::size_t contracted = 1;
    for (std::size_t i = 0; i < nc; ++i) {
        const std::size_t xa = axes_a[i], xb = axes_b[i];
        if (xa >= ra || xb >= rb || used_a[xa] || used_b[xb])
            throw AxisError("contract: bad contraction axis");
        if (a.shape()[xa] != b.shape()[xb])
            throw ShapeError("contract: extent mismatch on axes " + std::to_string(xa) +
                             "/" + std::to_string(xb));
        used_a[xa] = true;
        used_b[xb] = true;
        contracted *= a.shape()[xa];
    }

    std::vector<std::size_t> perm_a, perm_b, out_shape;
    std::size_t m = 1, n = 1;
    for (std::size_t i = 0; i < ra; ++i)
        if (!used_a[i]) {
            perm_a.push_back(i);
            out_shape.push_back(a.shape()[i]);
            m *= a.shape()[i];
        }
    perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
    perm_b.insert(perm_b.end(), axes_b.begin(), axes_b.end());
    for (std::size_t i = 0; i < rb; ++i)
        if (!used_b[i]) {
            perm_b.push_back(i);
            out_shape.push_back(b.shape()[i]);
            n *= b.shape()[i];
        }

    const Tensor pa = a.permute(perm_a); // [free_a..., contracted...]
    const Tensor pb = b.permute(perm_b); // [contracted..., free_b...]
    std::vector<double> out(m * n);
    detail::gemm_nn(m, contracted, n, pa.data().data(), pb.data().data(), out.data());
    return Tensor(std::move(out_shape), std::move(out));
}

Tensor contract(const Tensor& a, const Tensor& b,
                std::initializer_list<std::size_t> axes_a,
                std::initializer_list<std::size_t> axes_b)
{
    return contract(a, b, std::span<const std::size_t>(axes_a.begin(), axes_a.size()),
                    std::span<const std::size_t>(axes_b.begin(), axes_b.size()));
}

} // namespace mponet
