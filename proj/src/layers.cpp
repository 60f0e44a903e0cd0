#include "mponet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mponet {

namespace {

// [B, rest...] -> [B, prod(rest)], validating the flattened length.
Tensor flatten_batch(const Tensor& x, std::size_t expect, const char* who)
{
    if (x.rank() < 2)
        throw ShapeError(std::string(who) + ": expected a batch tensor");
    const std::size_t batch = x.shape()[0];
    const std::size_t rest = x.size() / batch;
    if (rest != expect)
        throw ShapeError(std::string(who) + ": expected inputs of length " +
                         std::to_string(expect) + ", got " + std::to_string(rest));
    return x.reshape({batch, rest});
}

// [B, H, W] is promoted to a single channel; rank-4 passes through.
Tensor as_nchw(const Tensor& x, const char* who)
{
    if (x.rank() == 3)
        return x.reshape({x.shape()[0], 1, x.shape()[1], x.shape()[2]});
    if (x.rank() == 4)
        return x;
    throw ShapeError(std::string(who) + ": expected [B,C,H,W] or [B,H,W] input");
}

struct ConvGeometry {
    std::size_t oh, ow;
    std::size_t pad_top, pad_left;
    std::size_t hp, wp; // padded extents
};

ConvGeometry conv_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                           std::size_t stride, Padding padding)
{
    ConvGeometry g{};
    if (padding == Padding::none) {
        if (h < kh || w < kw)
            throw ShapeError("conv2d: kernel larger than (padded) input");
        g.oh = (h - kh) / stride + 1;
        g.ow = (w - kw) / stride + 1;
        g.pad_top = g.pad_left = 0;
        g.hp = h;
        g.wp = w;
    } else {
        g.oh = (h + stride - 1) / stride;
        g.ow = (w + stride - 1) / stride;
        const std::size_t need_h = (g.oh - 1) * stride + kh;
        const std::size_t need_w = (g.ow - 1) * stride + kw;
        const std::size_t pad_h = need_h > h ? need_h - h : 0;
        const std::size_t pad_w = need_w > w ? need_w - w : 0;
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
        g.hp = h + pad_h;
        g.wp = w + pad_w;
    }
    return g;
}

} // namespace

// ---------------------------------------------------------------- DenseLinear

DenseLinear::DenseLinear(Tensor weight, Tensor bias)
    : weight_(std::move(weight)), bias_(std::move(bias))
{
    if (weight_.rank() != 2)
        throw ShapeError("dense layer weight must be a matrix");
    if (bias_.rank() != 1 || bias_.size() != weight_.shape()[0])
        throw ShapeError("dense layer bias must match the output dimension");
}

DenseLinear DenseLinear::random(std::size_t out_dim, std::size_t in_dim,
                                std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / double(in_dim)));
    Tensor w({out_dim, in_dim});
    for (double& v : w.data())
        v = gauss(rng);
    return DenseLinear(std::move(w), Tensor({out_dim}));
}

Tensor DenseLinear::forward(const Tensor& x, LayerContext* ctx) const
{
    Tensor xf = flatten_batch(x, in_dim(), "dense");
    const std::size_t batch = xf.shape()[0], ny = out_dim(), nx = in_dim();
    Tensor y({batch, ny});
    detail::gemm_nt(batch, nx, ny, xf.data().data(), weight_.data().data(),
                    y.data().data());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < ny; ++j)
            y[b * ny + j] += bias_[j];
    if (ctx)
        ctx->input = x;
    return y;
}

Tensor DenseLinear::backward(const Tensor& grad_y, LayerContext& ctx,
                             ParamGrads* grads, bool want_input_grad) const
{
    const std::size_t ny = out_dim(), nx = in_dim();
    Tensor xf = flatten_batch(ctx.input, nx, "dense");
    const std::size_t batch = xf.shape()[0];
    if (grad_y.rank() != 2 || grad_y.shape()[0] != batch || grad_y.shape()[1] != ny)
        throw ShapeError("dense backward: bad upstream gradient shape");

    if (grads) {
        Tensor gw({ny, nx});
        detail::gemm_tn(ny, batch, nx, grad_y.data().data(), xf.data().data(),
                        gw.data().data());
        Tensor gb({ny});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < ny; ++j)
                gb[j] += grad_y[b * ny + j];
        grads->weights.push_back(std::move(gw));
        grads->biases.push_back(std::move(gb));
    }
    if (!want_input_grad)
        return Tensor();
    Tensor gx({batch, nx});
    detail::gemm_nn(batch, ny, nx, grad_y.data().data(), weight_.data().data(),
                    gx.data().data());
    return std::move(gx).reshape(ctx.input.shape());
}

std::unique_ptr<Layer> DenseLinear::clone() const
{
    return std::make_unique<DenseLinear>(*this);
}

// ----------------------------------------------------------------- MpoLinear

Tensor MpoLinear::forward(const Tensor& x, LayerContext* ctx) const
{
    Tensor xf = flatten_batch(x, layer_.structure.input_dim(), "mpo");
    if (!ctx)
        return mponet::forward(layer_, xf);
    ctx->input = x;
    return forward_cached(layer_, xf, ctx->aux);
}

Tensor MpoLinear::backward(const Tensor& grad_y, LayerContext& ctx,
                           ParamGrads* grads, bool want_input_grad) const
{
    // the sweep cache is consumed; a context drives exactly one backward
    MpoGradients mg =
        backward_cached(layer_, std::move(ctx.aux), grad_y, want_input_grad);
    if (grads) {
        grads->weights = std::move(mg.core_grads);
        grads->biases.push_back(std::move(mg.bias_grad));
    }
    if (!want_input_grad)
        return Tensor();
    return std::move(mg.input_grad).reshape(ctx.input.shape());
}

std::vector<Tensor*> MpoLinear::weights()
{
    std::vector<Tensor*> out;
    out.reserve(layer_.cores.size());
    for (Tensor& c : layer_.cores)
        out.push_back(&c);
    return out;
}

std::unique_ptr<Layer> MpoLinear::clone() const
{
    return std::make_unique<MpoLinear>(*this);
}

// -------------------------------------------------------------------- Conv2D

Conv2D::Conv2D(Tensor kernels, Tensor bias, std::size_t stride, Padding padding)
    : kernels_(std::move(kernels)), bias_(std::move(bias)), stride_(stride),
      padding_(padding)
{
    if (kernels_.rank() != 4)
        throw ShapeError("conv2d kernels must be [C_out, C_in, kh, kw]");
    if (bias_.rank() != 1 || bias_.size() != kernels_.shape()[0])
        throw ShapeError("conv2d bias must have one entry per output channel");
    if (stride_ == 0)
        throw ShapeError("conv2d stride must be positive");
}

Conv2D Conv2D::random(std::size_t out_channels, std::size_t in_channels, std::size_t kh,
                      std::size_t kw, std::size_t stride, Padding padding,
                      std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const double fan_in = double(in_channels * kh * kw);
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / fan_in));
    Tensor k({out_channels, in_channels, kh, kw});
    for (double& v : k.data())
        v = gauss(rng);
    return Conv2D(std::move(k), Tensor({out_channels}), stride, padding);
}

Tensor Conv2D::forward(const Tensor& x, LayerContext* ctx) const
{
    Tensor xn = as_nchw(x, "conv2d");
    const std::size_t batch = xn.shape()[0], cin = xn.shape()[1];
    const std::size_t h = xn.shape()[2], w = xn.shape()[3];
    const std::size_t cout = kernels_.shape()[0];
    const std::size_t kh = kernels_.shape()[2], kw = kernels_.shape()[3];
    if (cin != kernels_.shape()[1])
        throw ShapeError("conv2d: input channel mismatch");
    const ConvGeometry g = conv_geometry(h, w, kh, kw, stride_, padding_);

    const std::size_t patch = cin * kh * kw;
    Tensor col({batch * g.oh * g.ow, patch});
    {
        double* cp = col.data().data();
        const double* xp = xn.data().data();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t oh = 0; oh < g.oh; ++oh)
                for (std::size_t ow = 0; ow < g.ow; ++ow) {
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double* plane = xp + (b * cin + c) * h * w;
                        for (std::size_t u = 0; u < kh; ++u) {
                            const std::size_t hi = oh * stride_ + u;
                            for (std::size_t v = 0; v < kw; ++v) {
                                const std::size_t wi = ow * stride_ + v;
                                const bool inside = hi >= g.pad_top &&
                                                    hi - g.pad_top < h &&
                                                    wi >= g.pad_left &&
                                                    wi - g.pad_left < w;
                                *cp++ = inside
                                            ? plane[(hi - g.pad_top) * w +
                                                    (wi - g.pad_left)]
                                            : 0.0;
                            }
                        }
                    }
                }
    }

    Tensor out2({batch, g.oh, g.ow, cout});
    detail::gemm_nt(batch * g.oh * g.ow, patch, cout, col.data().data(),
                    kernels_.data().data(), out2.data().data());
    {
        double* op = out2.data().data();
        const std::size_t cells = batch * g.oh * g.ow;
        for (std::size_t r = 0; r < cells; ++r)
            for (std::size_t co = 0; co < cout; ++co)
                op[r * cout + co] += bias_[co];
    }
    Tensor y = out2.permute({0, 3, 1, 2}); // [B, C_out, OH, OW]
    if (ctx) {
        ctx->input = x;
        ctx->aux.clear();
        ctx->aux.push_back(std::move(col));
    }
    return y;
}

Tensor Conv2D::backward(const Tensor& grad_y, LayerContext& ctx,
                        ParamGrads* grads, bool want_input_grad) const
{
    Tensor xn = as_nchw(ctx.input, "conv2d");
    const std::size_t batch = xn.shape()[0], cin = xn.shape()[1];
    const std::size_t h = xn.shape()[2], w = xn.shape()[3];
    const std::size_t cout = kernels_.shape()[0];
    const std::size_t kh = kernels_.shape()[2], kw = kernels_.shape()[3];
    const ConvGeometry g = conv_geometry(h, w, kh, kw, stride_, padding_);

    if (grad_y.shape() != std::vector<std::size_t>{batch, cout, g.oh, g.ow})
        throw ShapeError("conv2d backward: bad upstream gradient shape");
    const Tensor& col = ctx.aux.at(0);
    const std::size_t patch = cin * kh * kw;
    const std::size_t cells = batch * g.oh * g.ow;

    Tensor g2 = grad_y.permute({0, 2, 3, 1}); // [B, OH, OW, C_out]

    if (grads) {
        Tensor gk({cout, cin, kh, kw});
        detail::gemm_tn(cout, cells, patch, g2.data().data(), col.data().data(),
                        gk.data().data());
        Tensor gb({cout});
        for (std::size_t r = 0; r < cells; ++r)
            for (std::size_t co = 0; co < cout; ++co)
                gb[co] += g2[r * cout + co];
        grads->weights.push_back(std::move(gk));
        grads->biases.push_back(std::move(gb));
    }
    if (!want_input_grad)
        return Tensor();

    Tensor gcol({cells, patch});
    detail::gemm_nn(cells, cout, patch, g2.data().data(), kernels_.data().data(),
                    gcol.data().data());

    Tensor gx({batch, cin, h, w});
    {
        const double* cp = gcol.data().data();
        double* xp = gx.data().data();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t oh = 0; oh < g.oh; ++oh)
                for (std::size_t ow = 0; ow < g.ow; ++ow)
                    for (std::size_t c = 0; c < cin; ++c) {
                        double* plane = xp + (b * cin + c) * h * w;
                        for (std::size_t u = 0; u < kh; ++u) {
                            const std::size_t hi = oh * stride_ + u;
                            for (std::size_t v = 0; v < kw; ++v) {
                                const std::size_t wi = ow * stride_ + v;
                                const bool inside = hi >= g.pad_top &&
                                                    hi - g.pad_top < h &&
                                                    wi >= g.pad_left &&
                                                    wi - g.pad_left < w;
                                if (inside)
                                    plane[(hi - g.pad_top) * w + (wi - g.pad_left)] +=
                                        *cp;
                                ++cp;
                            }
                        }
                    }
    }
    return std::move(gx).reshape(ctx.input.shape());
}

std::unique_ptr<Layer> Conv2D::clone() const
{
    return std::make_unique<Conv2D>(*this);
}

// ------------------------------------------------------------------- MaxPool

MaxPool::MaxPool(std::size_t kh, std::size_t kw, std::size_t stride)
    : kh_(kh), kw_(kw), stride_(stride)
{
    if (kh_ == 0 || kw_ == 0 || stride_ == 0)
        throw ShapeError("maxpool: window and stride must be positive");
}

Tensor MaxPool::forward(const Tensor& x, LayerContext* ctx) const
{
    Tensor xn = as_nchw(x, "maxpool");
    const std::size_t batch = xn.shape()[0], ch = xn.shape()[1];
    const std::size_t h = xn.shape()[2], w = xn.shape()[3];
    // tail windows are truncated at the boundary
    const std::size_t oh =
        h <= kh_ ? 1
                 : std::min((h - kh_ + stride_ - 1) / stride_ + 1,
                            (h - 1) / stride_ + 1);
    const std::size_t ow =
        w <= kw_ ? 1
                 : std::min((w - kw_ + stride_ - 1) / stride_ + 1,
                            (w - 1) / stride_ + 1);

    Tensor y({batch, ch, oh, ow});
    std::vector<std::size_t> winners(batch * ch * oh * ow);
    const double* xp = xn.data().data();
    double* yp = y.data().data();
    std::size_t cell = 0;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t plane = (b * ch + c) * h * w;
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j, ++cell) {
                    const std::size_t h0 = i * stride_, w0 = j * stride_;
                    const std::size_t h1 = std::min(h0 + kh_, h);
                    const std::size_t w1 = std::min(w0 + kw_, w);
                    double best = xp[plane + h0 * w + w0];
                    std::size_t best_at = plane + h0 * w + w0;
                    for (std::size_t u = h0; u < h1; ++u)
                        for (std::size_t v = w0; v < w1; ++v) {
                            const std::size_t at = plane + u * w + v;
                            if (xp[at] > best) { // ties keep the first position
                                best = xp[at];
                                best_at = at;
                            }
                        }
                    yp[cell] = best;
                    winners[cell] = best_at;
                }
        }
    if (ctx) {
        ctx->input = x;
        ctx->indices = std::move(winners);
    }
    return y;
}

Tensor MaxPool::backward(const Tensor& grad_y, LayerContext& ctx,
                         ParamGrads* /*grads*/, bool want_input_grad) const
{
    if (!want_input_grad)
        return Tensor();
    Tensor xn = as_nchw(ctx.input, "maxpool");
    if (grad_y.size() != ctx.indices.size())
        throw ShapeError("maxpool backward: bad upstream gradient shape");
    Tensor gx(xn.shape());
    for (std::size_t cell = 0; cell < ctx.indices.size(); ++cell)
        gx[ctx.indices[cell]] += grad_y[cell];
    return std::move(gx).reshape(ctx.input.shape());
}

std::unique_ptr<Layer> MaxPool::clone() const
{
    return std::make_unique<MaxPool>(*this);
}

// ---------------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, LayerContext* ctx) const
{
    Tensor y = x;
    for (double& v : y.data())
        v = v > 0.0 ? v : 0.0;
    if (ctx)
        ctx->input = x;
    return y;
}

Tensor ReLU::backward(const Tensor& grad_y, LayerContext& ctx,
                      ParamGrads* /*grads*/, bool want_input_grad) const
{
    if (!want_input_grad)
        return Tensor();
    if (!grad_y.same_shape(ctx.input))
        throw ShapeError("relu backward: bad upstream gradient shape");
    Tensor gx = grad_y;
    for (std::size_t i = 0; i < gx.size(); ++i)
        if (ctx.input[i] <= 0.0)
            gx[i] = 0.0;
    return gx;
}

std::unique_ptr<Layer> ReLU::clone() const
{
    return std::make_unique<ReLU>(*this);
}

// ------------------------------------------------------------------- Softmax

Tensor Softmax::forward(const Tensor& x, LayerContext* ctx) const
{
    if (x.rank() != 2)
        throw ShapeError("softmax: expected a [batch, classes] tensor");
    const std::size_t batch = x.shape()[0], nc = x.shape()[1];
    Tensor y = x;
    for (std::size_t b = 0; b < batch; ++b) {
        double* row = y.data().data() + b * nc;
        const double mx = *std::max_element(row, row + nc);
        double sum = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (std::size_t c = 0; c < nc; ++c)
            row[c] /= sum;
    }
    if (ctx)
        ctx->output = y;
    return y;
}

Tensor Softmax::backward(const Tensor& grad_y, LayerContext& ctx,
                         ParamGrads* /*grads*/, bool want_input_grad) const
{
    if (!want_input_grad)
        return Tensor();
    const Tensor& y = ctx.output;
    if (!grad_y.same_shape(y))
        throw ShapeError("softmax backward: bad upstream gradient shape");
    const std::size_t batch = y.shape()[0], nc = y.shape()[1];
    Tensor gx({batch, nc});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* yr = y.data().data() + b * nc;
        const double* gr = grad_y.data().data() + b * nc;
        double dot = 0.0;
        for (std::size_t c = 0; c < nc; ++c)
            dot += yr[c] * gr[c];
        double* out = gx.data().data() + b * nc;
        for (std::size_t c = 0; c < nc; ++c)
            out[c] = yr[c] * (gr[c] - dot);
    }
    return gx;
}

std::unique_ptr<Layer> Softmax::clone() const
{
    return std::make_unique<Softmax>(*this);
}

} // namespace mponet
