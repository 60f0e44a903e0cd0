#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mponet/mpo.hpp"
#include "mponet/tensor.hpp"

namespace mponet {

/// Per-batch state captured by forward() for reuse in backward().
struct LayerContext {
    Tensor input;                     // batch as the layer received it
    Tensor output;                    // layer output (softmax backward needs it)
    std::vector<Tensor> aux;          // layer-specific (MPO carries, im2col matrix)
    std::vector<std::size_t> indices; // maxpool argmax positions
};

/// Gradients for one layer, parallel to weights() / biases().
struct ParamGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

class Layer {
  public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;

    /// Forward for a batch (leading axis = batch). ctx may be null during
    /// inference.
    virtual Tensor forward(const Tensor& x, LayerContext* ctx) const = 0;

    /// Given dL/dy and the forward context, fill parameter gradients (when
    /// grads is non-null) and return dL/dx (empty when !want_input_grad).
    virtual Tensor backward(const Tensor& grad_y, LayerContext& ctx,
                            ParamGrads* grads, bool want_input_grad) const = 0;

    /// Trainable tensors. weights() take part in L2 regularization,
    /// biases() do not.
    virtual std::vector<Tensor*> weights() { return {}; }
    virtual std::vector<Tensor*> biases() { return {}; }

    virtual std::unique_ptr<Layer> clone() const = 0;
};

class DenseLinear final : public Layer {
  public:
    DenseLinear(Tensor weight, Tensor bias); // weight [N_y, N_x], bias [N_y]

    /// He-initialized layer, bias zero.
    static DenseLinear random(std::size_t out_dim, std::size_t in_dim,
                              std::uint64_t seed);

    std::string kind() const override { return "dense_linear"; }
    Tensor forward(const Tensor& x, LayerContext* ctx) const override;
    Tensor backward(const Tensor& grad_y, LayerContext& ctx, ParamGrads* grads,
                    bool want_input_grad) const override;
    std::vector<Tensor*> weights() override { return {&weight_}; }
    std::vector<Tensor*> biases() override { return {&bias_}; }
    std::unique_ptr<Layer> clone() const override;

    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    std::size_t in_dim() const { return weight_.shape()[1]; }
    std::size_t out_dim() const { return weight_.shape()[0]; }

  private:
    Tensor weight_;
    Tensor bias_;
};

class MpoLinear final : public Layer {
  public:
    explicit MpoLinear(MpoLayer layer) : layer_(std::move(layer)) {}

    std::string kind() const override { return "mpo_linear"; }
    Tensor forward(const Tensor& x, LayerContext* ctx) const override;
    Tensor backward(const Tensor& grad_y, LayerContext& ctx, ParamGrads* grads,
                    bool want_input_grad) const override;
    std::vector<Tensor*> weights() override;
    std::vector<Tensor*> biases() override { return {&layer_.bias}; }
    std::unique_ptr<Layer> clone() const override;

    const MpoLayer& mpo() const { return layer_; }

  private:
    MpoLayer layer_;
};

enum class Padding { none, same };

class Conv2D final : public Layer {
  public:
    // kernels [C_out, C_in, kh, kw]; cross-correlation, per-channel bias
    Conv2D(Tensor kernels, Tensor bias, std::size_t stride, Padding padding);

    static Conv2D random(std::size_t out_channels, std::size_t in_channels,
                         std::size_t kh, std::size_t kw, std::size_t stride,
                         Padding padding, std::uint64_t seed);

    std::string kind() const override { return "conv2d"; }
    Tensor forward(const Tensor& x, LayerContext* ctx) const override;
    Tensor backward(const Tensor& grad_y, LayerContext& ctx, ParamGrads* grads,
                    bool want_input_grad) const override;
    std::vector<Tensor*> weights() override { return {&kernels_}; }
    std::vector<Tensor*> biases() override { return {&bias_}; }
    std::unique_ptr<Layer> clone() const override;

    const Tensor& kernels() const { return kernels_; }
    const Tensor& bias() const { return bias_; }
    std::size_t stride() const { return stride_; }
    Padding padding() const { return padding_; }

  private:
    Tensor kernels_;
    Tensor bias_;
    std::size_t stride_;
    Padding padding_;
};

class MaxPool final : public Layer {
  public:
    MaxPool(std::size_t kh, std::size_t kw, std::size_t stride);

    std::string kind() const override { return "maxpool"; }
    Tensor forward(const Tensor& x, LayerContext* ctx) const override;
    Tensor backward(const Tensor& grad_y, LayerContext& ctx, ParamGrads* grads,
                    bool want_input_grad) const override;
    std::unique_ptr<Layer> clone() const override;

    std::size_t kh() const { return kh_; }
    std::size_t kw() const { return kw_; }
    std::size_t stride() const { return stride_; }

  private:
    std::size_t kh_, kw_, stride_;
};

class ReLU final : public Layer {
  public:
    std::string kind() const override { return "relu"; }
    Tensor forward(const Tensor& x, LayerContext* ctx) const override;
    Tensor backward(const Tensor& grad_y, LayerContext& ctx, ParamGrads* grads,
                    bool want_input_grad) const override;
    std::unique_ptr<Layer> clone() const override;
};

class Softmax final : public Layer {
  public:
    std::string kind() const override { return "softmax"; }
    Tensor forward(const Tensor& x, LayerContext* ctx) const override;
    Tensor backward(const Tensor& grad_y, LayerContext& ctx, ParamGrads* grads,
                    bool want_input_grad) const override;
    std::unique_ptr<Layer> clone() const override;
};

} // namespace mponet
