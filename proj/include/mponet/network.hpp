#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mponet/data.hpp"
#include "mponet/layers.hpp"

namespace mponet {

struct TrainingConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double l2_alpha = 1e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 25;
    std::uint64_t seed = 1;
    std::size_t lr_decay_epoch = 0; // 1-based first reduced epoch; 0 = 2/3 of epochs
    double lr_decay_factor = 0.1;
};

struct LossValue {
    double total;         // cross_entropy + l2_term
    double cross_entropy; // summed over the batch
    double l2_term;
    std::vector<double> per_sample;
};

/// Cross entropy of softmax predictions against one-hot targets (clamped at
/// 1e-12 inside the log) plus (alpha/2) sum |w|^2 over the given weight
/// tensors. Biases are the caller's to exclude.
LossValue loss(const Tensor& predictions, const Tensor& targets, double alpha,
               std::span<const Tensor* const> weights);
LossValue loss(const Tensor& predictions, const Tensor& targets, double alpha,
               std::initializer_list<const Tensor*> weights);

/// v' = momentum v - lr g; p' = p + v'. Applied uniformly to every parameter.
void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
                       double momentum);

class Network {
  public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    template <typename L> void add(L layer)
    {
        layers_.push_back(std::make_unique<L>(std::move(layer)));
    }

    std::size_t depth() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    Tensor forward(const Tensor& x) const;
    Tensor forward(const Tensor& x, std::vector<LayerContext>& ctxs) const;

    std::vector<Tensor*> weight_params();
    std::vector<Tensor*> bias_params();

    /// Trainable weight elements, biases excluded (the paper's N_para).
    std::size_t weight_count();

    Network clone() const;

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Flat gradients matching weight_params() / bias_params() order.
struct NetworkGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

/// Gradient of loss(net(x), targets, alpha).total with respect to every
/// trainable parameter; the analytic side of the finite-difference checks.
NetworkGrads network_gradients(Network& net, const Tensor& x, const Tensor& targets,
                               double alpha);

struct EpochRecord {
    std::size_t epoch; // 0 = untrained evaluation
    double train_loss;
    double train_acc;
    double test_acc;
};

struct RunReport {
    std::vector<EpochRecord> epochs;
    double final_test_accuracy = 0.0;
    std::uint64_t seed = 0;
};

/// Shuffled mini-batch SGD with momentum; one record per epoch plus the
/// epoch-0 (untrained) evaluation. Deterministic given config.seed. Throws
/// DivergenceError (with epoch/batch context) if the loss becomes non-finite.
RunReport train(Network& net, const DatasetSplit& train_split,
                const DatasetSplit& test_split, const TrainingConfig& config);

/// Fraction of samples whose argmax score equals the label; ties break to
/// the lowest class index.
double evaluate(const Network& net, const DatasetSplit& split);

// ------------------------------------------------------------------ builders

enum class Model { fc2, lenet5 };
enum class Variant { dense, mpo };

/// FC2: 784 -> 256 -> 10. The mpo variant uses M^{4,4,4,4}_{4,7,7,4}(D) and
/// M^{1,1,10,1}_{4,4,4,4}(4).
Network build_fc2(Variant v, std::size_t bond_dim, std::uint64_t seed);

/// LeNet-5 with the last three linear maps replaced (mpo variant) by
/// M^{2,5,6,2}_{2,10,10,2}(4), M^{2,3,7,2}_{2,5,6,2}(4), M^{1,5,2,1}_{2,3,7,2}(2).
Network build_lenet5(Variant v, std::uint64_t seed);

/// Copy with every MpoLinear replaced by its densified DenseLinear
/// equivalent (oracle path).
Network densified_copy(const Network& net);

struct RatioEntry {
    std::string name;
    std::size_t original; // dense weight elements
    std::size_t mpo;      // MPO core elements
};

struct RatioReport {
    std::vector<RatioEntry> layers;
    double rho;
};

/// Per-layer parameter counts for the layers the MPO variant replaces, and
/// their total compression ratio.
RatioReport ratio_report(Model model, std::size_t bond_dim);

} // namespace mponet
