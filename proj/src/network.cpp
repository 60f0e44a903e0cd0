#include "mponet/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mponet {

namespace {

constexpr double kLogClamp = 1e-12;

double weight_norm_sq(std::span<Tensor* const> weights)
{
    double sum = 0.0;
    for (const Tensor* w : weights)
        for (double v : w->data())
            sum += v * v;
    return sum;
}

std::size_t argmax_row(const double* row, std::size_t n)
{
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c)
        if (row[c] > row[best]) // strict: ties keep the lowest class
            best = c;
    return best;
}

// Backpropagate d(loss)/d(logits-of-softmax-input) through every layer below
// the terminal softmax, accumulating parameter gradients plus the L2 term.
NetworkGrads backprop(Network& net, std::vector<LayerContext>& ctxs,
                      const Tensor& grad_presoftmax, double alpha)
{
    const std::size_t depth = net.depth();
    std::vector<ParamGrads> per_layer(depth);
    Tensor g = grad_presoftmax;
    for (std::size_t i = depth - 1; i-- > 0;)
        g = net.layer(i).backward(g, ctxs[i], &per_layer[i], i > 0);

    NetworkGrads out;
    for (std::size_t i = 0; i < depth; ++i) {
        for (Tensor& t : per_layer[i].weights)
            out.weights.push_back(std::move(t));
        for (Tensor& t : per_layer[i].biases)
            out.biases.push_back(std::move(t));
    }
    if (alpha > 0.0) {
        auto weights = net.weight_params();
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const Tensor& w = *weights[i];
            Tensor& gw = out.weights[i];
            for (std::size_t j = 0; j < w.size(); ++j)
                gw[j] += alpha * w[j];
        }
    }
    return out;
}

void require_softmax_tail(const Network& net)
{
    if (net.depth() == 0 || net.layer(net.depth() - 1).kind() != "softmax")
        throw UsageError("network must end in a softmax layer");
}

// Mean per-sample loss (cross entropy + L2) and accuracy over a full split,
// evaluated in chunks.
std::pair<double, double> split_loss_acc(const Network& net, const DatasetSplit& split,
                                         double alpha, std::span<Tensor* const> weights)
{
    const std::size_t n = split.count();
    if (n == 0)
        throw UsageError("empty dataset split");
    constexpr std::size_t chunk = 512;
    double ce = 0.0;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t at = 0; at < n; at += chunk) {
        const std::size_t take = std::min(chunk, n - at);
        idx.resize(take);
        for (std::size_t i = 0; i < take; ++i)
            idx[i] = at + i;
        Batch b = gather_batch(split, idx);
        Tensor y = net.forward(b.images);
        const std::size_t nc = y.shape()[1];
        for (std::size_t r = 0; r < take; ++r) {
            const double* row = y.data().data() + r * nc;
            const std::size_t label = static_cast<std::size_t>(b.labels[r]);
            ce -= std::log(std::max(row[label], kLogClamp));
            if (argmax_row(row, nc) == label)
                ++correct;
        }
    }
    const double l2 = alpha > 0.0 ? 0.5 * alpha * weight_norm_sq(weights) : 0.0;
    return {ce / double(n) + l2, double(correct) / double(n)};
}

} // namespace

LossValue loss(const Tensor& predictions, const Tensor& targets, double alpha,
               std::span<const Tensor* const> weights)
{
    if (predictions.rank() != 2 || !predictions.same_shape(targets))
        throw ShapeError("loss: predictions and targets must be matching batches");
    const std::size_t batch = predictions.shape()[0], nc = predictions.shape()[1];

    LossValue out{};
    out.per_sample.resize(batch, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* t = targets.data().data() + b * nc;
        const double* y = predictions.data().data() + b * nc;
        double row_sum = 0.0, sample = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
            if (t[c] < 0.0)
                throw UsageError("loss: negative target entry");
            row_sum += t[c];
            if (t[c] != 0.0)
                sample -= t[c] * std::log(std::max(y[c], kLogClamp));
        }
        if (std::abs(row_sum - 1.0) > 1e-9)
            throw UsageError("loss: target row " + std::to_string(b) +
                             " is not normalized");
        out.per_sample[b] = sample;
        out.cross_entropy += sample;
    }
    double norm_sq = 0.0;
    for (const Tensor* w : weights)
        for (double v : w->data())
            norm_sq += v * v;
    out.l2_term = 0.5 * alpha * norm_sq;
    out.total = out.cross_entropy + out.l2_term;
    return out;
}

LossValue loss(const Tensor& predictions, const Tensor& targets, double alpha,
               std::initializer_list<const Tensor*> weights)
{
    return loss(predictions, targets, alpha,
                std::span<const Tensor* const>(weights.begin(), weights.size()));
}

void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
                       double momentum)
{
    if (!param.same_shape(grad) || !param.same_shape(velocity))
        throw ShapeError("sgd step: parameter, gradient and velocity shapes differ");
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
}

Tensor Network::forward(const Tensor& x) const
{
    Tensor h = x;
    for (const auto& l : layers_)
        h = l->forward(h, nullptr);
    return h;
}

Tensor Network::forward(const Tensor& x, std::vector<LayerContext>& ctxs) const
{
    ctxs.assign(layers_.size(), LayerContext{});
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        h = layers_[i]->forward(h, &ctxs[i]);
    return h;
}

std::vector<Tensor*> Network::weight_params()
{
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* t : l->weights())
            out.push_back(t);
    return out;
}

std::vector<Tensor*> Network::bias_params()
{
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* t : l->biases())
            out.push_back(t);
    return out;
}

std::size_t Network::weight_count()
{
    std::size_t total = 0;
    for (Tensor* w : weight_params())
        total += w->size();
    return total;
}

Network Network::clone() const
{
    Network out;
    for (const auto& l : layers_)
        out.add(l->clone());
    return out;
}

NetworkGrads network_gradients(Network& net, const Tensor& x, const Tensor& targets,
                               double alpha)
{
    require_softmax_tail(net);
    std::vector<LayerContext> ctxs;
    Tensor y = net.forward(x, ctxs);
    if (!y.same_shape(targets))
        throw ShapeError("network_gradients: target shape mismatch");

    // fused softmax + cross-entropy gradient: dL/dz = y - t (batch sum form)
    Tensor g = y;
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] -= targets[i];
    return backprop(net, ctxs, g, alpha);
}

double evaluate(const Network& net, const DatasetSplit& split)
{
    const std::size_t n = split.count();
    if (n == 0)
        throw UsageError("evaluate: empty dataset split");
    constexpr std::size_t chunk = 512;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t at = 0; at < n; at += chunk) {
        const std::size_t take = std::min(chunk, n - at);
        idx.resize(take);
        for (std::size_t i = 0; i < take; ++i)
            idx[i] = at + i;
        Batch b = gather_batch(split, idx);
        Tensor y = net.forward(b.images);
        const std::size_t nc = y.shape()[1];
        for (std::size_t r = 0; r < take; ++r)
            if (argmax_row(y.data().data() + r * nc, nc) ==
                static_cast<std::size_t>(b.labels[r]))
                ++correct;
    }
    return double(correct) / double(n);
}

RunReport train(Network& net, const DatasetSplit& train_split,
                const DatasetSplit& test_split, const TrainingConfig& config)
{
    require_softmax_tail(net);
    if (train_split.count() == 0 || test_split.count() == 0)
        throw UsageError("train: empty dataset split");
    if (config.learning_rate <= 0.0)
        throw UsageError("train: learning rate must be positive");
    if (config.momentum < 0.0 || config.momentum >= 1.0)
        throw UsageError("train: momentum must lie in [0, 1)");
    if (config.l2_alpha < 0.0)
        throw UsageError("train: l2_alpha must be non-negative");

    auto weights = net.weight_params();
    auto biases = net.bias_params();
    std::vector<Tensor> wvel, bvel;
    for (Tensor* w : weights)
        wvel.emplace_back(w->shape());
    for (Tensor* b : biases)
        bvel.emplace_back(b->shape());

    const std::size_t decay_at =
        config.lr_decay_epoch ? config.lr_decay_epoch : (2 * config.epochs) / 3 + 1;

    RunReport report;
    report.seed = config.seed;

    auto [loss0, acc0] = split_loss_acc(net, train_split, config.l2_alpha, weights);
    report.epochs.push_back({0, loss0, acc0, evaluate(net, test_split)});

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = config.learning_rate *
                          (epoch >= decay_at ? config.lr_decay_factor : 1.0);
        double loss_sum = 0.0;
        std::size_t batches_done = 0, correct = 0;

        const auto order =
            batch_order(train_split.count(), config.batch_size, config.seed, epoch);
        for (const auto& idx : order) {
            Batch batch = gather_batch(train_split, idx);
            const std::size_t b = idx.size();

            std::vector<LayerContext> ctxs;
            Tensor y = net.forward(batch.images, ctxs);
            const std::size_t nc = y.shape()[1];

            double ce = 0.0;
            for (std::size_t r = 0; r < b; ++r) {
                const double* row = y.data().data() + r * nc;
                const std::size_t label = static_cast<std::size_t>(batch.labels[r]);
                ce -= std::log(std::max(row[label], kLogClamp));
                if (argmax_row(row, nc) == label)
                    ++correct;
            }
            ce /= double(b);
            const double l2 =
                config.l2_alpha > 0.0
                    ? 0.5 * config.l2_alpha * weight_norm_sq(weights)
                    : 0.0;
            const double batch_loss = ce + l2;
            if (!std::isfinite(batch_loss))
                throw DivergenceError("training diverged at epoch " +
                                      std::to_string(epoch) + ", batch " +
                                      std::to_string(batches_done));
            loss_sum += batch_loss;
            ++batches_done;

            // fused softmax + mean cross-entropy gradient
            Tensor g = y;
            const double inv_b = 1.0 / double(b);
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = (g[i] - batch.targets[i]) * inv_b;

            NetworkGrads grads = backprop(net, ctxs, g, config.l2_alpha);
            for (std::size_t i = 0; i < weights.size(); ++i)
                sgd_momentum_step(*weights[i], grads.weights[i], wvel[i], lr,
                                  config.momentum);
            for (std::size_t i = 0; i < biases.size(); ++i)
                sgd_momentum_step(*biases[i], grads.biases[i], bvel[i], lr,
                                  config.momentum);
        }

        report.epochs.push_back({epoch, loss_sum / double(batches_done),
                                 double(correct) / double(train_split.count()),
                                 evaluate(net, test_split)});
    }
    report.final_test_accuracy = report.epochs.back().test_acc;
    return report;
}

} // namespace mponet
