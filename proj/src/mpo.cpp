#include "mponet/mpo.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mponet {

namespace {

void check_dims(const std::vector<std::size_t>& v, const char* what)
{
    for (std::size_t x : v)
        if (x == 0)
            throw StructureError(std::string(what) + " dims must be positive");
}

// Batched sweep y = W x (no bias). Caches the carry entering each step when
// asked. Carry layout: [B, I-suffix, J-prefix, bond].
Tensor sweep(const MpoLayer& layer, const Tensor& x, std::vector<Tensor>* cache)
{
    const MpoStructure& s = layer.structure;
    const std::size_t batch = x.shape()[0];
    const std::size_t n = s.n();

    Tensor carry = x.reshape({batch, s.input_dim(), 1, 1});
    std::size_t is = s.input_dim(), jp = 1;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t ik = s.I[k], jk = s.J[k];
        const std::size_t is2 = is / ik;
        Tensor view = std::move(carry).reshape({batch, ik, is2, jp, s.D[k]});
        const Tensor* src = &view;
        if (cache) {
            cache->push_back(std::move(view));
            src = &cache->back();
        }
        // contract bond and current input factor with core k
        Tensor next = contract(*src, layer.cores[k], {4, 1}, {0, 2});
        // [B, is2, jp, J_k, D_k+1] -> fuse the new output factor into the prefix
        carry = std::move(next).reshape({batch, is2, jp * jk, s.D[k + 1]});
        is = is2;
        jp *= jk;
    }
    return std::move(carry).reshape({batch, s.output_dim()});
}

} // namespace

std::size_t MpoStructure::input_dim() const
{
    std::size_t p = 1;
    for (std::size_t x : I)
        p *= x;
    return p;
}

std::size_t MpoStructure::output_dim() const
{
    std::size_t p = 1;
    for (std::size_t x : J)
        p *= x;
    return p;
}

std::vector<std::size_t> MpoStructure::core_shape(std::size_t k) const
{
    return {D[k], J[k], I[k], D[k + 1]};
}

MpoStructure make_structure(std::vector<std::size_t> J, std::vector<std::size_t> I,
                            std::size_t D)
{
    if (J.size() != I.size() || J.empty())
        throw StructureError("J and I must be non-empty lists of equal length");
    if (D == 0)
        throw StructureError("bond dimension must be positive");
    std::vector<std::size_t> bonds(J.size() > 1 ? J.size() - 1 : 0, D);
    return make_structure(std::move(J), std::move(I), std::move(bonds));
}

MpoStructure make_structure(std::vector<std::size_t> J, std::vector<std::size_t> I,
                            std::vector<std::size_t> interior_bonds)
{
    if (J.size() != I.size() || J.empty())
        throw StructureError("J and I must be non-empty lists of equal length");
    if (interior_bonds.size() != J.size() - 1)
        throw StructureError("expected " + std::to_string(J.size() - 1) +
                             " interior bond dims, got " +
                             std::to_string(interior_bonds.size()));
    check_dims(J, "output");
    check_dims(I, "input");
    check_dims(interior_bonds, "bond");

    MpoStructure s;
    s.J = std::move(J);
    s.I = std::move(I);
    s.D.reserve(s.J.size() + 1);
    s.D.push_back(1);
    s.D.insert(s.D.end(), interior_bonds.begin(), interior_bonds.end());
    s.D.push_back(1);
    return s;
}

std::size_t param_count(const MpoStructure& s)
{
    std::size_t total = 0;
    for (std::size_t k = 0; k < s.n(); ++k)
        total += s.D[k] * s.J[k] * s.I[k] * s.D[k + 1];
    return total;
}

double compression_ratio(std::span<const std::size_t> mpo_counts,
                         std::span<const std::size_t> original_counts)
{
    if (mpo_counts.empty() || original_counts.empty())
        throw UsageError("compression_ratio: empty count list");
    if (mpo_counts.size() != original_counts.size())
        throw UsageError("compression_ratio: count lists differ in length");
    std::size_t num = 0, den = 0;
    for (std::size_t c : mpo_counts)
        num += c;
    for (std::size_t c : original_counts) {
        if (c == 0)
            throw UsageError("compression_ratio: original count must be positive");
        den += c;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

MpoLayer MpoLayer::make(MpoStructure s, std::vector<Tensor> cores, Tensor bias)
{
    if (cores.size() != s.n())
        throw StructureError("core count does not match structure");
    for (std::size_t k = 0; k < cores.size(); ++k)
        if (cores[k].shape() != s.core_shape(k))
            throw StructureError("core " + std::to_string(k) + " shape mismatch");
    if (bias.shape() != std::vector<std::size_t>{s.output_dim()})
        throw StructureError("bias length does not match output dim");
    MpoLayer l;
    l.structure = std::move(s);
    l.cores = std::move(cores);
    l.bias = std::move(bias);
    return l;
}

MpoLayer init_random(const MpoStructure& s, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double n = static_cast<double>(s.n());
    // g^(1/n) with g = 2^((1-n)/2) brings Var(W_dense) to the He value 2/N_x.
    const double rescale = std::pow(2.0, (1.0 - n) / (2.0 * n));

    MpoLayer l;
    l.structure = s;
    l.cores.reserve(s.n());
    for (std::size_t k = 0; k < s.n(); ++k) {
        const double sigma =
            std::sqrt(2.0 / (static_cast<double>(s.I[k]) * static_cast<double>(s.D[k]))) *
            rescale;
        Tensor core(s.core_shape(k));
        for (double& v : core.data())
            v = sigma * gauss(rng);
        l.cores.push_back(std::move(core));
    }
    l.bias = Tensor({s.output_dim()});
    return l;
}

Tensor forward(const MpoLayer& layer, const Tensor& x)
{
    const MpoStructure& s = layer.structure;
    const bool single = x.rank() == 1;
    Tensor xb = single ? x.reshape({1, x.size()}) : x;
    if (xb.rank() != 2 || xb.shape()[1] != s.input_dim())
        throw ShapeError("mpo forward: expected input of length " +
                         std::to_string(s.input_dim()));

    Tensor y = sweep(layer, xb, nullptr);
    const std::size_t batch = y.shape()[0], ny = y.shape()[1];
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < ny; ++j)
            y[b * ny + j] += layer.bias[j];
    return single ? std::move(y).reshape({ny}) : y;
}

Tensor forward_cached(const MpoLayer& layer, const Tensor& x, std::vector<Tensor>& cache)
{
    const MpoStructure& s = layer.structure;
    if (x.rank() != 2 || x.shape()[1] != s.input_dim())
        throw ShapeError("mpo forward: expected a [batch, " +
                         std::to_string(s.input_dim()) + "] input");
    cache.clear();
    cache.reserve(s.n());
    Tensor y = sweep(layer, x, &cache);
    const std::size_t batch = y.shape()[0], ny = y.shape()[1];
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < ny; ++j)
            y[b * ny + j] += layer.bias[j];
    return y;
}

MpoGradients backward(const MpoLayer& layer, const Tensor& x, const Tensor& grad_y,
                      bool want_input_grad)
{
    const MpoStructure& s = layer.structure;
    if (x.rank() != 2 || x.shape()[1] != s.input_dim())
        throw ShapeError("mpo backward: bad input batch shape");

    std::vector<Tensor> cache;
    cache.reserve(s.n());
    sweep(layer, x, &cache);
    return backward_cached(layer, std::move(cache), grad_y, want_input_grad);
}

MpoGradients backward_cached(const MpoLayer& layer, std::vector<Tensor> cache,
                             const Tensor& grad_y, bool want_input_grad)
{
    const MpoStructure& s = layer.structure;
    if (cache.size() != s.n() || cache.empty())
        throw ShapeError("mpo backward: bad sweep cache");
    const std::size_t batch = cache[0].shape()[0];
    if (grad_y.rank() != 2 || grad_y.shape()[0] != batch ||
        grad_y.shape()[1] != s.output_dim())
        throw ShapeError("mpo backward: bad upstream gradient shape");

    const std::size_t n = s.n();
    MpoGradients out;
    out.core_grads.resize(n);

    out.bias_grad = Tensor({s.output_dim()});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < s.output_dim(); ++j)
            out.bias_grad[j] += grad_y[b * s.output_dim() + j];

    // Walk the sweep backwards; g is dL/d(carry) in [B, IS, JP, D] layout.
    std::size_t is = 1, jp = s.output_dim();
    Tensor g = grad_y.reshape({batch, 1, s.output_dim(), 1});
    for (std::size_t k = n; k-- > 0;) {
        const std::size_t ik = s.I[k], jk = s.J[k];
        const std::size_t jp_prev = jp / jk;
        Tensor g_view = std::move(g).reshape({batch, is, jp_prev, jk, s.D[k + 1]});
        const Tensor& left = cache[k]; // already [B, I_k, IS, JP_prev, D_k]

        Tensor gc = contract(left, g_view, {0, 2, 3}, {0, 1, 2}); // [I, D, J, D']
        out.core_grads[k] = gc.permute({1, 2, 0, 3});

        if (k > 0 || want_input_grad) {
            Tensor gp = contract(g_view, layer.cores[k], {3, 4}, {1, 3});
            // [B, IS, JP_prev, D, I] -> [B, I, IS, JP_prev, D]
            g = gp.permute({0, 4, 1, 2, 3}).reshape({batch, ik * is, jp_prev, s.D[k]});
        }
        is *= ik;
        jp = jp_prev;
    }
    if (want_input_grad)
        out.input_grad = std::move(g).reshape({batch, s.input_dim()});
    return out;
}

Tensor to_dense(const MpoLayer& layer)
{
    const MpoStructure& s = layer.structure;
    const std::size_t ny = s.output_dim(), nx = s.input_dim();
    if (static_cast<double>(ny) * static_cast<double>(nx) > 1e8)
        throw CapacityError("to_dense: operator exceeds the 1e8-element guard");

    // chain [J-prefix, I-prefix, bond], absorbing one core per step
    Tensor t = layer.cores[0].permute({1, 2, 3, 0}); // [J1, I1, D1, 1]
    std::size_t jp = s.J[0], ip = s.I[0];
    t = std::move(t).reshape({jp, ip, s.D[1]});
    for (std::size_t k = 1; k < s.n(); ++k) {
        Tensor next = contract(t, layer.cores[k], {2}, {0}); // [JP, IP, J, I, D']
        t = next.permute({0, 2, 1, 3, 4})
                .reshape({jp * s.J[k], ip * s.I[k], s.D[k + 1]});
        jp *= s.J[k];
        ip *= s.I[k];
    }
    return std::move(t).reshape({ny, nx});
}

} // namespace mponet
