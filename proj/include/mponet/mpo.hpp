#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mponet/tensor.hpp"

namespace mponet {

/// Symbolic MPO structure M^{J1..Jn}_{I1..In}(D): output factor dims J,
/// input factor dims I, and bond dims D of length n+1 with D[0] = D[n] = 1.
struct MpoStructure {
    std::vector<std::size_t> J;
    std::vector<std::size_t> I;
    std::vector<std::size_t> D;

    std::size_t n() const { return J.size(); }
    std::size_t input_dim() const;  // product(I) = N_x
    std::size_t output_dim() const; // product(J) = N_y

    /// Shape of core k: [D_k-1, J_k, I_k, D_k] (0-based k).
    std::vector<std::size_t> core_shape(std::size_t k) const;
};

/// Uniform interior bond dimension D.
MpoStructure make_structure(std::vector<std::size_t> J, std::vector<std::size_t> I,
                            std::size_t D);

/// Explicit interior bond dims (length n-1); boundary bonds are fixed to 1.
MpoStructure make_structure(std::vector<std::size_t> J, std::vector<std::size_t> I,
                            std::vector<std::size_t> interior_bonds);

/// Number of variational parameters: sum over cores of D_{k-1} J_k I_k D_k.
/// The bias is not counted.
std::size_t param_count(const MpoStructure& s);

/// rho = sum(mpo_counts) / sum(original_counts), biases excluded on both sides.
double compression_ratio(std::span<const std::size_t> mpo_counts,
                         std::span<const std::size_t> original_counts);

/// Trainable MPO linear map: n cores plus a dense bias of length N_y.
struct MpoLayer {
    MpoStructure structure;
    std::vector<Tensor> cores; // core k has shape structure.core_shape(k)
    Tensor bias;               // [N_y]

    std::size_t n() const { return structure.n(); }

    /// Validating constructor for deserialized layers.
    static MpoLayer make(MpoStructure s, std::vector<Tensor> cores, Tensor bias);
};

/// Cores ~ N(0, sigma_k^2) with sigma_k = sqrt(2 / (I_k D_{k-1})) rescaled by
/// a global factor so the densified operator matches He fan-in variance
/// 2/N_x; bias zero. Deterministic for a given seed.
MpoLayer init_random(const MpoStructure& s, std::uint64_t seed);

/// y = W x + b without densifying W: a left-to-right sweep absorbing one
/// core per step. x is [B, N_x] (or a single vector [N_x]); output matches.
Tensor forward(const MpoLayer& layer, const Tensor& x);

struct MpoGradients {
    std::vector<Tensor> core_grads; // shapes mirror the cores
    Tensor bias_grad;               // [N_y]
    Tensor input_grad;              // [B, N_x]; empty when not requested
};

/// Reverse-mode gradients of L given dL/dy = grad_y, reusing the cached
/// left partial contractions of the forward sweep.
MpoGradients backward(const MpoLayer& layer, const Tensor& x, const Tensor& grad_y,
                      bool want_input_grad = true);

/// forward() for a batch that also hands out the per-step sweep carries, so
/// a following backward_cached() can skip recomputing them.
Tensor forward_cached(const MpoLayer& layer, const Tensor& x,
                      std::vector<Tensor>& cache);

/// backward() driven by carries captured with forward_cached(); consumes the
/// cache.
MpoGradients backward_cached(const MpoLayer& layer, std::vector<Tensor> cache,
                             const Tensor& grad_y, bool want_input_grad = true);

/// Explicit N_y x N_x weight matrix (correctness oracle; never used in the
/// training path). Guarded at 1e8 elements.
Tensor to_dense(const MpoLayer& layer);

} // namespace mponet
