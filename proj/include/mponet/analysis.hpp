#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mponet/mpo.hpp"

namespace mponet {

/// Entanglement data of an MPO across one bond: normalized spectra
/// lambda_i = v_i^2 / sum v^2 (non-increasing), entropy S = -sum lambda ln
/// lambda in nats, and the theoretical bound ln(min(row dim, col dim, D)).
struct EntropyReport {
    std::size_t bond_index; // 1..n-1
    std::vector<double> spectra;
    double entropy;
    double upper_bound;
};

/// Densifies the operator, matricizes it with {i_1..i_b, j_1..j_b} fused as
/// rows and the remaining indices as columns, and takes the singular
/// spectrum across the cut.
EntropyReport bond_entropy(const MpoLayer& layer, std::size_t bond);

/// Mean and sample standard deviation (1/(m-1) normalization) over repeated
/// runs; sigma is absent for a single run.
struct RunStatistics {
    double mean = 0.0;
    std::optional<double> sigma;
    std::vector<double> runs;
    std::size_t m = 0;
};

RunStatistics run_stats(std::span<const double> accuracies);

} // namespace mponet
