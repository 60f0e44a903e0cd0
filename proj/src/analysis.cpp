#include "mponet/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace mponet {

EntropyReport bond_entropy(const MpoLayer& layer, std::size_t bond)
{
    const MpoStructure& s = layer.structure;
    const std::size_t n = s.n();
    if (bond < 1 || bond >= n)
        throw UsageError("bond index must lie in 1.." + std::to_string(n - 1));

    // 2n-indexed operator W_{j1..jn, i1..in}; J axes first, then I axes.
    Tensor dense = to_dense(layer);
    std::vector<std::size_t> full_shape;
    full_shape.insert(full_shape.end(), s.J.begin(), s.J.end());
    full_shape.insert(full_shape.end(), s.I.begin(), s.I.end());
    Tensor w = std::move(dense).reshape(std::move(full_shape));

    std::vector<std::size_t> rows, cols;
    std::size_t row_dim = 1, col_dim = 1;
    for (std::size_t k = 0; k < bond; ++k) { // i_1..i_b then j_1..j_b
        rows.push_back(n + k);
        row_dim *= s.I[k];
    }
    for (std::size_t k = 0; k < bond; ++k) {
        rows.push_back(k);
        row_dim *= s.J[k];
    }
    for (std::size_t k = bond; k < n; ++k) {
        cols.push_back(n + k);
        col_dim *= s.I[k];
    }
    for (std::size_t k = bond; k < n; ++k) {
        cols.push_back(k);
        col_dim *= s.J[k];
    }

    const SvdResult f = svd(w.matricize(rows, cols));

    double total = 0.0;
    for (double v : f.S)
        total += v * v;

    EntropyReport report;
    report.bond_index = bond;
    report.spectra.reserve(f.S.size());
    if (total <= 0.0)
        throw NumericalError("bond_entropy: zero operator has no spectrum");
    for (double v : f.S)
        report.spectra.push_back(v * v / total);

    // spectra below 1e-14 of the largest are log-underflow noise
    const double floor = report.spectra.empty() ? 0.0 : report.spectra[0] * 1e-14;
    double entropy = 0.0;
    for (double lam : report.spectra)
        if (lam > floor && lam > 0.0)
            entropy -= lam * std::log(lam);
    report.entropy = entropy;
    report.upper_bound =
        std::log(double(std::min({row_dim, col_dim, s.D[bond]})));
    return report;
}

RunStatistics run_stats(std::span<const double> accuracies)
{
    if (accuracies.empty())
        throw UsageError("run_stats: empty accuracy list");
    RunStatistics st;
    st.runs.assign(accuracies.begin(), accuracies.end());
    st.m = accuracies.size();
    double sum = 0.0;
    for (double a : accuracies)
        sum += a;
    st.mean = sum / double(st.m);
    if (st.m >= 2) {
        double ss = 0.0;
        for (double a : accuracies)
            ss += (a - st.mean) * (a - st.mean);
        st.sigma = std::sqrt(ss / double(st.m - 1));
    }
    return st;
}

} // namespace mponet
