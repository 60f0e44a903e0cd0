#include "mponet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mponet {

namespace {

// One-sided Jacobi on the columns of A (m x n, m >= n, column-major).
// Rotations are accumulated into V (n x n, column-major). Returns the
// number of sweeps used; throws NumericalError past the cap.
void jacobi_orthogonalize(std::vector<double>& a, std::vector<double>& v,
                          std::size_t m, std::size_t n)
{
    constexpr double rel_tol = 1e-12;
    const std::size_t max_sweeps = 100 * std::max<std::size_t>(n, 1);

    // rotations preserve the Frobenius norm; columns this small are treated
    // as exhausted so cancellation noise cannot keep the sweep alive
    double frob2 = 0.0;
    for (double x : a)
        frob2 += x * x;
    const double dead2 = frob2 * 1e-30;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* ap = a.data() + p * m;
                double* aq = a.data() + q * m;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += ap[i] * ap[i];
                    beta += aq[i] * aq[i];
                    gamma += ap[i] * aq[i];
                }
                if (alpha <= dead2 || beta <= dead2)
                    continue;
                if (std::abs(gamma) <= rel_tol * std::sqrt(alpha * beta))
                    continue;

                const double tau = (beta - alpha) / (2.0 * gamma);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = ap[i], y = aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                double* vp = v.data() + p * n;
                double* vq = v.data() + q * n;
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
                rotated = true;
            }
        }
        if (!rotated)
            return;
    }
    throw NumericalError("svd: Jacobi sweeps did not converge");
}

// Fill column j of u (m x r, row-major) with a unit vector orthogonal to
// columns 0..j-1, built deterministically from the best standard basis seed.
void orthonormal_fill(std::vector<double>& u, std::size_t m, std::size_t r, std::size_t j)
{
    auto project_out = [&](std::vector<double>& cand) {
        for (std::size_t kk = 0; kk < j; ++kk) {
            double dot = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                dot += cand[i] * u[i * r + kk];
            for (std::size_t i = 0; i < m; ++i)
                cand[i] -= dot * u[i * r + kk];
        }
    };
    auto norm2_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x * x;
        return s;
    };

    std::vector<double> cand(m), best(m);
    double best_norm2 = -1.0;
    for (std::size_t seed = 0; seed < m; ++seed) {
        std::fill(cand.begin(), cand.end(), 0.0);
        cand[seed] = 1.0;
        project_out(cand);
        const double norm2 = norm2_of(cand);
        if (norm2 > best_norm2) {
            best_norm2 = norm2;
            best = cand;
        }
        if (norm2 > 0.5) // early exit: clearly outside the current span
            break;
    }
    if (best_norm2 <= 1e-12)
        throw NumericalError("svd: failed to complete orthonormal basis");
    project_out(best); // second pass for numerical orthogonality
    const double inv = 1.0 / std::sqrt(norm2_of(best));
    for (std::size_t i = 0; i < m; ++i)
        u[i * r + j] = best[i] * inv;
}

SvdResult svd_tall(const Tensor& mat)
{
    const std::size_t m = mat.shape()[0], n = mat.shape()[1];

    // column-major working copies
    std::vector<double> a(m * n), v(n * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a[j * m + i] = mat[i * n + j];
    for (std::size_t j = 0; j < n; ++j)
        v[j * n + j] = 1.0;

    jacobi_orthogonalize(a, v, m, n);

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double norm2 = 0.0;
        const double* aj = a.data() + j * m;
        for (std::size_t i = 0; i < m; ++i)
            norm2 += aj[i] * aj[i];
        sigma[j] = std::sqrt(norm2);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double sigma_max = sigma.empty() ? 0.0 : sigma[order[0]];
    const double zero_tol = sigma_max * static_cast<double>(std::max(m, n)) * 1e-16;

    std::vector<double> u(m * n), vt(n * n), s(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        s[j] = sigma[src];
        for (std::size_t i = 0; i < n; ++i)
            vt[j * n + i] = v[src * n + i];
        if (sigma[src] > zero_tol && sigma[src] > 0.0) {
            const double inv = 1.0 / sigma[src];
            const double* aj = a.data() + src * m;
            for (std::size_t i = 0; i < m; ++i)
                u[i * n + j] = aj[i] * inv;
        } else {
            s[j] = sigma[src]; // keep the (tiny) value, only the direction is synthetic
            orthonormal_fill(u, m, n, j);
        }
    }

    SvdResult out;
    out.U = Tensor({m, n}, std::move(u));
    out.S = std::move(s);
    out.Vt = Tensor({n, n}, std::move(vt));
    return out;
}

} // namespace

SvdResult svd(const Tensor& mat)
{
    if (mat.rank() != 2)
        throw ShapeError("svd expects a rank-2 tensor");
    for (double x : mat.data())
        if (!std::isfinite(x))
            throw NumericalError("svd: non-finite entry");

    const std::size_t m = mat.shape()[0], n = mat.shape()[1];
    if (m >= n)
        return svd_tall(mat);

    // Wide input: decompose the transpose and swap the factors.
    SvdResult t = svd_tall(mat.permute({1, 0}));
    SvdResult out;
    out.U = t.Vt.permute({1, 0});
    out.S = std::move(t.S);
    out.Vt = t.U.permute({1, 0});
    return out;
}

Tensor svd_reconstruct(const SvdResult& f, std::size_t k)
{
    const std::size_t m = f.U.shape()[0];
    const std::size_t r = f.U.shape()[1];
    const std::size_t n = f.Vt.shape()[1];
    k = std::min(k, r);

    // scale the leading k rows of Vt by the singular values, then one GEMM
    std::vector<double> svt(k * n);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j)
            svt[i * n + j] = f.S[i] * f.Vt[i * n + j];

    std::vector<double> uk(m * k);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j)
            uk[i * k + j] = f.U[i * r + j];

    std::vector<double> out(m * n, 0.0);
    if (k > 0)
        detail::gemm_nn(m, k, n, uk.data(), svt.data(), out.data());
    return Tensor({m, n}, std::move(out));
}

} // namespace mponet
