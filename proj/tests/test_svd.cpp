#include <doctest.h>

#include <cmath>
#include <random>

#include "mponet/tensor.hpp"
#include "oracles.hpp"

using namespace mponet;

namespace {

double frobenius(const Tensor& t)
{
    double s = 0.0;
    for (double v : t.data())
        s += v * v;
    return std::sqrt(s);
}

// ||A - U S Vt||_F
double reconstruction_error(const Tensor& a, const SvdResult& f)
{
    Tensor r = svd_reconstruct(f, f.S.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - r[i]) * (a[i] - r[i]);
    return std::sqrt(s);
}

double orthonormality_defect(const Tensor& m, bool columns)
{
    // columns: M^T M = I; rows: M M^T = I
    Tensor g = columns ? contract(m, m, {0}, {0}) : contract(m, m, {1}, {1});
    const std::size_t n = g.shape()[0];
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            worst = std::max(worst,
                             std::abs(g[i * n + j] - (i == j ? 1.0 : 0.0)));
    return worst;
}

} // namespace

TEST_SUITE_BEGIN("svd");

TEST_CASE("identity matrix has unit singular values")
{
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i)
        eye[i * 3 + i] = 1.0;
    SvdResult f = svd(eye);
    REQUIRE(f.S.size() == 3);
    for (double s : f.S)
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank-1 outer product has exactly one nonzero singular value")
{
    const std::vector<double> u = {1.0, -2.0, 0.5, 3.0};
    const std::vector<double> v = {2.0, 1.0, -1.0};
    Tensor m({4, 3});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            m[i * 3 + j] = u[i] * v[j];
    double nu = 0, nv = 0;
    for (double x : u)
        nu += x * x;
    for (double x : v)
        nv += x * x;

    SvdResult f = svd(m);
    CHECK(f.S[0] == doctest::Approx(std::sqrt(nu) * std::sqrt(nv)).epsilon(1e-12));
    for (std::size_t i = 1; i < f.S.size(); ++i)
        CHECK(f.S[i] < 1e-12 * f.S[0]);
}

TEST_CASE("reconstruction and orthonormality on random matrices")
{
    std::mt19937_64 rng(42);
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{8, 5},
                        {5, 8},
                        {1, 7},
                        {60, 31},
                        {200, 200}}) {
        Tensor a = oracle::random_tensor({m, n}, rng);
        SvdResult f = svd(a);
        const std::size_t r = std::min(m, n);
        REQUIRE(f.S.size() == r);
        REQUIRE(f.U.shape() == std::vector<std::size_t>{m, r});
        REQUIRE(f.Vt.shape() == std::vector<std::size_t>{r, n});
        for (std::size_t i = 1; i < r; ++i)
            CHECK(f.S[i] <= f.S[i - 1]);
        CHECK(reconstruction_error(a, f) <= 1e-10 * std::max(1.0, frobenius(a)));
        CHECK(orthonormality_defect(f.U, true) < 1e-10);
        CHECK(orthonormality_defect(f.Vt, false) < 1e-10);
    }
}

TEST_CASE("zero matrix yields zero spectrum and orthonormal factors")
{
    Tensor z({4, 3});
    SvdResult f = svd(z);
    for (double s : f.S)
        CHECK(s == 0.0);
    CHECK(orthonormality_defect(f.U, true) < 1e-12);
    CHECK(orthonormality_defect(f.Vt, false) < 1e-12);
}

TEST_CASE("non-finite input throws")
{
    Tensor bad({2, 2}, {1.0, 2.0, std::nan(""), 0.0});
    CHECK_THROWS_AS(svd(bad), NumericalError);
}

TEST_CASE("Eckart-Young: top-k truncation error equals the tail norm")
{
    std::mt19937_64 rng(5);
    Tensor a = oracle::random_tensor({12, 9}, rng);
    SvdResult f = svd(a);
    for (std::size_t k = 0; k <= f.S.size(); ++k) {
        Tensor approx = svd_reconstruct(f, k);
        double err2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            err2 += (a[i] - approx[i]) * (a[i] - approx[i]);
        double tail2 = 0.0;
        for (std::size_t i = k; i < f.S.size(); ++i)
            tail2 += f.S[i] * f.S[i];
        CHECK(std::sqrt(err2) == doctest::Approx(std::sqrt(tail2)).epsilon(1e-10));
    }
}

TEST_SUITE_END();
