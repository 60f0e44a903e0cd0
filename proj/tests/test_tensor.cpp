#include <doctest.h>

#include <random>

#include "mponet/tensor.hpp"
#include "oracles.hpp"

using namespace mponet;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("construction checks element count")
{
    CHECK_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 0.0)));
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
}

TEST_CASE("reshape is row-major metadata only")
{
    Tensor t({6}, {1, 2, 3, 4, 5, 6});
    Tensor m = t.reshape({2, 3});
    const std::size_t idx[] = {1, 2};
    CHECK(m.at(idx) == 6.0);

    SUBCASE("round trip recovers the flat data") {
        Tensor back = m.reshape({3, 2}).reshape({6});
        CHECK(back.data() == t.data());
    }
    SUBCASE("size mismatch throws") {
        CHECK_THROWS_AS(t.reshape({4, 2}), ShapeError);
    }
}

TEST_CASE("784-vector reshaped to [4,7,7,4] follows the row-major formula")
{
    std::vector<double> data(784);
    for (std::size_t i = 0; i < 784; ++i)
        data[i] = double(i);
    Tensor t = Tensor({784}, data).reshape({4, 7, 7, 4});
    for (std::size_t i1 = 0; i1 < 4; ++i1)
        for (std::size_t i2 = 0; i2 < 7; ++i2)
            for (std::size_t i3 = 0; i3 < 7; ++i3)
                for (std::size_t i4 = 0; i4 < 4; ++i4) {
                    const std::size_t idx[] = {i1, i2, i3, i4};
                    CHECK(t.at(idx) == double(i1 * 196 + i2 * 28 + i3 * 4 + i4));
                }
}

TEST_CASE("permute")
{
    std::mt19937_64 rng(7);
    Tensor t = oracle::random_tensor({2, 3, 4}, rng);

    SUBCASE("identity permutation is bitwise equal") {
        CHECK(t.permute({0, 1, 2}).data() == t.data());
    }
    SUBCASE("transpose of a matrix") {
        Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
        Tensor mt = m.permute({1, 0});
        CHECK(mt.shape() == std::vector<std::size_t>{3, 2});
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                const std::size_t a[] = {i, j}, b[] = {j, i};
                CHECK(m.at(a) == mt.at(b));
            }
    }
    SUBCASE("permute then inverse permute round trips") {
        Tensor p = t.permute({2, 0, 1});
        Tensor back = p.permute({1, 2, 0});
        CHECK(back.shape() == t.shape());
        CHECK(back.data() == t.data());
    }
    SUBCASE("invalid permutations throw") {
        CHECK_THROWS_AS(t.permute({0, 1}), AxisError);
        CHECK_THROWS_AS(t.permute({0, 1, 1}), AxisError);
        CHECK_THROWS_AS(t.permute({0, 1, 3}), AxisError);
    }
}

TEST_CASE("contract basics")
{
    SUBCASE("matrix-vector product") {
        Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
        Tensor v({3}, {1, 1, 2});
        Tensor y = contract(m, v, {1}, {0});
        CHECK(y.shape() == std::vector<std::size_t>{2});
        CHECK(y[0] == doctest::Approx(9.0));
        CHECK(y[1] == doctest::Approx(21.0));
    }
    SUBCASE("contraction with the identity reorders axes only") {
        std::mt19937_64 rng(3);
        Tensor t = oracle::random_tensor({3, 4}, rng);
        Tensor eye({4, 4});
        for (std::size_t i = 0; i < 4; ++i)
            eye[i * 4 + i] = 1.0;
        Tensor out = contract(t, eye, {1}, {0});
        CHECK(out.shape() == t.shape());
        for (std::size_t i = 0; i < t.size(); ++i)
            CHECK(out[i] == doctest::Approx(t[i]).epsilon(1e-14));
    }
    SUBCASE("extent mismatch throws") {
        Tensor a({2, 3}), b({4, 2});
        CHECK_THROWS_AS(contract(a, b, {1}, {0}), ShapeError);
    }
}

TEST_CASE("contract matches the loop-nest oracle")
{
    std::mt19937_64 rng(11);

    SUBCASE("3x4x5 against 5x4 over two axis pairs") {
        Tensor a = oracle::random_tensor({3, 4, 5}, rng);
        Tensor b = oracle::random_tensor({5, 4}, rng);
        Tensor got = contract(a, b, {2, 1}, {0, 1});
        Tensor want = oracle::contract(a, b, {2, 1}, {0, 1});
        REQUIRE(got.shape() == want.shape());
        CHECK(oracle::max_abs_diff(got.data(), want.data()) < 1e-12);
    }

    SUBCASE("random shapes with up to 6 total axes and extents <= 5") {
        std::uniform_int_distribution<std::size_t> extent(1, 5);
        for (int trial = 0; trial < 60; ++trial) {
            std::uniform_int_distribution<std::size_t> ra_d(1, 3);
            const std::size_t ra = ra_d(rng), rb = ra_d(rng);
            std::vector<std::size_t> sa(ra), sb(rb);
            for (auto& e : sa)
                e = extent(rng);
            for (auto& e : sb)
                e = extent(rng);
            // contract one random axis pair (force matching extents)
            std::uniform_int_distribution<std::size_t> pick_a(0, ra - 1), pick_b(0, rb - 1);
            const std::size_t xa = pick_a(rng), xb = pick_b(rng);
            sb[xb] = sa[xa];
            Tensor a = oracle::random_tensor(sa, rng);
            Tensor b = oracle::random_tensor(sb, rng);
            Tensor got = contract(a, b, {xa}, {xb});
            Tensor want = oracle::contract(a, b, {xa}, {xb});
            REQUIRE(got.shape() == want.shape());
            CHECK(oracle::max_abs_diff(got.data(), want.data()) < 1e-12);
        }
    }
}

TEST_CASE("matricize")
{
    SUBCASE("rank-2 with natural axes is itself") {
        Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
        Tensor out = m.matricize({0}, {1});
        CHECK(out.shape() == m.shape());
        CHECK(out.data() == m.data());
    }
    SUBCASE("2x2x2 fused rows follow row-major order") {
        std::vector<double> data(8);
        for (std::size_t i = 0; i < 8; ++i)
            data[i] = double(i);
        Tensor t({2, 2, 2}, data);
        Tensor m = t.matricize({0, 1}, {2});
        CHECK(m.shape() == std::vector<std::size_t>{4, 2});
        for (std::size_t i0 = 0; i0 < 2; ++i0)
            for (std::size_t i1 = 0; i1 < 2; ++i1)
                for (std::size_t i2 = 0; i2 < 2; ++i2) {
                    const std::size_t a[] = {i0, i1, i2};
                    const std::size_t b[] = {2 * i0 + i1, i2};
                    CHECK(t.at(a) == m.at(b));
                }
    }
    SUBCASE("FC2 first-layer operator matricizes to 16 x 12544") {
        // M^{4,4,4,4}_{4,7,7,4}: 2n-indexed shape [4,4,4,4, 4,7,7,4]
        Tensor w({4, 4, 4, 4, 4, 7, 7, 4});
        Tensor m = w.matricize({4, 0}, {5, 6, 7, 1, 2, 3});
        CHECK(m.shape() == std::vector<std::size_t>{16, 12544});
    }
    SUBCASE("axis overlap or omission throws") {
        Tensor t({2, 2, 2});
        CHECK_THROWS_AS(t.matricize({0, 1}, {1, 2}), AxisError);
        CHECK_THROWS_AS(t.matricize({0}, {2}), AxisError);
    }
}

TEST_SUITE_END();
