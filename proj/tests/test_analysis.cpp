#include <doctest.h>

#include <cmath>
#include <random>

#include "mponet/analysis.hpp"
#include "oracles.hpp"

using namespace mponet;

namespace {

MpoLayer random_layer(const MpoStructure& s, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.7);
    MpoLayer l;
    l.structure = s;
    for (std::size_t k = 0; k < s.n(); ++k) {
        Tensor core(s.core_shape(k));
        for (double& v : core.data())
            v = gauss(rng);
        l.cores.push_back(std::move(core));
    }
    l.bias = Tensor({s.output_dim()});
    return l;
}

} // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("bond_entropy")
{
    SUBCASE("D=1 product operator has zero entropy") {
        MpoLayer l = random_layer(make_structure({2, 3, 2}, {3, 2, 2}, 1), 3);
        for (std::size_t bond = 1; bond <= 2; ++bond) {
            EntropyReport r = bond_entropy(l, bond);
            CHECK(r.entropy == doctest::Approx(0.0).epsilon(1e-10));
            CHECK(r.spectra[0] == doctest::Approx(1.0).epsilon(1e-10));
        }
    }

    SUBCASE("r equal singular values give S = ln r") {
        // cores built from matching orthonormal bond bases: the matricized
        // operator T_{(i1 j1),(i2 j2)} becomes a permutation matrix, so all
        // four singular values are equal and S = ln 4.
        MpoStructure s = make_structure({2, 2}, {2, 2}, 4);
        MpoLayer l;
        l.structure = s;
        l.cores.push_back(Tensor({1, 2, 2, 4}));
        l.cores.push_back(Tensor({4, 2, 2, 1}));
        // core1[0, j, i, d] = delta(d, 2j+i); core2[d, j, i, 0] = delta(d, 2j+i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < 2; ++i) {
                l.cores[0][(j * 2 + i) * 4 + (2 * j + i)] = 1.0;
                l.cores[1][((2 * j + i) * 2 + j) * 2 + i] = 1.0;
            }
        l.bias = Tensor({4});
        EntropyReport r = bond_entropy(l, 1);
        CHECK(r.entropy == doctest::Approx(std::log(4.0)).epsilon(1e-10));
        CHECK(r.upper_bound == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }

    SUBCASE("spectra normalize to 1 and stay within the bond-count bound") {
        MpoLayer l = random_layer(make_structure({2, 2, 2}, {2, 3, 2}, 3), 17);
        for (std::size_t bond = 1; bond <= 2; ++bond) {
            EntropyReport r = bond_entropy(l, bond);
            double sum = 0.0;
            std::size_t above = 0;
            for (double lam : r.spectra) {
                CHECK(lam >= 0.0);
                sum += lam;
                if (lam > 1e-12)
                    ++above;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(above <= l.structure.D[bond]);
            CHECK(r.entropy >= 0.0);
            CHECK(r.entropy <= r.upper_bound + 1e-9);
        }
    }

    SUBCASE("entropy is scale invariant") {
        MpoLayer l = random_layer(make_structure({2, 2, 2}, {2, 2, 2}, 2), 23);
        EntropyReport before = bond_entropy(l, 2);
        for (double& v : l.cores[0].data())
            v *= -37.5; // scales the whole operator
        EntropyReport after = bond_entropy(l, 2);
        CHECK(after.entropy == doctest::Approx(before.entropy).epsilon(1e-10));
    }

    SUBCASE("FC2-shaped layer: bounds are ln16 / lnD / ln16") {
        MpoLayer l = random_layer(make_structure({4, 4, 4, 4}, {4, 7, 7, 4}, 24), 29);
        EntropyReport b1 = bond_entropy(l, 1);
        EntropyReport b2 = bond_entropy(l, 2);
        EntropyReport b3 = bond_entropy(l, 3);
        CHECK(b1.upper_bound == doctest::Approx(std::log(16.0)));
        CHECK(b2.upper_bound == doctest::Approx(std::log(24.0)));
        CHECK(b3.upper_bound == doctest::Approx(std::log(16.0)));
        CHECK(b1.entropy <= b1.upper_bound + 1e-9);
        CHECK(b2.entropy <= b2.upper_bound + 1e-9);
        CHECK(b3.entropy <= b3.upper_bound + 1e-9);
    }

    SUBCASE("bond out of range") {
        MpoLayer l = random_layer(make_structure({2, 2}, {2, 2}, 2), 31);
        CHECK_THROWS_AS(bond_entropy(l, 0), UsageError);
        CHECK_THROWS_AS(bond_entropy(l, 2), UsageError);
    }
}

TEST_CASE("run_stats")
{
    SUBCASE("constant runs have zero sigma") {
        const double a[] = {0.42, 0.42, 0.42, 0.42, 0.42};
        RunStatistics st = run_stats(a);
        CHECK(st.mean == doctest::Approx(0.42));
        REQUIRE(st.sigma.has_value());
        CHECK(*st.sigma == doctest::Approx(0.0));
    }
    SUBCASE("textbook example [1,2,3]") {
        const double a[] = {1.0, 2.0, 3.0};
        RunStatistics st = run_stats(a);
        CHECK(st.mean == doctest::Approx(2.0));
        CHECK(*st.sigma == doctest::Approx(1.0)); // sum sq = 2, /(m-1) = 1
    }
    SUBCASE("matches a two-pass computation") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> uni(0.9, 1.0);
        std::vector<double> a(7);
        for (double& v : a)
            v = uni(rng);
        RunStatistics st = run_stats(a);
        double mean = 0.0;
        for (double v : a)
            mean += v;
        mean /= double(a.size());
        double ss = 0.0;
        for (double v : a)
            ss += (v - mean) * (v - mean);
        CHECK(st.mean == doctest::Approx(mean).epsilon(1e-15));
        CHECK(*st.sigma == doctest::Approx(std::sqrt(ss / 6.0)).epsilon(1e-15));
    }
    SUBCASE("single run reports no sigma") {
        const double a[] = {0.5};
        RunStatistics st = run_stats(a);
        CHECK(st.mean == doctest::Approx(0.5));
        CHECK_FALSE(st.sigma.has_value());
    }
    SUBCASE("empty list throws") {
        CHECK_THROWS_AS(run_stats({}), UsageError);
    }
}

TEST_SUITE_END();
