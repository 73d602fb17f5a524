#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mclip/coverage.hpp"
#include "mclip/rng.hpp"

#include "fixtures.hpp"

using namespace mclip;

TEST_CASE("T1 pre-interdiction coverage") {
    const Instance t1 = make_t1();
    CHECK(pre_interdiction_coverage(t1, {{0, 2}}) == 4);
    CHECK(pre_interdiction_coverage(t1, {{0, 1}}) == 2);
}

TEST_CASE("T1 post-interdiction coverage") {
    const Instance t1 = make_t1();
    CHECK(post_interdiction_coverage(t1, {{0, 2}}, {{0}}) == 2);
    CHECK(post_interdiction_coverage(t1, {{0, 1}}, {{0}}) == 2);
}

TEST_CASE("T1 evaluate") {
    const Instance t1 = make_t1();
    CHECK(evaluate(t1, {{0, 2}}, {{0}}) == Evaluation{4, 2, 6});
    CHECK(evaluate(t1, {{0, 1}}, {{0}}) == Evaluation{2, 2, 4});
}

TEST_CASE("r = 0 means the objective doubles the pre coverage") {
    Instance t1 = make_t1();
    t1.r = 0;
    const Evaluation ev = evaluate(t1, {{0, 2}}, {{}});
    CHECK(ev.post == ev.pre);
    CHECK(ev.obj == 2 * ev.pre);
}

TEST_CASE("r = p destroys everything") {
    Instance t1 = make_t1();
    t1.r = 2;
    CHECK(post_interdiction_coverage(t1, {{0, 2}}, {{0, 2}}) == 0);
}

TEST_CASE("infeasible plans are rejected") {
    const Instance t1 = make_t1();
    CHECK_THROWS_AS(pre_interdiction_coverage(t1, {{0}}), std::invalid_argument);
    CHECK_THROWS_AS(pre_interdiction_coverage(t1, {{0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(pre_interdiction_coverage(t1, {{0, 9}}), std::invalid_argument);
    CHECK_THROWS_AS(post_interdiction_coverage(t1, {{0, 2}}, {{1}}), std::invalid_argument);
    CHECK_THROWS_AS(post_interdiction_coverage(t1, {{0, 2}}, {{0, 2}}), std::invalid_argument);
}

TEST_CASE("optimality gap reproduces the reference fractions") {
    CHECK(optimality_gap(31.2130, 32.5040) == doctest::Approx(0.0397).epsilon(0.01));
    CHECK(optimality_gap(31.6540, 32.5040) == doctest::Approx(0.0262).epsilon(0.01));
    CHECK(optimality_gap(5.0, 5.0) == 0.0);
    CHECK(optimality_gap(6.0, 5.0) == 0.0); // clamps with a warning
    CHECK_THROWS_AS(optimality_gap(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(optimality_gap(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("bitmask kernel agrees with the naive reference") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const Instance inst = random_small_instance(rng, 40, 8, 4);
        CoverageKernel kernel(inst);
        // random open set of size p, random hit subset of size r
        std::vector<int> pool(inst.num_sites());
        for (int j = 0; j < inst.num_sites(); ++j) pool[j] = j;
        std::vector<int> open;
        for (int s = 0; s < inst.p; ++s) {
            const auto pick = static_cast<std::size_t>(rng.below(pool.size()));
            open.push_back(pool[pick]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        std::sort(open.begin(), open.end());
        std::vector<int> opool = open;
        std::vector<int> hit;
        for (int s = 0; s < inst.r; ++s) {
            const auto pick = static_cast<std::size_t>(rng.below(opool.size()));
            hit.push_back(opool[pick]);
            opool.erase(opool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        std::sort(hit.begin(), hit.end());

        CHECK(kernel.coverage(open) == coverage_naive(inst, open));
        CHECK(kernel.coverage_minus(open, hit) == coverage_minus_naive(inst, open, hit));
    }
}

TEST_CASE("coverage monotonicity properties") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const Instance inst = random_small_instance(rng, 20, 6, 3);
        CoverageKernel kernel(inst);
        std::vector<int> open;
        for (int j = 0; j < inst.num_sites(); ++j)
            if (rng.uniform01() < 0.4) open.push_back(j);

        // adding a site never decreases coverage
        const int before = kernel.coverage(open);
        for (int j = 0; j < inst.num_sites(); ++j) {
            if (std::binary_search(open.begin(), open.end(), j)) continue;
            std::vector<int> grown = open;
            grown.insert(std::upper_bound(grown.begin(), grown.end(), j), j);
            CHECK(kernel.coverage(grown) >= before);
        }

        // removing a hit site never decreases post coverage
        if (!open.empty()) {
            std::vector<int> hit;
            for (int j : open)
                if (rng.uniform01() < 0.5) hit.push_back(j);
            const int post = kernel.coverage_minus(open, hit);
            if (!hit.empty()) {
                std::vector<int> fewer(hit.begin(), hit.end() - 1);
                CHECK(kernel.coverage_minus(open, fewer) >= post);
            }
            // post equals pre of the surviving set
            std::vector<int> survivors;
            std::set_difference(open.begin(), open.end(), hit.begin(), hit.end(),
                                std::back_inserter(survivors));
            CHECK(kernel.coverage(survivors) == post);
        }
    }
}
