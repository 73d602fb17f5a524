#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "mclip/baselines.hpp"
#include "mclip/inference.hpp"

#include "fixtures.hpp"

using namespace mclip;

namespace {

struct Setup {
    Instance inst;
    PolicyParams loc, intd;
};

Setup make_setup(int n = 10, int p = 3, int r = 1, std::uint64_t seed = 3) {
    GenSpec spec{.n = n, .p = p, .r = r, .radius = 0.35, .seed = seed, .count = 1};
    PolicyDims dims{.d = 8, .h = 2, .L = 1, .f = 16};
    return {generate_uniform_instance(spec, 0), init_params(Role::Location, dims, 100),
            init_params(Role::Interdiction, dims, 200)};
}

} // namespace

TEST_CASE("K = 1 returns the single sampled candidate regardless of E") {
    const Setup s = make_setup();
    InferConfig cfg;
    cfg.k = 1;
    cfg.e = 1;
    cfg.seed = 5;
    const InferResult one = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    cfg.e = 16;
    const InferResult many = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    CHECK(one.plan.open_sites == many.plan.open_sites);
    CHECK(one.unique_plans.size() == 1);
}

TEST_CASE("winner's pooled reward dominates every other candidate") {
    const Setup s = make_setup(12, 4, 2);
    InferConfig cfg;
    cfg.k = 24;
    cfg.e = 3;
    cfg.seed = 17;
    const InferResult res = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    for (double r : res.unique_rewards) CHECK(res.ensemble_reward >= r);
    // the returned evaluation is internally consistent
    CHECK(res.eval.obj == res.eval.pre + res.eval.post);
    validate_location(s.inst, res.plan);
}

TEST_CASE("fixed seeds make inference deterministic") {
    const Setup s = make_setup(14, 4, 2, 9);
    InferConfig cfg;
    cfg.k = 16;
    cfg.e = 4;
    cfg.seed = 23;
    const InferResult a = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    const InferResult b = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    CHECK(a.plan.open_sites == b.plan.open_sites);
    CHECK(a.ensemble_reward == b.ensemble_reward);
    CHECK(a.unique_rewards == b.unique_rewards);
}

TEST_CASE("role mismatch and split instances are rejected") {
    const Setup s = make_setup();
    InferConfig cfg;
    CHECK_THROWS_AS(ensemble_infer(s.inst, s.intd, s.loc, cfg), std::invalid_argument);
    CHECK_THROWS_AS(greedy_infer(s.inst, s.intd, s.loc), std::invalid_argument);

    Instance split = s.inst;
    split.customers.push_back({0.5, 0.5});
    split.rebuild_neighbor_sets();
    CHECK_THROWS_AS(ensemble_infer(split, s.loc, s.intd, cfg), std::invalid_argument);
}

TEST_CASE("large-E ensemble reward converges to the enumerated expectation") {
    // Fix one candidate plan (K=1) and enumerate the interdiction policy's
    // distribution over single hits to get the exact expected reward.
    const Setup s = make_setup(8, 3, 1, 21);
    const CoverageKernel kernel(s.inst);

    InferConfig cfg;
    cfg.k = 1;
    cfg.e = 4096;
    cfg.seed = 31;
    const InferResult res = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    const std::vector<int>& open = res.plan.open_sites;
    const int pre = kernel.coverage(open);

    PolicyEvaluator intd_eval(s.intd);
    double expected = 0.0, second_moment = 0.0;
    for (int hit : open) {
        const double prob =
            std::exp(intd_eval.log_prob_of(s.inst, kernel, &open, std::vector<int>{hit}));
        const double reward = pre + kernel.coverage_minus(open, std::vector<int>{hit});
        expected += prob * reward;
        second_moment += prob * reward * reward;
    }
    const double stderr_bound =
        std::sqrt(std::max(0.0, second_moment - expected * expected) / cfg.e);
    CHECK(std::abs(res.ensemble_reward - expected) <= 3.0 * stderr_bound + 1e-9);
}

TEST_CASE("greedy heuristic surrogate mode scores candidates without the policy") {
    const Setup s = make_setup(12, 4, 2, 33);
    InferConfig cfg;
    cfg.k = 8;
    cfg.e = 1;
    cfg.seed = 3;
    cfg.surrogate = InferConfig::Surrogate::GreedyHeuristic;
    const InferResult res = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    validate_location(s.inst, res.plan);
    // heuristic reward of the winner equals pre + greedy post, recompute it
    const CoverageKernel kernel(s.inst);
    const auto hit = greedy_interdiction(s.inst, res.plan);
    const double expect = kernel.coverage(res.plan.open_sites) +
                          kernel.coverage_minus(res.plan.open_sites, hit.hit_sites);
    CHECK(res.ensemble_reward == doctest::Approx(expect));
}

TEST_CASE("r = 0 instances score both phases as double pre-coverage") {
    const Setup s = make_setup(9, 3, 0, 41);
    InferConfig cfg;
    cfg.k = 4;
    cfg.e = 2;
    const InferResult res = ensemble_infer(s.inst, s.loc, s.intd, cfg);
    CHECK(res.eval.post == res.eval.pre);
    CHECK(res.ensemble_reward == doctest::Approx(2.0 * res.eval.pre));
}
