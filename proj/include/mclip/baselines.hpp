#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "mclip/coverage.hpp"
#include "mclip/exact.hpp"
#include "mclip/instance.hpp"

namespace mclip {

// Knobs for the four metaheuristics. Defaults are conventional; every
// value is overridable from the CLI / suite file.
struct MetaConfig {
    enum class Method { SA, TS, GA, VNS };
    Method method = Method::SA;
    int iters = 2000;
    std::uint64_t seed = 0;
    double time_limit_s = 3600.0;

    double sa_cooling = 0.95;
    double sa_t0 = 0.0;      // 0 = auto: median uphill move accepted with prob 0.5
    int ts_tenure = 0;       // 0 = auto: ceil(sqrt(p))
    int ga_pop = 50;
    double ga_crossover = 0.9;
    double ga_mutation = 0.1;
    int vns_kmax = 0;        // 0 = auto: min(p, 5)

    void validate() const;
};

// Iteratively removes the open facility whose removal causes the largest
// drop in current post-interdiction coverage (tie: lowest index), r times.
InterdictionPlan greedy_interdiction(const Instance& inst, const LocationPlan& loc);

// pre + post where post uses the exact worst-case interdiction when
// C(p,r) is within the pattern cap, the greedy surrogate otherwise.
Evaluation robust_evaluate(const Instance& inst, const LocationPlan& loc,
                           const ExactCaps& caps = {});

// Stage 1 solves a plain MCLP (pre-coverage only; exact enumeration when
// C(|J|,p) fits the total cap, greedy otherwise), stage 2 evaluates that
// plan under interdiction.
std::pair<LocationPlan, Evaluation> sequential_locate(const Instance& inst,
                                                      const ExactCaps& caps = {});

enum class Constructive { GM, Stingy, AS };
std::pair<LocationPlan, Evaluation> constructive_locate(const Instance& inst,
                                                        Constructive method,
                                                        const ExactCaps& caps = {});

enum class Improvement { GE, GI };
// init defaults to the GM plan. accepted_moves, when non-null, receives
// the number of accepted swaps (bounded by 2|I|).
std::pair<LocationPlan, Evaluation> improvement_locate(const Instance& inst,
                                                       Improvement method,
                                                       const std::optional<LocationPlan>& init = {},
                                                       const ExactCaps& caps = {},
                                                       int* accepted_moves = nullptr);

std::pair<LocationPlan, Evaluation> metaheuristic_locate(const Instance& inst,
                                                         const MetaConfig& cfg,
                                                         const ExactCaps& caps = {});

} // namespace mclip
