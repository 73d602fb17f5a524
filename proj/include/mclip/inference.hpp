#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mclip/coverage.hpp"
#include "mclip/exact.hpp"
#include "mclip/instance.hpp"
#include "mclip/policy.hpp"

namespace mclip {

struct InferConfig {
    int k = 128; // sampled location candidates
    int e = 10;  // interdiction rollouts per candidate
    std::uint64_t seed = 0;
    // Re-score the winner with the exact interdiction oracle when C(p,r)
    // fits the pattern cap; otherwise the greedy surrogate is reported.
    bool exact_rescore = true;
    // The ablation arm swaps the learned surrogate for the greedy
    // interdiction heuristic (then e is irrelevant).
    enum class Surrogate { PolicyEnsemble, GreedyHeuristic };
    Surrogate surrogate = Surrogate::PolicyEnsemble;

    void validate() const;
};

struct InferResult {
    LocationPlan plan;
    Evaluation eval;            // winner re-scored (exact when enumerable)
    double ensemble_reward = 0; // surrogate reward R of the winner
    int winner_candidate = 0;   // index of the first candidate that produced the plan
    std::vector<std::vector<int>> unique_plans;
    std::vector<double> unique_rewards; // pooled ensemble reward per unique plan
    double ensemble_seconds = 0.0;      // wall time of the surrogate evaluation stage
};

// Sample K location plans, score each with E sampled interdiction
// rollouts (identical plans merged, their ensembles pooled), return the
// argmax by mean reward (tie: lowest candidate index).
InferResult ensemble_infer(const Instance& inst, const PolicyParams& loc_params,
                           const PolicyParams& intd_params, const InferConfig& cfg,
                           const ExactCaps& caps = {});

// Ablation reference: both agents decoded greedily.
std::pair<LocationPlan, Evaluation> greedy_infer(const Instance& inst,
                                                 const PolicyParams& loc_params,
                                                 const PolicyParams& intd_params,
                                                 const ExactCaps& caps = {},
                                                 bool exact_rescore = true);

} // namespace mclip
