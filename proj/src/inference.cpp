#include "mclip/inference.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mclip/baselines.hpp"

namespace mclip {

void InferConfig::validate() const {
    if (k < 1) throw std::invalid_argument("infer config: sampling size K must be >= 1");
    if (e < 1) throw std::invalid_argument("infer config: ensemble size E must be >= 1");
}

namespace {

void check_params(const Instance& inst, const PolicyParams& loc_params,
                  const PolicyParams& intd_params) {
    if (loc_params.role != Role::Location)
        throw std::invalid_argument("inference: first params must be a location agent");
    if (intd_params.role != Role::Interdiction)
        throw std::invalid_argument("inference: second params must be an interdiction agent");
    if (!inst.colocated())
        throw std::invalid_argument("neural policy requires co-located customers and sites");
}

Evaluation score_plan(const Instance& inst, const CoverageKernel& kernel,
                      const std::vector<int>& open, const ExactCaps& caps, bool exact_rescore,
                      PolicyEvaluator* intd_eval) {
    Evaluation ev;
    ev.pre = kernel.coverage(open);
    if (inst.r == 0) {
        ev.post = ev.pre;
    } else if (exact_rescore && worst_case_enumerable(inst, caps)) {
        ev.post = worst_case_post(kernel, open, inst.r);
    } else if (intd_eval != nullptr) {
        const Rollout reply = intd_eval->rollout(inst, kernel, &open, DecodeMode::Greedy, nullptr);
        ev.post = kernel.coverage_minus(open, reply.sorted_actions());
    } else {
        const auto hit = greedy_interdiction(inst, LocationPlan{open});
        ev.post = kernel.coverage_minus(open, hit.hit_sites);
    }
    ev.obj = ev.pre + ev.post;
    return ev;
}

} // namespace

InferResult ensemble_infer(const Instance& inst, const PolicyParams& loc_params,
                           const PolicyParams& intd_params, const InferConfig& cfg,
                           const ExactCaps& caps) {
    cfg.validate();
    check_params(inst, loc_params, intd_params);
    inst.validate();

    const CoverageKernel kernel(inst);
    const int K = cfg.k;
    const int E = cfg.e;

    // Stage 1: K sampled location candidates, one derived stream each.
    std::vector<std::vector<int>> candidates(K);
#pragma omp parallel
    {
        PolicyEvaluator loc_eval(loc_params);
#pragma omp for schedule(static)
        for (int i = 0; i < K; ++i) {
            Rng stream = Rng::from_stream(mix_seed(cfg.seed, 0x10c), static_cast<std::uint64_t>(i));
            const Rollout tau =
                loc_eval.rollout(inst, kernel, nullptr, DecodeMode::Sampled, &stream);
            candidates[i] = tau.sorted_actions();
        }
    }

    // Merge identical plans; each keeps the E rollouts of every duplicate.
    std::map<std::vector<int>, int> plan_index;
    InferResult res;
    std::vector<std::vector<int>> member_candidates; // candidate ids per unique plan
    for (int i = 0; i < K; ++i) {
        auto [it, fresh] = plan_index.try_emplace(candidates[i],
                                                  static_cast<int>(res.unique_plans.size()));
        if (fresh) {
            res.unique_plans.push_back(candidates[i]);
            member_candidates.emplace_back();
        }
        member_candidates[it->second].push_back(i);
    }
    const int U = static_cast<int>(res.unique_plans.size());
    res.unique_rewards.assign(U, 0.0);

    // Stage 2: surrogate evaluation.
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.surrogate == InferConfig::Surrogate::GreedyHeuristic) {
#pragma omp parallel for schedule(static)
        for (int u = 0; u < U; ++u) {
            const auto& open = res.unique_plans[u];
            std::vector<int> hits;
            if (inst.r > 0) hits = greedy_interdiction(inst, LocationPlan{open}).hit_sites;
            res.unique_rewards[u] =
                kernel.coverage(open) + kernel.coverage_minus(open, hits);
        }
    } else {
        std::vector<double> pooled(U, 0.0);
        std::vector<int> pooled_n(U, 0);
#pragma omp parallel
        {
            PolicyEvaluator intd_eval(intd_params);
#pragma omp for schedule(static)
            for (int u = 0; u < U; ++u) {
                const auto& open = res.unique_plans[u];
                const int pre = kernel.coverage(open);
                double sum = 0.0;
                int count = 0;
                for (int cand : member_candidates[u]) {
                    for (int j = 0; j < E; ++j) {
                        if (inst.r > 0) {
                            Rng stream = Rng::from_stream(
                                mix_seed(cfg.seed, 0x1d),
                                static_cast<std::uint64_t>(cand) * 1000003ULL +
                                    static_cast<std::uint64_t>(j));
                            const Rollout reply = intd_eval.rollout(inst, kernel, &open,
                                                                    DecodeMode::Sampled, &stream);
                            sum += pre + kernel.coverage_minus(open, reply.sorted_actions());
                        } else {
                            sum += 2.0 * pre;
                        }
                        ++count;
                    }
                }
                pooled[u] = sum;
                pooled_n[u] = count;
            }
        }
        for (int u = 0; u < U; ++u) res.unique_rewards[u] = pooled[u] / pooled_n[u];
    }
    res.ensemble_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // argmax by (reward, then first candidate index)
    int best_u = 0;
    for (int u = 1; u < U; ++u) {
        if (res.unique_rewards[u] > res.unique_rewards[best_u] ||
            (res.unique_rewards[u] == res.unique_rewards[best_u] &&
             member_candidates[u].front() < member_candidates[best_u].front())) {
            best_u = u;
        }
    }
    res.plan.open_sites = res.unique_plans[best_u];
    res.ensemble_reward = res.unique_rewards[best_u];
    res.winner_candidate = member_candidates[best_u].front();

    PolicyEvaluator intd_eval(intd_params);
    res.eval = score_plan(inst, kernel, res.plan.open_sites, caps, cfg.exact_rescore, &intd_eval);
    return res;
}

std::pair<LocationPlan, Evaluation> greedy_infer(const Instance& inst,
                                                 const PolicyParams& loc_params,
                                                 const PolicyParams& intd_params,
                                                 const ExactCaps& caps, bool exact_rescore) {
    check_params(inst, loc_params, intd_params);
    inst.validate();
    const CoverageKernel kernel(inst);
    PolicyEvaluator loc_eval(loc_params);
    PolicyEvaluator intd_eval(intd_params);
    const Rollout tau = loc_eval.rollout(inst, kernel, nullptr, DecodeMode::Greedy, nullptr);
    LocationPlan plan{tau.sorted_actions()};
    const Evaluation ev =
        score_plan(inst, kernel, plan.open_sites, caps, exact_rescore, &intd_eval);
    return {plan, ev};
}

} // namespace mclip
