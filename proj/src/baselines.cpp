#include "mclip/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "mclip/rng.hpp"

namespace mclip {

void MetaConfig::validate() const {
    if (iters < 0) throw std::invalid_argument("meta config: iters must be nonnegative");
    if (time_limit_s <= 0) throw std::invalid_argument("meta config: time limit must be positive");
    if (sa_cooling <= 0 || sa_cooling > 1) throw std::invalid_argument("meta config: cooling in (0,1]");
    if (ga_pop <= 1) throw std::invalid_argument("meta config: population must exceed 1");
    if (ga_crossover < 0 || ga_crossover > 1) throw std::invalid_argument("meta config: crossover rate in [0,1]");
    if (ga_mutation < 0 || ga_mutation > 1) throw std::invalid_argument("meta config: mutation rate in [0,1]");
    if (ts_tenure < 0 || vns_kmax < 0) throw std::invalid_argument("meta config: negative knob");
}

namespace {

// Greedily removes `removals` sites from the sorted set, each time the one
// whose removal minimizes the remaining coverage (tie: lowest index).
// Returns the surviving sites, still sorted.
std::vector<int> greedy_survivors(const CoverageKernel& kernel, std::vector<int> survivors,
                                  int removals) {
    removals = std::min<int>(removals, static_cast<int>(survivors.size()));
    std::vector<int> reduced;
    reduced.reserve(survivors.size());
    for (int step = 0; step < removals; ++step) {
        std::size_t best_pos = 0;
        int best_post = std::numeric_limits<int>::max();
        for (std::size_t pos = 0; pos < survivors.size(); ++pos) {
            reduced.clear();
            for (std::size_t q = 0; q < survivors.size(); ++q)
                if (q != pos) reduced.push_back(survivors[q]);
            const int post = kernel.coverage(reduced);
            if (post < best_post) { best_post = post; best_pos = pos; }
        }
        survivors.erase(survivors.begin() + static_cast<std::ptrdiff_t>(best_pos));
    }
    return survivors;
}

// pre + post under the greedy interdiction surrogate. Works on partial
// plans too: with |open| <= r everything is removed and post is 0.
int surrogate_estimate(const CoverageKernel& kernel, const std::vector<int>& open, int r) {
    const int pre = kernel.coverage(open);
    if (r == 0) return 2 * pre;
    const auto survivors = greedy_survivors(kernel, open, r);
    return pre + kernel.coverage(survivors);
}

std::vector<int> all_sites(const Instance& inst) {
    std::vector<int> v(inst.num_sites());
    for (int j = 0; j < inst.num_sites(); ++j) v[j] = j;
    return v;
}

void insert_sorted(std::vector<int>& v, int x) {
    v.insert(std::upper_bound(v.begin(), v.end(), x), x);
}

void erase_sorted(std::vector<int>& v, int x) {
    v.erase(std::lower_bound(v.begin(), v.end(), x));
}

// Best single swap (open a -> closed b) under the surrogate estimate.
// first_improving stops at the first strict improvement in (a, b) scan
// order; otherwise scans all and keeps the best (tie: lowest a, then b).
struct SwapMove {
    int out = -1, in = -1, estimate = -1;
};

SwapMove find_swap(const CoverageKernel& kernel, const Instance& inst,
                   const std::vector<int>& open, int current_estimate, bool first_improving) {
    SwapMove best;
    best.estimate = current_estimate;
    std::vector<int> trial;
    for (int a : open) {
        for (int b = 0; b < inst.num_sites(); ++b) {
            if (std::binary_search(open.begin(), open.end(), b)) continue;
            trial = open;
            erase_sorted(trial, a);
            insert_sorted(trial, b);
            const int est = surrogate_estimate(kernel, trial, inst.r);
            if (est > best.estimate) {
                best = {a, b, est};
                if (first_improving) return best;
            }
        }
    }
    return best;
}

} // namespace

InterdictionPlan greedy_interdiction(const Instance& inst, const LocationPlan& loc) {
    validate_location(inst, loc);
    CoverageKernel kernel(inst);
    const auto survivors = greedy_survivors(kernel, loc.open_sites, inst.r);
    InterdictionPlan hit;
    std::set_difference(loc.open_sites.begin(), loc.open_sites.end(),
                        survivors.begin(), survivors.end(), std::back_inserter(hit.hit_sites));
    return hit;
}

Evaluation robust_evaluate(const Instance& inst, const LocationPlan& loc, const ExactCaps& caps) {
    validate_location(inst, loc);
    CoverageKernel kernel(inst);
    Evaluation ev;
    ev.pre = kernel.coverage(loc.open_sites);
    if (worst_case_enumerable(inst, caps)) {
        ev.post = worst_case_post(kernel, loc.open_sites, inst.r);
    } else {
        const auto survivors = greedy_survivors(kernel, loc.open_sites, inst.r);
        ev.post = kernel.coverage(survivors);
    }
    ev.obj = ev.pre + ev.post;
    return ev;
}

std::pair<LocationPlan, Evaluation> sequential_locate(const Instance& inst, const ExactCaps& caps) {
    inst.validate();
    CoverageKernel kernel(inst);
    LocationPlan plan;

    const std::int64_t n_plans = binomial_capped(inst.num_sites(), inst.p, caps.total_cap);
    if (n_plans <= caps.total_cap) {
        // Exact MCLP: maximize pre-coverage alone, lexicographic tie-break.
        std::vector<int> open(inst.p);
        for (int i = 0; i < inst.p; ++i) open[i] = i;
        int best_pre = -1;
        do {
            const int pre = kernel.coverage(open);
            if (pre > best_pre) { best_pre = pre; plan.open_sites = open; }
        } while (next_combination(open, inst.num_sites()));
    } else {
        // Greedy MCLP fallback at scales where enumeration is off the table.
        std::vector<int> open;
        for (int step = 0; step < inst.p; ++step) {
            int best_j = -1, best_pre = -1;
            std::vector<int> trial;
            for (int j = 0; j < inst.num_sites(); ++j) {
                if (std::binary_search(open.begin(), open.end(), j)) continue;
                trial = open;
                insert_sorted(trial, j);
                const int pre = kernel.coverage(trial);
                if (pre > best_pre) { best_pre = pre; best_j = j; }
            }
            insert_sorted(open, best_j);
        }
        plan.open_sites = open;
    }
    return {plan, robust_evaluate(inst, plan, caps)};
}

namespace {

std::vector<int> gm_plan(const CoverageKernel& kernel, const Instance& inst) {
    std::vector<int> open;
    std::vector<int> trial;
    for (int step = 0; step < inst.p; ++step) {
        int best_j = -1, best_est = -1;
        for (int j = 0; j < inst.num_sites(); ++j) {
            if (std::binary_search(open.begin(), open.end(), j)) continue;
            trial = open;
            insert_sorted(trial, j);
            const int est = surrogate_estimate(kernel, trial, inst.r);
            if (est > best_est) { best_est = est; best_j = j; }
        }
        insert_sorted(open, best_j);
    }
    return open;
}

std::vector<int> stingy_plan(const CoverageKernel& kernel, const Instance& inst) {
    std::vector<int> open = all_sites(inst);
    std::vector<int> trial;
    while (static_cast<int>(open.size()) > inst.p) {
        int best_j = -1, best_est = -1;
        for (int j : open) {
            trial.clear();
            for (int q : open)
                if (q != j) trial.push_back(q);
            const int est = surrogate_estimate(kernel, trial, inst.r);
            if (est > best_est) { best_est = est; best_j = j; }
        }
        erase_sorted(open, best_j);
    }
    return open;
}

std::vector<int> as_plan(const CoverageKernel& kernel, const Instance& inst) {
    std::vector<int> open;
    std::vector<int> trial;
    while (static_cast<int>(open.size()) < inst.p) {
        // One greedy addition...
        int best_j = -1, best_est = -1;
        for (int j = 0; j < inst.num_sites(); ++j) {
            if (std::binary_search(open.begin(), open.end(), j)) continue;
            trial = open;
            insert_sorted(trial, j);
            const int est = surrogate_estimate(kernel, trial, inst.r);
            if (est > best_est) { best_est = est; best_j = j; }
        }
        insert_sorted(open, best_j);
        if (static_cast<int>(open.size()) == inst.p) break;
        // ...then one best-improving substitution, if any.
        const int current = surrogate_estimate(kernel, open, inst.r);
        const SwapMove move = find_swap(kernel, inst, open, current, false);
        if (move.out >= 0) {
            erase_sorted(open, move.out);
            insert_sorted(open, move.in);
        }
    }
    return open;
}

} // namespace

std::pair<LocationPlan, Evaluation> constructive_locate(const Instance& inst, Constructive method,
                                                        const ExactCaps& caps) {
    inst.validate();
    CoverageKernel kernel(inst);
    LocationPlan plan;
    switch (method) {
    case Constructive::GM: plan.open_sites = gm_plan(kernel, inst); break;
    case Constructive::Stingy: plan.open_sites = stingy_plan(kernel, inst); break;
    case Constructive::AS: plan.open_sites = as_plan(kernel, inst); break;
    }
    return {plan, robust_evaluate(inst, plan, caps)};
}

std::pair<LocationPlan, Evaluation> improvement_locate(const Instance& inst, Improvement method,
                                                       const std::optional<LocationPlan>& init,
                                                       const ExactCaps& caps, int* accepted_moves) {
    inst.validate();
    CoverageKernel kernel(inst);
    LocationPlan plan;
    if (init.has_value()) {
        validate_location(inst, *init);
        plan = *init;
    } else {
        plan.open_sites = gm_plan(kernel, inst);
    }

    int accepted = 0;
    int current = surrogate_estimate(kernel, plan.open_sites, inst.r);
    while (true) {
        const SwapMove move =
            find_swap(kernel, inst, plan.open_sites, current, method == Improvement::GE);
        if (move.out < 0) break;
        erase_sorted(plan.open_sites, move.out);
        insert_sorted(plan.open_sites, move.in);
        current = move.estimate;
        ++accepted;
    }
    if (accepted_moves != nullptr) *accepted_moves = accepted;
    return {plan, robust_evaluate(inst, plan, caps)};
}

namespace {

std::vector<int> random_plan(const Instance& inst, Rng& rng) {
    std::vector<int> pool = all_sites(inst);
    std::vector<int> open;
    for (int step = 0; step < inst.p; ++step) {
        const auto pick = static_cast<std::size_t>(rng.below(pool.size()));
        open.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(open.begin(), open.end());
    return open;
}

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double limit;
    explicit Clock(double limit_s) : limit(limit_s) {}
    bool expired() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
               limit;
    }
};

std::vector<int> sa_search(const CoverageKernel& kernel, const Instance& inst,
                           const MetaConfig& cfg, Rng& rng, const Clock& clock) {
    std::vector<int> current = random_plan(inst, rng);
    int cur_est = surrogate_estimate(kernel, current, inst.r);
    std::vector<int> best = current;
    int best_est = cur_est;

    const int n_closed = inst.num_sites() - inst.p;
    if (n_closed == 0) return current;

    auto propose = [&](const std::vector<int>& open, std::vector<int>& out) {
        out = open;
        const int a = open[rng.below(open.size())];
        int b_rank = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_closed)));
        int b = -1;
        for (int j = 0; j < inst.num_sites(); ++j) {
            if (std::binary_search(open.begin(), open.end(), j)) continue;
            if (b_rank-- == 0) { b = j; break; }
        }
        erase_sorted(out, a);
        insert_sorted(out, b);
    };

    double temperature = cfg.sa_t0;
    if (temperature <= 0.0) {
        // Auto-scale: median uphill magnitude accepted with probability 1/2.
        std::vector<int> drops;
        std::vector<int> trial;
        for (int s = 0; s < 50; ++s) {
            propose(current, trial);
            const int delta = surrogate_estimate(kernel, trial, inst.r) - cur_est;
            if (delta < 0) drops.push_back(-delta);
        }
        if (drops.empty()) {
            temperature = 1.0;
        } else {
            std::nth_element(drops.begin(), drops.begin() + drops.size() / 2, drops.end());
            temperature = drops[drops.size() / 2] / std::log(2.0);
        }
    }

    std::vector<int> trial;
    const int temp_interval = std::max(1, inst.num_sites());
    for (int it = 0; it < cfg.iters; ++it) {
        propose(current, trial);
        const int est = surrogate_estimate(kernel, trial, inst.r);
        const int delta = est - cur_est;
        if (delta >= 0 || rng.uniform01() < std::exp(delta / std::max(temperature, 1e-12))) {
            current = trial;
            cur_est = est;
            if (cur_est > best_est) { best_est = cur_est; best = current; }
        }
        if ((it + 1) % temp_interval == 0) temperature *= cfg.sa_cooling;
        if ((it & 63) == 0 && clock.expired()) break;
    }
    return best;
}

std::vector<int> ts_search(const CoverageKernel& kernel, const Instance& inst,
                           const MetaConfig& cfg, const Clock& clock) {
    std::vector<int> current = gm_plan(kernel, inst);
    int cur_est = surrogate_estimate(kernel, current, inst.r);
    std::vector<int> best = current;
    int best_est = cur_est;

    const int tenure =
        cfg.ts_tenure > 0 ? cfg.ts_tenure : static_cast<int>(std::ceil(std::sqrt(inst.p)));
    std::vector<int> tabu_until(inst.num_sites(), 0);

    std::vector<int> trial;
    for (int it = 1; it <= cfg.iters; ++it) {
        int move_out = -1, move_in = -1, move_est = -1;
        for (int a : current) {
            for (int b = 0; b < inst.num_sites(); ++b) {
                if (std::binary_search(current.begin(), current.end(), b)) continue;
                trial = current;
                erase_sorted(trial, a);
                insert_sorted(trial, b);
                const int est = surrogate_estimate(kernel, trial, inst.r);
                const bool tabu = tabu_until[a] >= it || tabu_until[b] >= it;
                if (tabu && est <= best_est) continue; // aspiration only past the incumbent
                if (est > move_est) { move_est = est; move_out = a; move_in = b; }
            }
        }
        if (move_out < 0) break; // everything tabu, nothing aspires
        erase_sorted(current, move_out);
        insert_sorted(current, move_in);
        cur_est = move_est;
        tabu_until[move_out] = it + tenure; // don't re-add the removed site
        tabu_until[move_in] = it + tenure;  // don't remove the added site
        if (cur_est > best_est) { best_est = cur_est; best = current; }
        if ((it & 15) == 0 && clock.expired()) break;
    }
    return best;
}

std::vector<int> ga_search(const CoverageKernel& kernel, const Instance& inst,
                           const MetaConfig& cfg, Rng& rng, const Clock& clock) {
    const int pop_size = cfg.ga_pop;
    std::vector<std::vector<int>> pop(pop_size);
    std::vector<int> fitness(pop_size);
    for (int i = 0; i < pop_size; ++i) {
        pop[i] = random_plan(inst, rng);
        fitness[i] = surrogate_estimate(kernel, pop[i], inst.r);
    }
    auto best_index = [&]() {
        int bi = 0;
        for (int i = 1; i < pop_size; ++i)
            if (fitness[i] > fitness[bi]) bi = i;
        return bi;
    };
    std::vector<int> best = pop[best_index()];
    int best_est = fitness[best_index()];

    auto tournament = [&]() {
        const int a = static_cast<int>(rng.below(pop_size));
        const int b = static_cast<int>(rng.below(pop_size));
        return fitness[a] >= fitness[b] ? a : b;
    };

    for (int gen = 0; gen < cfg.iters; ++gen) {
        std::vector<std::vector<int>> next;
        next.reserve(pop_size);
        next.push_back(best); // elitism
        while (static_cast<int>(next.size()) < pop_size) {
            const auto& p1 = pop[tournament()];
            const auto& p2 = pop[tournament()];
            std::vector<int> child;
            if (rng.uniform01() < cfg.ga_crossover) {
                // Uniform set crossover with repair: keep the intersection,
                // fill up from the symmetric difference at random.
                std::set_intersection(p1.begin(), p1.end(), p2.begin(), p2.end(),
                                      std::back_inserter(child));
                std::vector<int> pool;
                std::set_symmetric_difference(p1.begin(), p1.end(), p2.begin(), p2.end(),
                                              std::back_inserter(pool));
                while (static_cast<int>(child.size()) < inst.p) {
                    const auto pick = static_cast<std::size_t>(rng.below(pool.size()));
                    insert_sorted(child, pool[pick]);
                    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
                }
            } else {
                child = p1;
            }
            if (rng.uniform01() < cfg.ga_mutation && inst.num_sites() > inst.p) {
                const int a = child[rng.below(child.size())];
                int b;
                do {
                    b = static_cast<int>(rng.below(static_cast<std::uint64_t>(inst.num_sites())));
                } while (std::binary_search(child.begin(), child.end(), b));
                erase_sorted(child, a);
                insert_sorted(child, b);
            }
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        for (int i = 0; i < pop_size; ++i) {
            fitness[i] = surrogate_estimate(kernel, pop[i], inst.r);
            if (fitness[i] > best_est) { best_est = fitness[i]; best = pop[i]; }
        }
        if (clock.expired()) break;
    }
    return best;
}

std::vector<int> vns_search(const CoverageKernel& kernel, const Instance& inst,
                            const MetaConfig& cfg, Rng& rng, const Clock& clock) {
    const int kmax = cfg.vns_kmax > 0 ? cfg.vns_kmax : std::min(inst.p, 5);
    std::vector<int> incumbent = gm_plan(kernel, inst);
    int inc_est = surrogate_estimate(kernel, incumbent, inst.r);

    auto descend = [&](std::vector<int> open, int est) {
        while (true) {
            const SwapMove move = find_swap(kernel, inst, open, est, true);
            if (move.out < 0) return std::make_pair(open, est);
            erase_sorted(open, move.out);
            insert_sorted(open, move.in);
            est = move.estimate;
        }
    };

    int k = 1;
    for (int it = 0; it < cfg.iters; ++it) {
        if (inst.num_sites() == inst.p) break;
        std::vector<int> shaken = incumbent;
        for (int s = 0; s < k; ++s) {
            const int a = shaken[rng.below(shaken.size())];
            int b;
            do {
                b = static_cast<int>(rng.below(static_cast<std::uint64_t>(inst.num_sites())));
            } while (std::binary_search(shaken.begin(), shaken.end(), b));
            erase_sorted(shaken, a);
            insert_sorted(shaken, b);
        }
        auto [local, est] = descend(shaken, surrogate_estimate(kernel, shaken, inst.r));
        if (est > inc_est) {
            incumbent = std::move(local);
            inc_est = est;
            k = 1;
        } else {
            k = k >= kmax ? 1 : k + 1;
        }
        if (clock.expired()) break;
    }
    return incumbent;
}

} // namespace

std::pair<LocationPlan, Evaluation> metaheuristic_locate(const Instance& inst,
                                                         const MetaConfig& cfg,
                                                         const ExactCaps& caps) {
    inst.validate();
    cfg.validate();
    CoverageKernel kernel(inst);
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(cfg.method)));
    const Clock clock(cfg.time_limit_s);

    LocationPlan plan;
    if (cfg.iters == 0) {
        std::cerr << "[mclip] warning: zero iteration budget, returning initial solution\n";
        switch (cfg.method) {
        case MetaConfig::Method::SA:
        case MetaConfig::Method::GA: plan.open_sites = random_plan(inst, rng); break;
        case MetaConfig::Method::TS:
        case MetaConfig::Method::VNS: plan.open_sites = gm_plan(kernel, inst); break;
        }
        return {plan, robust_evaluate(inst, plan, caps)};
    }

    switch (cfg.method) {
    case MetaConfig::Method::SA: plan.open_sites = sa_search(kernel, inst, cfg, rng, clock); break;
    case MetaConfig::Method::TS: plan.open_sites = ts_search(kernel, inst, cfg, clock); break;
    case MetaConfig::Method::GA: plan.open_sites = ga_search(kernel, inst, cfg, rng, clock); break;
    case MetaConfig::Method::VNS: plan.open_sites = vns_search(kernel, inst, cfg, rng, clock); break;
    }
    return {plan, robust_evaluate(inst, plan, caps)};
}

} // namespace mclip
