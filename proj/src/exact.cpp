#include "mclip/exact.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mclip {

std::int64_t binomial_capped(int n, int k, std::int64_t cap) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (c > static_cast<unsigned __int128>(cap)) return cap + 1;
    }
    return static_cast<std::int64_t>(c);
}

void unrank_combination(std::int64_t rank, int n, int k, std::vector<int>& out) {
    out.clear();
    int v = 0;
    for (int remaining = k; remaining > 0; --remaining) {
        while (true) {
            const std::int64_t block = binomial_capped(n - 1 - v, remaining - 1,
                                                       std::numeric_limits<std::int64_t>::max() / 2);
            if (rank < block) { out.push_back(v); ++v; break; }
            rank -= block;
            ++v;
        }
    }
}

bool next_combination(std::vector<int>& comb, int n) {
    const int k = static_cast<int>(comb.size());
    for (int i = k - 1; i >= 0; --i) {
        if (comb[i] < n - k + i) {
            ++comb[i];
            for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
            return true;
        }
    }
    return false;
}

bool worst_case_enumerable(const Instance& inst, const ExactCaps& caps) {
    return binomial_capped(inst.p, inst.r, caps.pattern_cap) <= caps.pattern_cap;
}

bool exact_enumerable(const Instance& inst, const ExactCaps& caps) {
    const std::int64_t locs = binomial_capped(inst.num_sites(), inst.p, caps.total_cap);
    const std::int64_t pats = binomial_capped(inst.p, inst.r, caps.total_cap);
    if (locs > caps.total_cap || pats > caps.total_cap) return false;
    if (pats != 0 && locs > caps.total_cap / pats) return false;
    return true;
}

int worst_case_post(const CoverageKernel& kernel, std::span<const int> open, int r) {
    const int p = static_cast<int>(open.size());
    if (r == 0) return kernel.coverage(open);
    if (r >= p) return 0;

    // Enumerate r-subsets of positions into `open`; union the survivors.
    std::vector<int> positions(r);
    for (int i = 0; i < r; ++i) positions[i] = i;
    std::vector<int> survivors;
    survivors.reserve(p - r);
    int best = std::numeric_limits<int>::max();
    do {
        survivors.clear();
        int hit_idx = 0;
        for (int i = 0; i < p; ++i) {
            if (hit_idx < r && positions[hit_idx] == i) { ++hit_idx; continue; }
            survivors.push_back(open[i]);
        }
        best = std::min(best, kernel.coverage(survivors));
        if (best == 0) break;
    } while (next_combination(positions, p));
    return best;
}

std::pair<InterdictionPlan, int> worst_case_interdiction(const Instance& inst,
                                                         const LocationPlan& loc,
                                                         const ExactCaps& caps) {
    validate_location(inst, loc);
    if (!worst_case_enumerable(inst, caps))
        throw std::runtime_error("scale too large for exact oracle: C(p,r) exceeds pattern cap");

    CoverageKernel kernel(inst);
    const int p = inst.p;
    const int r = inst.r;

    InterdictionPlan best_hit;
    if (r == 0) return {best_hit, kernel.coverage(loc.open_sites)};

    std::vector<int> positions(r);
    for (int i = 0; i < r; ++i) positions[i] = i;
    std::vector<int> survivors;
    survivors.reserve(p - r);
    int best = std::numeric_limits<int>::max();
    // Lexicographic enumeration + strict improvement keeps the first
    // (lexicographically smallest) minimizer.
    do {
        survivors.clear();
        int hit_idx = 0;
        for (int i = 0; i < p; ++i) {
            if (hit_idx < r && positions[hit_idx] == i) { ++hit_idx; continue; }
            survivors.push_back(loc.open_sites[i]);
        }
        const int post = kernel.coverage(survivors);
        if (post < best) {
            best = post;
            best_hit.hit_sites.clear();
            for (int pos : positions) best_hit.hit_sites.push_back(loc.open_sites[pos]);
        }
    } while (next_combination(positions, p));
    return {best_hit, best};
}

namespace {

ExactResult exact_solve_impl(const Instance& inst, const ExactCaps& caps,
                             double deadline_seconds, bool parallel) {
    inst.validate();
    if (!exact_enumerable(inst, caps))
        throw std::runtime_error(
            "scale too large for exact oracle: C(|J|,p)*C(p,r) exceeds total cap");

    const int n_sites = inst.num_sites();
    const int p = inst.p;
    const int r = inst.r;
    const std::int64_t total = binomial_capped(n_sites, p, caps.total_cap);

    CoverageKernel kernel(inst);
    const auto start = std::chrono::steady_clock::now();
    bool timed_out = false;

    // Winner under (objective desc, rank asc); rank order equals the
    // lexicographic order of open sets, so the reduction is deterministic.
    std::int64_t best_rank = -1;
    int best_obj = -1;

    const std::int64_t chunk = 4096;
#ifdef _OPENMP
    const bool run_parallel = parallel;
#else
    const bool run_parallel = false;
    (void)parallel;
#endif

    if (!run_parallel) {
        std::vector<int> open(p);
        for (int i = 0; i < p; ++i) open[i] = i;
        std::int64_t rank = 0;
        do {
            const int pre = kernel.coverage(open);
            const int obj = pre + worst_case_post(kernel, open, r);
            if (obj > best_obj) { best_obj = obj; best_rank = rank; }
            ++rank;
            if (deadline_seconds > 0.0 && (rank % chunk) == 0) {
                const double elapsed =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                if (elapsed > deadline_seconds) { timed_out = true; break; }
            }
        } while (next_combination(open, n_sites));
    } else {
#ifdef _OPENMP
        struct Best { int obj = -1; std::int64_t rank = -1; };
        const int max_threads = omp_get_max_threads();
        std::vector<Best> bests(max_threads);
        bool stop = false;
#pragma omp parallel
        {
            const int tid = omp_get_thread_num();
            std::vector<int> open(p);
            Best local;
#pragma omp for schedule(static)
            for (std::int64_t base = 0; base < total; base += chunk) {
                bool stopped;
#pragma omp atomic read
                stopped = stop;
                if (stopped) continue;
                const std::int64_t end = std::min(total, base + chunk);
                unrank_combination(base, n_sites, p, open);
                for (std::int64_t rank = base; rank < end; ++rank) {
                    const int pre = kernel.coverage(open);
                    const int obj = pre + worst_case_post(kernel, open, r);
                    if (obj > local.obj || (obj == local.obj && rank < local.rank)) {
                        local.obj = obj;
                        local.rank = rank;
                    }
                    if (rank + 1 < end) next_combination(open, n_sites);
                }
                if (deadline_seconds > 0.0) {
                    const double elapsed =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    if (elapsed > deadline_seconds) {
#pragma omp atomic write
                        stop = true;
                    }
                }
            }
            bests[tid] = local;
        }
        timed_out = stop;
        for (const Best& b : bests) {
            if (b.rank < 0) continue;
            if (b.obj > best_obj || (b.obj == best_obj && b.rank < best_rank)) {
                best_obj = b.obj;
                best_rank = b.rank;
            }
        }
#endif
    }

    if (best_rank < 0) throw std::runtime_error("exact oracle found no candidate before deadline");

    ExactResult res;
    res.timed_out = timed_out;
    unrank_combination(best_rank, n_sites, p, res.plan.open_sites);
    res.eval.pre = kernel.coverage(res.plan.open_sites);
    res.eval.post = worst_case_post(kernel, res.plan.open_sites, r);
    res.eval.obj = res.eval.pre + res.eval.post;
    return res;
}

} // namespace

ExactResult exact_solve(const Instance& inst, const ExactCaps& caps, double deadline_seconds) {
    return exact_solve_impl(inst, caps, deadline_seconds, true);
}

ExactResult exact_solve_serial(const Instance& inst, const ExactCaps& caps,
                               double deadline_seconds) {
    return exact_solve_impl(inst, caps, deadline_seconds, false);
}

} // namespace mclip
