#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mclip/coverage.hpp"
#include "mclip/instance.hpp"

namespace mclip {

// Enumeration budgets. Exceeding a cap is an error, never silent truncation.
struct ExactCaps {
    std::int64_t pattern_cap = 1'000'000;     // C(p, r) for the interdiction oracle
    std::int64_t total_cap = 100'000'000;     // C(|J|, p) * C(p, r)
    std::int64_t lp_pattern_cap = 100'000;    // C(p, r) for the single-level export
};

// C(n, k), saturating at cap + 1 as soon as the running product exceeds cap.
std::int64_t binomial_capped(int n, int k, std::int64_t cap);

// Writes the combination of `rank` (lexicographic order over k-subsets of
// {0..n-1}) into `out`. rank must be < C(n, k), and C(n, k) must fit the
// caller's enumeration cap.
void unrank_combination(std::int64_t rank, int n, int k, std::vector<int>& out);

// Advances `comb` (k-subset of {0..n-1}) to its lexicographic successor.
// Returns false when comb was the last combination.
bool next_combination(std::vector<int>& comb, int n);

bool worst_case_enumerable(const Instance& inst, const ExactCaps& caps = {});
bool exact_enumerable(const Instance& inst, const ExactCaps& caps = {});

// argmin over all r-subsets of loc.open_sites of the post-interdiction
// coverage; ties broken by lexicographically smallest hit set.
std::pair<InterdictionPlan, int> worst_case_interdiction(const Instance& inst,
                                                         const LocationPlan& loc,
                                                         const ExactCaps& caps = {});

// Same but reuses a caller-held kernel; `open` must be sorted. Used by the
// enumeration inner loops and solver re-scoring.
int worst_case_post(const CoverageKernel& kernel, std::span<const int> open, int r);

struct ExactResult {
    LocationPlan plan;
    Evaluation eval;
    bool timed_out = false; // set only when a deadline was given; plan is the incumbent
};

// Full bi-level optimum by enumeration over all p-subsets of sites;
// ties broken by lexicographically smallest open set. The parallel
// version splits the rank range over OpenMP threads and reduces with a
// total order (objective desc, rank asc), so its answer is identical to
// the serial reference regardless of scheduling.
ExactResult exact_solve(const Instance& inst, const ExactCaps& caps = {},
                        double deadline_seconds = 0.0);
ExactResult exact_solve_serial(const Instance& inst, const ExactCaps& caps = {},
                               double deadline_seconds = 0.0);

} // namespace mclip
