#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mclip/instance.hpp"

namespace mclip {

// Upper decision: exactly p distinct site indices, kept sorted ascending.
struct LocationPlan {
    std::vector<int> open_sites;
};

// Lower decision: exactly r distinct site indices, sorted ascending,
// all of them open in the plan under attack.
struct InterdictionPlan {
    std::vector<int> hit_sites;
};

// pre: customers covered before interdiction; post: after; obj = pre + post.
struct Evaluation {
    int pre = 0;
    int post = 0;
    int obj = 0;

    bool operator==(const Evaluation&) const = default;
};

void validate_location(const Instance& inst, const LocationPlan& loc);
void validate_interdiction(const Instance& inst, const LocationPlan& loc,
                           const InterdictionPlan& hit);

// Per-site customer bitmasks. Coverage of a site set is the popcount of
// the union of its masks. This is the fast kernel behind every solver;
// the *_naive functions below are the serial reference used to test it.
class CoverageKernel {
public:
    explicit CoverageKernel(const Instance& inst);

    int num_customers() const { return n_customers_; }
    int num_sites() const { return n_sites_; }
    int words() const { return words_; }

    const std::uint64_t* site_mask(int j) const { return masks_.data() + static_cast<std::size_t>(j) * words_; }

    // Customers covered by the union of `open`.
    int coverage(std::span<const int> open) const;

    // Customers covered by `open` minus `hit`. `hit` must be a subset of
    // `open`; membership is by value, duplicates are not expected.
    int coverage_minus(std::span<const int> open, std::span<const int> hit) const;

    // ORs the masks of `open` into `acc` (acc must hold words() entries,
    // caller zeroes it). Building block for custom enumeration loops.
    void union_into(std::span<const int> open, std::uint64_t* acc) const;

private:
    int n_customers_ = 0;
    int n_sites_ = 0;
    int words_ = 0;
    std::vector<std::uint64_t> masks_;
};

// Straightforward set-based evaluation, no bitmasks. Kept as the
// reference implementation for kernel tests and benchmarks.
int coverage_naive(const Instance& inst, std::span<const int> open);
int coverage_minus_naive(const Instance& inst, std::span<const int> open,
                         std::span<const int> hit);

// |{ i : N_i intersects open_sites }|.
int pre_interdiction_coverage(const Instance& inst, const LocationPlan& loc);

// |{ i : N_i intersects open_sites \ hit_sites }|.
int post_interdiction_coverage(const Instance& inst, const LocationPlan& loc,
                               const InterdictionPlan& hit);

Evaluation evaluate(const Instance& inst, const LocationPlan& loc,
                    const InterdictionPlan& hit);

// (best_obj - obj) / best_obj as a fraction; reporting multiplies by 100.
// obj > best_obj clamps to 0 with a warning on stderr. best_obj <= 0 throws.
double optimality_gap(double obj, double best_obj);

} // namespace mclip
