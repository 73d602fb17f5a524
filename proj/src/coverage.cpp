#include "mclip/coverage.hpp"

#include <algorithm>
#include <bit>
#include <iostream>
#include <stdexcept>

namespace mclip {

void validate_location(const Instance& inst, const LocationPlan& loc) {
    if (static_cast<int>(loc.open_sites.size()) != inst.p)
        throw std::invalid_argument("location plan must open exactly p sites");
    for (std::size_t i = 0; i < loc.open_sites.size(); ++i) {
        const int j = loc.open_sites[i];
        if (j < 0 || j >= inst.num_sites())
            throw std::invalid_argument("location plan: site index out of range");
        if (i > 0 && loc.open_sites[i - 1] >= j)
            throw std::invalid_argument("location plan: sites must be sorted and duplicate-free");
    }
}

void validate_interdiction(const Instance& inst, const LocationPlan& loc,
                           const InterdictionPlan& hit) {
    if (static_cast<int>(hit.hit_sites.size()) != inst.r)
        throw std::invalid_argument("interdiction plan must hit exactly r sites");
    for (std::size_t i = 0; i < hit.hit_sites.size(); ++i) {
        if (i > 0 && hit.hit_sites[i - 1] >= hit.hit_sites[i])
            throw std::invalid_argument("interdiction plan: sites must be sorted and duplicate-free");
        if (!std::binary_search(loc.open_sites.begin(), loc.open_sites.end(), hit.hit_sites[i]))
            throw std::invalid_argument("interdiction plan: hit site is not an open site");
    }
}

CoverageKernel::CoverageKernel(const Instance& inst)
    : n_customers_(inst.num_customers()),
      n_sites_(inst.num_sites()),
      words_((inst.num_customers() + 63) / 64) {
    masks_.assign(static_cast<std::size_t>(n_sites_) * words_, 0);
    for (int i = 0; i < n_customers_; ++i) {
        for (int j : inst.neighbor_sets[i]) {
            masks_[static_cast<std::size_t>(j) * words_ + i / 64] |= 1ULL << (i % 64);
        }
    }
}

void CoverageKernel::union_into(std::span<const int> open, std::uint64_t* acc) const {
    for (int j : open) {
        const std::uint64_t* m = site_mask(j);
        for (int w = 0; w < words_; ++w) acc[w] |= m[w];
    }
}

int CoverageKernel::coverage(std::span<const int> open) const {
    if (words_ == 1) {
        std::uint64_t acc = 0;
        for (int j : open) acc |= masks_[static_cast<std::size_t>(j)];
        return std::popcount(acc);
    }
    int total = 0;
    std::uint64_t acc[16]; // enough for 1024 customers without a heap hit
    if (words_ <= 16) {
        std::fill(acc, acc + words_, 0);
        union_into(open, acc);
        for (int w = 0; w < words_; ++w) total += std::popcount(acc[w]);
        return total;
    }
    std::vector<std::uint64_t> big(words_, 0);
    union_into(open, big.data());
    for (int w = 0; w < words_; ++w) total += std::popcount(big[w]);
    return total;
}

int CoverageKernel::coverage_minus(std::span<const int> open, std::span<const int> hit) const {
    if (hit.empty()) return coverage(open);
    if (words_ == 1) {
        std::uint64_t acc = 0;
        for (int j : open) {
            if (std::find(hit.begin(), hit.end(), j) == hit.end())
                acc |= masks_[static_cast<std::size_t>(j)];
        }
        return std::popcount(acc);
    }
    std::vector<std::uint64_t> big(words_, 0);
    for (int j : open) {
        if (std::find(hit.begin(), hit.end(), j) != hit.end()) continue;
        const std::uint64_t* m = site_mask(j);
        for (int w = 0; w < words_; ++w) big[w] |= m[w];
    }
    int total = 0;
    for (int w = 0; w < words_; ++w) total += std::popcount(big[w]);
    return total;
}

int coverage_naive(const Instance& inst, std::span<const int> open) {
    int covered = 0;
    for (const auto& ni : inst.neighbor_sets) {
        bool hit = false;
        for (int j : ni) {
            if (std::find(open.begin(), open.end(), j) != open.end()) { hit = true; break; }
        }
        covered += hit ? 1 : 0;
    }
    return covered;
}

int coverage_minus_naive(const Instance& inst, std::span<const int> open,
                         std::span<const int> hit) {
    int covered = 0;
    for (const auto& ni : inst.neighbor_sets) {
        bool c = false;
        for (int j : ni) {
            const bool is_open = std::find(open.begin(), open.end(), j) != open.end();
            const bool is_hit = std::find(hit.begin(), hit.end(), j) != hit.end();
            if (is_open && !is_hit) { c = true; break; }
        }
        covered += c ? 1 : 0;
    }
    return covered;
}

int pre_interdiction_coverage(const Instance& inst, const LocationPlan& loc) {
    validate_location(inst, loc);
    CoverageKernel kernel(inst);
    return kernel.coverage(loc.open_sites);
}

int post_interdiction_coverage(const Instance& inst, const LocationPlan& loc,
                               const InterdictionPlan& hit) {
    validate_location(inst, loc);
    validate_interdiction(inst, loc, hit);
    CoverageKernel kernel(inst);
    return kernel.coverage_minus(loc.open_sites, hit.hit_sites);
}

Evaluation evaluate(const Instance& inst, const LocationPlan& loc,
                    const InterdictionPlan& hit) {
    validate_location(inst, loc);
    validate_interdiction(inst, loc, hit);
    CoverageKernel kernel(inst);
    Evaluation ev;
    ev.pre = kernel.coverage(loc.open_sites);
    ev.post = kernel.coverage_minus(loc.open_sites, hit.hit_sites);
    ev.obj = ev.pre + ev.post;
    return ev;
}

double optimality_gap(double obj, double best_obj) {
    if (!(best_obj > 0.0))
        throw std::invalid_argument("optimality_gap: best_obj must be positive");
    if (obj > best_obj) {
        std::cerr << "[mclip] warning: objective " << obj << " beats reference best "
                  << best_obj << "; clamping gap to 0\n";
        return 0.0;
    }
    return (best_obj - obj) / best_obj;
}

} // namespace mclip
