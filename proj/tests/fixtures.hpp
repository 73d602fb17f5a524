#pragma once

#include "mclip/instance.hpp"
#include "mclip/rng.hpp"

// Four points on a line forming two clusters {A,B} and {C,D}; radius 0.15
// links each cluster internally and nothing across. p=2, r=1.
inline mclip::Instance make_t1() {
    mclip::Instance inst;
    inst.customers = {{0.0, 0.0}, {0.1, 0.0}, {0.9, 0.0}, {1.0, 0.0}};
    inst.sites = inst.customers;
    inst.radius = 0.15;
    inst.p = 2;
    inst.r = 1;
    inst.rebuild_neighbor_sets();
    return inst;
}

inline mclip::Instance random_small_instance(mclip::Rng& rng, int max_n = 12, int max_p = 6,
                                             int max_r = 3) {
    mclip::GenSpec spec;
    spec.n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_n - 1)));
    spec.p = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                  std::min(spec.n, max_p))));
    spec.r = static_cast<int>(rng.below(static_cast<std::uint64_t>(
                  std::min(spec.p, max_r) + 1)));
    spec.radius = 0.1 + rng.uniform01() * 0.5;
    spec.seed = rng.next_u64();
    spec.count = 1;
    return mclip::generate_uniform_instance(spec, 0);
}
