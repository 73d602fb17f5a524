// Compares the optimized kernels against their serial/naive reference
// implementations: bitmask coverage vs set scanning, OpenMP exact
// enumeration vs the serial loop, and the K*E scaling of ensemble
// evaluation.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mclip/coverage.hpp"
#include "mclip/exact.hpp"
#include "mclip/inference.hpp"
#include "mclip/instance.hpp"
#include "mclip/policy.hpp"
#include "mclip/trainer.hpp"

using namespace mclip;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bench_coverage() {
    GenSpec spec{.n = 100, .p = 15, .r = 5, .radius = 0.2, .seed = 99, .count = 1};
    const Instance inst = generate_uniform_instance(spec, 0);
    const CoverageKernel kernel(inst);
    std::vector<int> open;
    for (int j = 0; j < inst.p; ++j) open.push_back(j * 6);

    const int reps = 200000;
    volatile long sink = 0;

    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) sink += kernel.coverage(open);
    const double fast = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) sink += coverage_naive(inst, open);
    const double naive = seconds_since(t0);

    std::printf("coverage (n=100, p=15):      bitmask %8.1f ns/call   naive %8.1f ns/call   x%.1f\n",
                fast / reps * 1e9, naive / reps * 1e9, naive / fast);
}

void bench_exact() {
    GenSpec spec{.n = 24, .p = 5, .r = 2, .radius = 0.25, .seed = 7, .count = 8};
    std::vector<Instance> insts;
    for (int i = 0; i < spec.count; ++i) insts.push_back(generate_uniform_instance(spec, i));

    auto t0 = std::chrono::steady_clock::now();
    long obj_serial = 0;
    for (const auto& in : insts) obj_serial += exact_solve_serial(in).eval.obj;
    const double serial = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    long obj_parallel = 0;
    for (const auto& in : insts) obj_parallel += exact_solve(in).eval.obj;
    const double parallel = seconds_since(t0);

#ifdef _OPENMP
    const int threads = omp_get_max_threads();
#else
    const int threads = 1;
#endif
    std::printf("exact solve (n=24, p=5, r=2): serial %7.1f ms/inst   omp(%d thr) %7.1f ms/inst   x%.2f%s\n",
                serial / insts.size() * 1e3, threads, parallel / insts.size() * 1e3,
                serial / parallel, obj_serial == obj_parallel ? "" : "  MISMATCH");
}

void bench_ensemble_scaling() {
    GenSpec spec{.n = 20, .p = 4, .r = 1, .radius = 0.3, .seed = 3, .count = 1};
    const Instance inst = generate_uniform_instance(spec, 0);
    const PolicyDims dims{.d = 32, .h = 4, .L = 2, .f = 32};
    const PolicyParams loc = init_params(Role::Location, dims, 1);
    const PolicyParams intd = init_params(Role::Interdiction, dims, 2);

    std::printf("ensemble evaluation scaling (should be ~linear in K*E):\n");
    double base = 0.0;
    for (const auto [k, e] : std::vector<std::pair<int, int>>{{16, 4}, {32, 8}, {64, 10}, {128, 10}}) {
        InferConfig cfg;
        cfg.k = k;
        cfg.e = e;
        cfg.seed = 11;
        const auto t0 = std::chrono::steady_clock::now();
        const InferResult res = ensemble_infer(inst, loc, intd, cfg);
        const double total = seconds_since(t0);
        if (base == 0.0) base = total / (k * e);
        std::printf("  K=%4d E=%3d  K*E=%5d   total %7.1f ms   per-rollout %6.1f us   vs-linear x%.2f\n",
                    k, e, k * e, total * 1e3, total / (k * e) * 1e6, total / (k * e) / base);
        (void)res;
    }
}

void bench_batch_update() {
    TrainConfig cfg = toy_preset();
    cfg.instances_per_epoch = 256;
    cfg.val_size = 8;
    cfg.out_dir.clear();
    AdversarialTrainer trainer(cfg);
    const auto data = trainer.generate_epoch_data(1);

    auto t0 = std::chrono::steady_clock::now();
    trainer.reinforce_update_location(data, 1, 0);
    const double loc = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    trainer.reinforce_update_interdiction(data, 1, 0);
    const double intd = seconds_since(t0);
#ifdef _OPENMP
    const int threads = omp_get_max_threads();
#else
    const int threads = 1;
#endif
    std::printf("reinforce batch of 256 (%d thr): location %6.1f ms  interdiction %6.1f ms\n",
                threads, loc * 1e3, intd * 1e3);
}

} // namespace

int main() {
    bench_coverage();
    bench_exact();
    bench_ensemble_scaling();
    bench_batch_update();
    return 0;
}
