#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mclip/baselines.hpp"
#include "mclip/exact.hpp"
#include "mclip/inference.hpp"
#include "mclip/instance.hpp"

namespace mclip {

// A benchmark suite: which methods, which instance family, how many
// instances, and the per-method wall-clock budget.
struct SuiteSpec {
    std::vector<std::string> methods; // exact sequential gm stingy as ge gi sa ts ga vns greedy ensemble
    GenSpec scale;                    // scale.count = number of instances
    double time_limit_s = 3600.0;
    ExactCaps caps;
    std::string loc_ckpt;             // required by greedy / ensemble
    std::string intd_ckpt;
    InferConfig infer;                // K/E/seed for the ensemble method
    int meta_iters_sa = 2000;
    int meta_iters_ts = 200;
    int meta_iters_ga = 100;
    int meta_iters_vns = 100;
    std::uint64_t meta_seed = 1;

    void validate() const;
};

SuiteSpec parse_suite(const std::string& json_text);
SuiteSpec load_suite(const std::string& path);

struct BenchRecord {
    int instance_id = 0;
    std::string method;
    double pre = 0, post = 0, obj = 0;
    double gap = 0;          // fraction vs the per-instance reference
    double wall_seconds = 0; // brackets only the solve call
    std::uint64_t seed = 0;
    std::string config_digest;
    bool timed_out = false;
};

struct BenchSummary {
    std::string method;
    double mean_pre = 0, mean_post = 0, mean_obj = 0;
    double gap = 0; // computed on mean objectives vs the reference mean
    double mean_wall = 0;
    int timeouts = 0;
};

struct BenchResult {
    std::vector<BenchRecord> records;
    std::vector<BenchSummary> summaries;
    std::string reference_note;
    double reference_mean_obj = 0;
};

BenchResult run_benchmark(const SuiteSpec& suite);

std::string records_csv(const std::vector<BenchRecord>& records);
std::string summary_csv(const BenchResult& result);
std::string summary_table(const BenchResult& result);

// One-instance dispatch used by both the harness and the solve CLI.
// Returns (plan evaluation, wall seconds, timed_out).
struct SolveOutcome {
    Evaluation eval;
    LocationPlan plan;
    double wall_seconds = 0;
    bool timed_out = false;
};
SolveOutcome solve_with_method(const Instance& inst, const std::string& method,
                               const SuiteSpec& suite,
                               const PolicyParams* loc_params = nullptr,
                               const PolicyParams* intd_params = nullptr);

} // namespace mclip
