#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "mclip/baselines.hpp"
#include "mclip/bench.hpp"
#include "mclip/exact.hpp"
#include "mclip/inference.hpp"
#include "mclip/instance.hpp"
#include "mclip/lp_model.hpp"
#include "mclip/trainer.hpp"

using namespace mclip;

namespace {

std::string plan_to_string(const LocationPlan& plan) {
    std::ostringstream os;
    for (std::size_t i = 0; i < plan.open_sites.size(); ++i)
        os << (i ? " " : "") << plan.open_sites[i];
    return os.str();
}

int cmd_gen(const GenSpec& spec, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < spec.count; ++i) {
        const Instance inst = generate_uniform_instance(spec, i);
        char name[32];
        std::snprintf(name, sizeof(name), "/inst_%04d.json", i);
        save_instance(inst, out_dir + name);
    }
    std::printf("wrote %d instance(s) to %s\n", spec.count, out_dir.c_str());
    return 0;
}

int cmd_solve(const std::string& instance_path, const std::string& method, SuiteSpec suite,
              bool show_plan) {
    const Instance inst = load_instance(instance_path);
    std::optional<PolicyParams> loc, intd;
    if (method == "greedy" || method == "ensemble") {
        if (suite.loc_ckpt.empty() || suite.intd_ckpt.empty())
            throw std::invalid_argument("neural methods need --loc-ckpt and --intd-ckpt");
        loc = load_checkpoint(suite.loc_ckpt);
        intd = load_checkpoint(suite.intd_ckpt);
    }
    const SolveOutcome out = solve_with_method(inst, method, suite, loc ? &*loc : nullptr,
                                               intd ? &*intd : nullptr);
    std::printf("pre=%d post=%d obj=%d\n", out.eval.pre, out.eval.post, out.eval.obj);
    if (show_plan) std::printf("plan=%s\n", plan_to_string(out.plan).c_str());
    if (out.timed_out) std::printf("timed_out=1\n");
    return 0;
}

int cmd_train(const std::string& preset, int scale, TrainConfig overrides, bool has_epochs,
              bool has_lr, bool has_seed, bool resume) {
    TrainConfig cfg;
    if (preset == "toy") {
        cfg = toy_preset();
    } else if (preset == "paper") {
        cfg = paper_preset(scale);
        std::fprintf(stderr,
                     "warning: the paper preset (%d epochs x %d instances) is not sized for a "
                     "desk machine; expect a very long run\n",
                     cfg.n_epochs, cfg.instances_per_epoch);
    } else {
        throw std::invalid_argument("preset must be toy or paper");
    }
    if (has_epochs) cfg.n_epochs = overrides.n_epochs;
    if (has_lr) cfg.lr = overrides.lr;
    if (has_seed) cfg.master_seed = overrides.master_seed;
    cfg.out_dir = overrides.out_dir;

    AdversarialTrainer trainer(cfg);
    trainer.train(resume);
    if (!cfg.out_dir.empty())
        std::printf("training complete; checkpoints and curves in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_infer(const std::string& instance_path, const std::string& loc_ckpt,
              const std::string& intd_ckpt, InferConfig cfg, bool greedy) {
    const Instance inst = load_instance(instance_path);
    const PolicyParams loc = load_checkpoint(loc_ckpt);
    const PolicyParams intd = load_checkpoint(intd_ckpt);
    if (greedy) {
        const auto [plan, ev] = greedy_infer(inst, loc, intd);
        std::printf("plan=%s\n", plan_to_string(plan).c_str());
        std::printf("pre=%d post=%d obj=%d\n", ev.pre, ev.post, ev.obj);
        return 0;
    }
    const InferResult res = ensemble_infer(inst, loc, intd, cfg);
    std::printf("plan=%s\n", plan_to_string(res.plan).c_str());
    std::printf("pre=%d post=%d obj=%d ensemble_reward=%.4f candidates=%zu\n", res.eval.pre,
                res.eval.post, res.eval.obj, res.ensemble_reward, res.unique_plans.size());
    return 0;
}

int cmd_bench(const std::string& suite_path, const std::string& out_dir) {
    const SuiteSpec suite = load_suite(suite_path);
    const BenchResult result = run_benchmark(suite);
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream rec(out_dir + "/records.csv", std::ios::binary);
        rec << records_csv(result.records);
    }
    {
        std::ofstream sum(out_dir + "/summary.csv", std::ios::binary);
        sum << summary_csv(result);
    }
    std::cout << summary_table(result);
    std::printf("records and summary written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_export_lp(const std::string& instance_path, const std::string& out_path, bool symmetry) {
    const Instance inst = load_instance(instance_path);
    const std::string text = export_single_level_lp(inst, symmetry);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << text;
    std::printf("wrote %s (%zu bytes, symmetry rows %s)\n", out_path.c_str(), text.size(),
                symmetry ? "on" : "off");
    return 0;
}

int cmd_curves(const std::string& train_dir, const std::string& phase, const std::string& out) {
    std::ifstream in(train_dir + "/curves.csv");
    if (!in) throw std::runtime_error("no curves.csv under " + train_dir);
    std::ostringstream filtered;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            filtered << line << '\n';
            first = false;
            continue;
        }
        if (phase.empty() || line.find("," + phase + ",") != std::string::npos)
            filtered << line << '\n';
    }
    if (out.empty()) {
        std::cout << filtered.str();
    } else {
        std::ofstream os(out, std::ios::binary);
        os << filtered.str();
        std::printf("curve data written to %s\n", out.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust facility coverage toolkit (location + interdiction)"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate synthetic instances");
    GenSpec spec;
    std::string gen_out = "instances";
    gen->add_option("--n", spec.n, "node count")->required();
    gen->add_option("--p", spec.p, "facility budget")->required();
    gen->add_option("--r", spec.r, "interdiction budget")->required();
    gen->add_option("--radius", spec.radius, "coverage radius")->required();
    gen->add_option("--seed", spec.seed, "generator seed");
    gen->add_option("--count", spec.count, "number of instances");
    gen->add_option("--out", gen_out, "output directory");

    // solve
    auto* solve = app.add_subcommand("solve", "solve one instance file");
    std::string solve_instance, solve_method = "exact";
    SuiteSpec solve_suite;
    solve_suite.methods = {"exact"};
    bool show_plan = false;
    solve->add_option("--instance", solve_instance, "instance file")->required();
    solve->add_option("--method", solve_method,
                      "exact|sequential|gm|stingy|as|ge|gi|sa|ts|ga|vns|greedy|ensemble");
    solve->add_option("--time-limit", solve_suite.time_limit_s, "seconds");
    solve->add_option("--sa-iters", solve_suite.meta_iters_sa, "");
    solve->add_option("--ts-iters", solve_suite.meta_iters_ts, "");
    solve->add_option("--ga-iters", solve_suite.meta_iters_ga, "");
    solve->add_option("--vns-iters", solve_suite.meta_iters_vns, "");
    solve->add_option("--meta-seed", solve_suite.meta_seed, "");
    solve->add_option("--loc-ckpt", solve_suite.loc_ckpt, "location checkpoint");
    solve->add_option("--intd-ckpt", solve_suite.intd_ckpt, "interdiction checkpoint");
    solve->add_option("--k", solve_suite.infer.k, "ensemble sampling size");
    solve->add_option("--e", solve_suite.infer.e, "ensemble size");
    solve->add_flag("--plan", show_plan, "also print the chosen sites");

    // train
    auto* train = app.add_subcommand("train", "adversarial training");
    std::string preset = "toy";
    int scale = 20;
    TrainConfig overrides;
    bool resume = false;
    train->add_option("--preset", preset, "toy|paper");
    train->add_option("--scale", scale, "paper preset graph size: 20|50|100");
    auto* opt_epochs = train->add_option("--epochs", overrides.n_epochs, "override epoch count");
    auto* opt_lr = train->add_option("--lr", overrides.lr, "override learning rate");
    auto* opt_seed = train->add_option("--seed", overrides.master_seed, "master seed");
    train->add_option("--out", overrides.out_dir, "output directory")->required();
    train->add_flag("--resume", resume, "resume from trainer_state.bin in --out");

    // infer
    auto* infer = app.add_subcommand("infer", "surrogate-based ensemble inference");
    std::string infer_instance, infer_loc, infer_intd;
    InferConfig infer_cfg;
    bool infer_greedy = false;
    infer->add_option("--instance", infer_instance, "instance file")->required();
    infer->add_option("--loc-ckpt", infer_loc, "location checkpoint")->required();
    infer->add_option("--intd-ckpt", infer_intd, "interdiction checkpoint")->required();
    infer->add_option("--k", infer_cfg.k, "sampling size");
    infer->add_option("--e", infer_cfg.e, "ensemble size");
    infer->add_option("--seed", infer_cfg.seed, "sampling seed");
    infer->add_flag("--greedy", infer_greedy, "greedy decoding instead of the ensemble");

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark suite");
    std::string suite_path, bench_out = "bench_out";
    bench->add_option("--suite", suite_path, "suite JSON file")->required();
    bench->add_option("--out", bench_out, "output directory");

    // export-lp
    auto* export_lp = app.add_subcommand("export-lp", "write the single-level model");
    std::string lp_instance, lp_out = "model.lp";
    bool no_symmetry = false;
    export_lp->add_option("--instance", lp_instance, "instance file")->required();
    export_lp->add_option("--out", lp_out, "output LP file");
    export_lp->add_flag("--no-symmetry", no_symmetry, "omit the ordering rows");

    // curves
    auto* curves = app.add_subcommand("curves", "re-emit training curve data");
    std::string curves_dir, curves_phase, curves_out;
    curves->add_option("--train-dir", curves_dir, "training output directory")->required();
    curves->add_option("--phase", curves_phase, "location|interdiction");
    curves->add_option("--out", curves_out, "write to file instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(spec, gen_out);
        if (solve->parsed()) return cmd_solve(solve_instance, solve_method, solve_suite, show_plan);
        if (train->parsed())
            return cmd_train(preset, scale, overrides, opt_epochs->count() > 0,
                             opt_lr->count() > 0, opt_seed->count() > 0, resume);
        if (infer->parsed()) return cmd_infer(infer_instance, infer_loc, infer_intd, infer_cfg,
                                              infer_greedy);
        if (bench->parsed()) return cmd_bench(suite_path, bench_out);
        if (export_lp->parsed()) return cmd_export_lp(lp_instance, lp_out, !no_symmetry);
        if (curves->parsed()) return cmd_curves(curves_dir, curves_phase, curves_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
