#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mclip/coverage.hpp"
#include "mclip/trainer.hpp"

#include "fixtures.hpp"

using namespace mclip;

namespace {

TrainConfig tiny_config(std::uint64_t seed = 11) {
    TrainConfig cfg;
    cfg.data = GenSpec{.n = 6, .p = 2, .r = 1, .radius = 0.35, .seed = 0, .count = 1};
    cfg.dims = PolicyDims{.d = 8, .h = 2, .L = 1, .f = 16};
    cfg.batch_size = 8;
    cfg.n_epochs = 3;
    cfg.instances_per_epoch = 16;
    cfg.val_size = 8;
    cfg.lr = 1e-3;
    cfg.master_seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("adam: zero gradient moves nothing, known gradient moves as expected") {
    std::vector<double> params{1.0, -2.0};
    AdamState state;
    state.reset(2);
    adam_ascend(params, {0.0, 0.0}, state, 0.1, 0.9, 0.999, 1e-8);
    CHECK(params == std::vector<double>{1.0, -2.0});

    // first step with bias correction moves by ~lr in the gradient direction
    state.reset(2);
    params = {1.0, -2.0};
    adam_ascend(params, {1.0, -1.0}, state, 0.1, 0.9, 0.999, 1e-8);
    CHECK(params[0] == doctest::Approx(1.1).epsilon(1e-6));
    CHECK(params[1] == doctest::Approx(-2.1).epsilon(1e-6));
}

TEST_CASE("advantage centering: indistinguishable plans leave parameters bit-identical") {
    TrainConfig cfg = tiny_config();
    cfg.data.radius = 1.5; // every site covers every customer: all rewards equal
    AdversarialTrainer trainer(cfg);
    const std::vector<double> loc_before = trainer.pair().loc.data;
    const std::vector<double> int_before = trainer.pair().intd.data;

    const auto batch = trainer.generate_epoch_data(1);
    const BatchStats ls = trainer.reinforce_update_location(batch, 1, 0);
    CHECK(ls.mean_advantage == 0.0);
    CHECK(trainer.pair().loc.data == loc_before);

    const BatchStats is = trainer.reinforce_update_interdiction(batch, 1, 0);
    CHECK(is.mean_advantage == 0.0);
    CHECK(trainer.pair().intd.data == int_before);
}

TEST_CASE("only the designated agent's parameters change") {
    AdversarialTrainer trainer(tiny_config());
    const auto batch = trainer.generate_epoch_data(1);

    const std::vector<double> int_before = trainer.pair().intd.data;
    const std::vector<double> int_base_before = trainer.pair().intd_base.data;
    trainer.reinforce_update_location(batch, 1, 0);
    CHECK(trainer.pair().intd.data == int_before);
    CHECK(trainer.pair().intd_base.data == int_base_before);

    const std::vector<double> loc_before = trainer.pair().loc.data;
    trainer.reinforce_update_interdiction(batch, 1, 0);
    CHECK(trainer.pair().loc.data == loc_before);
}

TEST_CASE("updates are bit-reproducible and thread-count independent") {
    std::vector<std::vector<double>> results;
    for (int threads : {1, 3}) {
#ifdef _OPENMP
        const int saved = omp_get_max_threads();
        omp_set_num_threads(threads);
#endif
        AdversarialTrainer trainer(tiny_config());
        const auto batch = trainer.generate_epoch_data(1);
        trainer.reinforce_update_location(batch, 1, 0);
        trainer.reinforce_update_interdiction(batch, 1, 0);
        results.push_back(trainer.pair().loc.data);
        results.back().insert(results.back().end(), trainer.pair().intd.data.begin(),
                              trainer.pair().intd.data.end());
#ifdef _OPENMP
        omp_set_num_threads(saved);
#endif
        (void)threads;
    }
    CHECK(results[0] == results[1]);
}

TEST_CASE("r = 0 makes the interdiction phase a no-op") {
    TrainConfig cfg = tiny_config();
    cfg.data.r = 0;
    AdversarialTrainer trainer(cfg);
    const auto batch = trainer.generate_epoch_data(1);
    const std::vector<double> before = trainer.pair().intd.data;
    const BatchStats stats = trainer.reinforce_update_interdiction(batch, 1, 0);
    CHECK(stats.mean_sampled_reward == 0.0);
    CHECK(stats.mean_advantage == 0.0);
    CHECK(trainer.pair().intd.data == before);
}

TEST_CASE("analytic policy-gradient expectation matches finite differences of E[R]") {
    // Enumerable location MDP: all ordered pairs on a 5-node instance.
    GenSpec spec{.n = 5, .p = 2, .r = 1, .radius = 0.35, .seed = 77, .count = 1};
    const Instance inst = generate_uniform_instance(spec, 0);
    const CoverageKernel kernel(inst);
    PolicyDims dims{.d = 8, .h = 2, .L = 1, .f = 16};
    PolicyParams loc = init_params(Role::Location, dims, 5);
    const PolicyParams intd = init_params(Role::Interdiction, dims, 6);
    PolicyEvaluator loc_eval(loc);
    PolicyEvaluator int_eval(intd);

    // deterministic reward of a location sequence (greedy interdiction reply)
    auto reward_of = [&](const std::vector<int>& seq) {
        std::vector<int> open = seq;
        std::sort(open.begin(), open.end());
        const Rollout reply = int_eval.rollout(inst, kernel, &open, DecodeMode::Greedy, nullptr);
        return static_cast<double>(kernel.coverage(open) +
                                   kernel.coverage_minus(open, reply.sorted_actions()));
    };

    std::vector<std::vector<int>> sequences;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            if (a != b) sequences.push_back({a, b});

    auto expected_reward = [&]() {
        double total = 0.0;
        for (const auto& seq : sequences)
            total += std::exp(loc_eval.log_prob_of(inst, kernel, nullptr, seq)) * reward_of(seq);
        return total;
    };

    // analytic: sum over sequences of pi * R * grad(log pi)
    std::vector<double> analytic(loc.data.size(), 0.0);
    for (const auto& seq : sequences) {
        const double pi = std::exp(loc_eval.log_prob_of(inst, kernel, nullptr, seq));
        loc_eval.accumulate_log_prob_grad(inst, kernel, nullptr, seq, pi * reward_of(seq),
                                          analytic);
    }

    const double step = 1e-5;
    for (std::size_t idx = 0; idx < loc.data.size(); idx += 13) {
        const double saved = loc.data[idx];
        loc.data[idx] = saved + step;
        const double up = expected_reward();
        loc.data[idx] = saved - step;
        const double down = expected_reward();
        loc.data[idx] = saved;
        const double numeric = (up - down) / (2 * step);
        const double tol = 2e-4 * std::max({std::abs(analytic[idx]), std::abs(numeric), 1.0});
        CHECK(std::abs(analytic[idx] - numeric) <= tol);
    }
}

TEST_CASE("train: zero epochs returns the initialized pair untouched") {
    TrainConfig cfg = tiny_config();
    cfg.n_epochs = 0;
    AdversarialTrainer trainer(cfg);
    const std::vector<double> loc = trainer.pair().loc.data;
    trainer.train();
    CHECK(trainer.pair().loc.data == loc);
    CHECK(trainer.curves().empty());
}

TEST_CASE("train: curves, promotions and artifacts are consistent") {
    const auto dir = std::filesystem::temp_directory_path() / "mclip_train_test";
    std::filesystem::remove_all(dir);
    TrainConfig cfg = tiny_config();
    cfg.out_dir = dir.string();
    AdversarialTrainer trainer(cfg);
    trainer.train();

    const auto& curves = trainer.curves();
    REQUIRE(curves.size() == 6); // two phases per epoch
    int promotions = 0;
    for (const auto& row : curves) {
        CHECK((row.promoted == 0 || row.promoted == 1));
        CHECK(row.promoted == (row.val_current > row.val_baseline ? 1 : 0));
        promotions += row.promoted;
    }
    CHECK(promotions <= 2 * cfg.n_epochs);

    // baseline score never drops while its conditioning agent is unchanged
    for (std::size_t i = 2; i < curves.size(); i += 2) {
        const auto& prev = curves[i - 2]; // same phase, previous epoch
        const auto& cur = curves[i];
        const auto& counterpart_prev = curves[i - 1];
        if (counterpart_prev.promoted == 0)
            CHECK(cur.val_baseline >= prev.val_baseline - 1e-12);
    }

    CHECK(std::filesystem::exists(dir / "curves.csv"));
    CHECK(std::filesystem::exists(dir / "loc.ckpt"));
    CHECK(std::filesystem::exists(dir / "intd.ckpt"));
    CHECK(std::filesystem::exists(dir / "loc_epoch_0003.ckpt"));
    CHECK(std::filesystem::exists(dir / "trainer_state.bin"));

    const PolicyParams loaded = load_checkpoint((dir / "loc.ckpt").string());
    CHECK(loaded.role == Role::Location);
    CHECK(loaded.epoch == 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train: resume reproduces an uninterrupted run bit-exactly") {
    const auto dir_a = std::filesystem::temp_directory_path() / "mclip_resume_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "mclip_resume_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);

    TrainConfig cfg = tiny_config(23);
    cfg.n_epochs = 4;
    cfg.out_dir = dir_a.string();
    AdversarialTrainer full(cfg);
    full.train();

    cfg.out_dir = dir_b.string();
    cfg.n_epochs = 2;
    AdversarialTrainer part(cfg);
    part.train();
    cfg.n_epochs = 4;
    AdversarialTrainer resumed(cfg);
    resumed.train(true);

    CHECK(resumed.pair().loc.data == full.pair().loc.data);
    CHECK(resumed.pair().intd.data == full.pair().intd.data);
    CHECK(resumed.pair().loc_base.data == full.pair().loc_base.data);
    CHECK(resumed.pair().intd_base.data == full.pair().intd_base.data);

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}
