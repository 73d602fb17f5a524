#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mclip/instance.hpp"
#include "mclip/policy.hpp"

namespace mclip {

// First/second-moment adaptive optimizer state (Adam semantics:
// decay 0.9 / 0.999, epsilon 1e-8 by default, bias-corrected).
struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// Ascent step: params += lr * m_hat / (sqrt(v_hat) + eps).
void adam_ascend(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps);

struct TrainConfig {
    GenSpec data;                  // instance family; data.count is ignored
    PolicyDims dims;
    int batch_size = 256;
    int n_epochs = 50;
    int instances_per_epoch = 10000;
    int val_size = 256;
    double lr = 1e-3;
    double lr_decay_factor = 0.1;
    int lr_decay_every = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 0.0;        // 0 = off; REINFORCE is run unclipped by default
    std::uint64_t master_seed = 1;
    std::string out_dir;           // curves + checkpoints; empty keeps everything in memory
    std::string preset_tag = "custom";

    void validate() const;
};

// Scaled-down configuration that trains on a desk machine.
TrainConfig toy_preset();
// Full-scale configuration from the published hyperparameter table.
// Encoded for completeness; the epoch volume is far beyond desk budgets.
TrainConfig paper_preset(int graph_size);

struct AgentPair {
    PolicyParams loc, intd;        // theta_L, theta_I
    PolicyParams loc_base, intd_base;
    AdamState adam_loc, adam_intd;
};

struct BatchStats {
    double mean_sampled_reward = 0.0;
    double mean_baseline_reward = 0.0;
    double mean_advantage = 0.0;
    int batch_size = 0;
};

struct CurveRow {
    int epoch = 0;
    std::string phase;             // "location" | "interdiction"
    double mean_sampled_reward = 0.0;
    double val_current = 0.0;
    double val_baseline = 0.0;
    int promoted = 0;
    double lr = 0.0;
    double wall_seconds = 0.0;
};

std::string curve_csv_header();
std::string curve_csv_row(const CurveRow& row);

class AdversarialTrainer {
public:
    explicit AdversarialTrainer(TrainConfig cfg);

    // One REINFORCE step on the designated agent over a batch.
    // `first_instance_index` keys the per-instance sampling streams, so a
    // batch updates identically however the epoch is split or threaded.
    BatchStats reinforce_update_location(const std::vector<Instance>& batch, int epoch,
                                         std::int64_t first_instance_index);
    BatchStats reinforce_update_interdiction(const std::vector<Instance>& batch, int epoch,
                                             std::int64_t first_instance_index);

    // Greedy scores on the fixed validation set: (current, baseline).
    // Both location scores run against the baseline interdiction agent and
    // both interdiction scores against the baseline location agent, so each
    // promotion comparison is apples-to-apples.
    std::pair<double, double> validate_location();
    std::pair<double, double> validate_interdiction();

    // Full loop: fresh data every epoch, location phase, promotion,
    // interdiction phase, promotion, decay, curves, checkpoints.
    void train(bool resume = false);

    AgentPair& pair() { return pair_; }
    const AgentPair& pair() const { return pair_; }
    const TrainConfig& config() const { return cfg_; }
    const std::vector<CurveRow>& curves() const { return curves_; }
    double current_lr() const { return lr_; }

    std::vector<Instance> generate_epoch_data(int epoch) const;

private:
    BatchStats reinforce_update(Role role, const std::vector<Instance>& batch, int epoch,
                                std::int64_t first_instance_index);
    void write_curve_row(const CurveRow& row);
    void save_epoch_artifacts(int epoch);
    void save_trainer_state(int epochs_done) const;
    int load_trainer_state();

    TrainConfig cfg_;
    AgentPair pair_;
    std::vector<Instance> val_set_;
    std::vector<CurveRow> curves_;
    std::vector<double> grad_buffer_; // batch_size x n_params, fixed-order reduced
    double lr_ = 0.0;
};

} // namespace mclip
