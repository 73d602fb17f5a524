#include "mclip/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mclip/coverage.hpp"

namespace mclip {

namespace {

// Substream tags for the stateless seed derivation. Everything a run
// touches is keyed off (master_seed, tag, epoch, index), so resume and
// thread count cannot change the numbers.
constexpr std::uint64_t kTagValData = 1001;
constexpr std::uint64_t kTagEpochData = 1002;
constexpr std::uint64_t kTagLocSampling = 1003;
constexpr std::uint64_t kTagIntSampling = 1004;

} // namespace

void adam_ascend(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps) {
    if (params.size() != grad.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam: size mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] += lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void TrainConfig::validate() const {
    data.validate();
    dims.validate();
    if (batch_size <= 0) throw std::invalid_argument("train config: batch size must be positive");
    if (n_epochs < 0) throw std::invalid_argument("train config: epochs must be nonnegative");
    if (instances_per_epoch <= 0)
        throw std::invalid_argument("train config: instances per epoch must be positive");
    if (val_size <= 0) throw std::invalid_argument("train config: validation size must be positive");
    if (!(lr > 0)) throw std::invalid_argument("train config: learning rate must be positive");
    if (lr_decay_every <= 0) throw std::invalid_argument("train config: decay interval must be positive");
}

TrainConfig toy_preset() {
    TrainConfig cfg;
    cfg.data = GenSpec{.n = 20, .p = 4, .r = 1, .radius = 0.3, .seed = 0, .count = 1};
    cfg.dims = PolicyDims{.d = 32, .h = 4, .L = 2, .f = 32};
    cfg.batch_size = 256;
    cfg.n_epochs = 50;
    cfg.instances_per_epoch = 10000;
    cfg.val_size = 256;
    cfg.lr = 1e-3;
    cfg.preset_tag = "toy";
    return cfg;
}

TrainConfig paper_preset(int graph_size) {
    TrainConfig cfg;
    switch (graph_size) {
    case 20: cfg.data = GenSpec{.n = 20, .p = 4, .r = 1, .radius = 0.3, .seed = 0, .count = 1}; break;
    case 50: cfg.data = GenSpec{.n = 50, .p = 8, .r = 3, .radius = 0.2, .seed = 0, .count = 1}; break;
    case 100: cfg.data = GenSpec{.n = 100, .p = 15, .r = 5, .radius = 0.2, .seed = 0, .count = 1}; break;
    default: throw std::invalid_argument("paper preset supports graph sizes 20, 50 and 100");
    }
    cfg.dims = PolicyDims{.d = 128, .h = 8, .L = 3, .f = 128};
    cfg.batch_size = 512;
    cfg.n_epochs = 1000;
    cfg.instances_per_epoch = 512000;
    cfg.val_size = 1280;
    cfg.lr = 1e-4;
    cfg.lr_decay_factor = 0.1;
    cfg.lr_decay_every = 200;
    cfg.preset_tag = "paper";
    return cfg;
}

std::string curve_csv_header() {
    return "epoch,phase,mean_sampled_reward,val_current,val_baseline,promoted,lr,wall_seconds";
}

std::string curve_csv_row(const CurveRow& row) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f,%d,%.8f,%.3f", row.epoch,
                  row.phase.c_str(), row.mean_sampled_reward, row.val_current, row.val_baseline,
                  row.promoted, row.lr, row.wall_seconds);
    return buf;
}

AdversarialTrainer::AdversarialTrainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    lr_ = cfg_.lr;

    pair_.loc = init_params(Role::Location, cfg_.dims, cfg_.master_seed);
    pair_.intd = init_params(Role::Interdiction, cfg_.dims, cfg_.master_seed);
    pair_.loc_base = pair_.loc;
    pair_.intd_base = pair_.intd;
    pair_.adam_loc.reset(pair_.loc.data.size());
    pair_.adam_intd.reset(pair_.intd.data.size());

    GenSpec val_spec = cfg_.data;
    val_spec.seed = mix_seed(cfg_.master_seed, kTagValData);
    val_spec.count = cfg_.val_size;
    val_set_.reserve(cfg_.val_size);
    for (int i = 0; i < cfg_.val_size; ++i)
        val_set_.push_back(generate_uniform_instance(val_spec, i));
}

std::vector<Instance> AdversarialTrainer::generate_epoch_data(int epoch) const {
    GenSpec spec = cfg_.data;
    spec.seed = mix_seed(mix_seed(cfg_.master_seed, kTagEpochData), static_cast<std::uint64_t>(epoch));
    spec.count = cfg_.instances_per_epoch;
    std::vector<Instance> out;
    out.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) out.push_back(generate_uniform_instance(spec, i));
    return out;
}

BatchStats AdversarialTrainer::reinforce_update_location(const std::vector<Instance>& batch,
                                                         int epoch,
                                                         std::int64_t first_instance_index) {
    return reinforce_update(Role::Location, batch, epoch, first_instance_index);
}

BatchStats AdversarialTrainer::reinforce_update_interdiction(const std::vector<Instance>& batch,
                                                             int epoch,
                                                             std::int64_t first_instance_index) {
    return reinforce_update(Role::Interdiction, batch, epoch, first_instance_index);
}

BatchStats AdversarialTrainer::reinforce_update(Role role, const std::vector<Instance>& batch,
                                                int epoch, std::int64_t first_instance_index) {
    if (batch.empty()) throw std::invalid_argument("reinforce update: empty batch");
    const int B = static_cast<int>(batch.size());
    const std::size_t n_params =
        role == Role::Location ? pair_.loc.data.size() : pair_.intd.data.size();

    BatchStats stats;
    stats.batch_size = B;
    if (role == Role::Interdiction && cfg_.data.r == 0) {
        // nothing to interdict: rewards are all zero and no parameter moves
        return stats;
    }

    grad_buffer_.assign(static_cast<std::size_t>(B) * n_params, 0.0);
    std::vector<double> rewards(B, 0.0), baselines(B, 0.0);

    const std::uint64_t stream_tag = role == Role::Location ? kTagLocSampling : kTagIntSampling;
    const std::uint64_t phase_seed =
        mix_seed(mix_seed(cfg_.master_seed, stream_tag), static_cast<std::uint64_t>(epoch));

#pragma omp parallel
    {
        PolicyEvaluator cur_loc(pair_.loc);
        PolicyEvaluator cur_int(pair_.intd);
        PolicyEvaluator base_loc(pair_.loc_base);
        PolicyEvaluator base_int(pair_.intd_base);

#pragma omp for schedule(static)
        for (int i = 0; i < B; ++i) {
            const Instance& inst = batch[i];
            const CoverageKernel kernel(inst);
            Rng stream = Rng::from_stream(
                phase_seed, static_cast<std::uint64_t>(first_instance_index + i));

            double reward = 0.0, baseline = 0.0;
            const std::span<double> grad(
                grad_buffer_.data() + static_cast<std::size_t>(i) * n_params, n_params);

            if (role == Role::Location) {
                const Rollout tau_l =
                    cur_loc.rollout(inst, kernel, nullptr, DecodeMode::Sampled, &stream);
                const std::vector<int> open = tau_l.sorted_actions();
                std::vector<int> hits;
                if (inst.r > 0) {
                    const Rollout tau_i =
                        cur_int.rollout(inst, kernel, &open, DecodeMode::Greedy, nullptr);
                    hits = tau_i.sorted_actions();
                }
                reward = kernel.coverage(open) + kernel.coverage_minus(open, hits);

                const Rollout tau_l_b =
                    base_loc.rollout(inst, kernel, nullptr, DecodeMode::Greedy, nullptr);
                const std::vector<int> open_b = tau_l_b.sorted_actions();
                std::vector<int> hits_b;
                if (inst.r > 0) {
                    const Rollout tau_i_b =
                        base_int.rollout(inst, kernel, &open_b, DecodeMode::Greedy, nullptr);
                    hits_b = tau_i_b.sorted_actions();
                }
                baseline = kernel.coverage(open_b) + kernel.coverage_minus(open_b, hits_b);

                const double adv = reward - baseline;
                if (adv != 0.0)
                    cur_loc.accumulate_log_prob_grad(inst, kernel, nullptr, tau_l.actions, adv,
                                                     grad);
            } else {
                const Rollout tau_l =
                    cur_loc.rollout(inst, kernel, nullptr, DecodeMode::Greedy, nullptr);
                const std::vector<int> open = tau_l.sorted_actions();
                const Rollout tau_i =
                    cur_int.rollout(inst, kernel, &open, DecodeMode::Sampled, &stream);
                reward = -kernel.coverage_minus(open, tau_i.sorted_actions());

                const Rollout tau_l_b =
                    base_loc.rollout(inst, kernel, nullptr, DecodeMode::Greedy, nullptr);
                const std::vector<int> open_b = tau_l_b.sorted_actions();
                const Rollout tau_i_b =
                    base_int.rollout(inst, kernel, &open_b, DecodeMode::Greedy, nullptr);
                baseline = -kernel.coverage_minus(open_b, tau_i_b.sorted_actions());

                const double adv = reward - baseline;
                if (adv != 0.0)
                    cur_int.accumulate_log_prob_grad(inst, kernel, &open, tau_i.actions, adv,
                                                     grad);
            }
            rewards[i] = reward;
            baselines[i] = baseline;
        }
    }

    // deterministic fixed-order reduction over the batch
    std::vector<double> grad(n_params, 0.0);
    for (int i = 0; i < B; ++i) {
        const double* gi = grad_buffer_.data() + static_cast<std::size_t>(i) * n_params;
        for (std::size_t k = 0; k < n_params; ++k) grad[k] += gi[k];
    }
    const double inv_b = 1.0 / B;
    double norm_sq = 0.0;
    for (double& g : grad) {
        g *= inv_b;
        norm_sq += g * g;
    }
    if (!std::isfinite(norm_sq))
        throw std::runtime_error("non-finite REINFORCE gradient; aborting epoch");
    if (cfg_.grad_clip > 0.0) {
        const double norm = std::sqrt(norm_sq);
        if (norm > cfg_.grad_clip) {
            const double scale = cfg_.grad_clip / norm;
            for (double& g : grad) g *= scale;
        }
    }

    if (role == Role::Location) {
        adam_ascend(pair_.loc.data, grad, pair_.adam_loc, lr_, cfg_.adam_beta1, cfg_.adam_beta2,
                    cfg_.adam_eps);
    } else {
        adam_ascend(pair_.intd.data, grad, pair_.adam_intd, lr_, cfg_.adam_beta1, cfg_.adam_beta2,
                    cfg_.adam_eps);
    }

    for (int i = 0; i < B; ++i) {
        stats.mean_sampled_reward += rewards[i];
        stats.mean_baseline_reward += baselines[i];
    }
    stats.mean_sampled_reward /= B;
    stats.mean_baseline_reward /= B;
    stats.mean_advantage = stats.mean_sampled_reward - stats.mean_baseline_reward;
    return stats;
}

namespace {

// Greedy z (or -z') on one validation instance under the given agents.
double validation_value(const Instance& inst, const CoverageKernel& kernel,
                        PolicyEvaluator& loc_eval, PolicyEvaluator& int_eval, bool negative_post) {
    const Rollout tau_l = loc_eval.rollout(inst, kernel, nullptr, DecodeMode::Greedy, nullptr);
    const std::vector<int> open = tau_l.sorted_actions();
    std::vector<int> hits;
    if (inst.r > 0) {
        const Rollout tau_i = int_eval.rollout(inst, kernel, &open, DecodeMode::Greedy, nullptr);
        hits = tau_i.sorted_actions();
    }
    const int post = kernel.coverage_minus(open, hits);
    if (negative_post) return -static_cast<double>(post);
    return static_cast<double>(kernel.coverage(open) + post);
}

} // namespace

std::pair<double, double> AdversarialTrainer::validate_location() {
    const int n = static_cast<int>(val_set_.size());
    std::vector<double> cur(n), base(n);
#pragma omp parallel
    {
        PolicyEvaluator cur_loc(pair_.loc);
        PolicyEvaluator base_loc(pair_.loc_base);
        PolicyEvaluator base_int(pair_.intd_base);
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const CoverageKernel kernel(val_set_[i]);
            cur[i] = validation_value(val_set_[i], kernel, cur_loc, base_int, false);
            base[i] = validation_value(val_set_[i], kernel, base_loc, base_int, false);
        }
    }
    double c = 0, b = 0;
    for (int i = 0; i < n; ++i) { c += cur[i]; b += base[i]; }
    return {c / n, b / n};
}

std::pair<double, double> AdversarialTrainer::validate_interdiction() {
    const int n = static_cast<int>(val_set_.size());
    if (cfg_.data.r == 0) return {0.0, 0.0};
    std::vector<double> cur(n), base(n);
#pragma omp parallel
    {
        PolicyEvaluator base_loc(pair_.loc_base);
        PolicyEvaluator cur_int(pair_.intd);
        PolicyEvaluator base_int(pair_.intd_base);
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const CoverageKernel kernel(val_set_[i]);
            cur[i] = validation_value(val_set_[i], kernel, base_loc, cur_int, true);
            base[i] = validation_value(val_set_[i], kernel, base_loc, base_int, true);
        }
    }
    double c = 0, b = 0;
    for (int i = 0; i < n; ++i) { c += cur[i]; b += base[i]; }
    return {c / n, b / n};
}

void AdversarialTrainer::write_curve_row(const CurveRow& row) {
    curves_.push_back(row);
    if (cfg_.out_dir.empty()) return;
    const std::string path = cfg_.out_dir + "/curves.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to curve file: " + path);
    if (fresh) out << curve_csv_header() << '\n';
    out << curve_csv_row(row) << '\n';
}

void AdversarialTrainer::save_epoch_artifacts(int epoch) {
    if (cfg_.out_dir.empty()) return;
    char name[64];
    std::snprintf(name, sizeof(name), "/loc_epoch_%04d.ckpt", epoch);
    pair_.loc.epoch = epoch;
    save_checkpoint(pair_.loc, cfg_.out_dir + name);
    save_checkpoint(pair_.loc, cfg_.out_dir + "/loc.ckpt");
    std::snprintf(name, sizeof(name), "/intd_epoch_%04d.ckpt", epoch);
    pair_.intd.epoch = epoch;
    save_checkpoint(pair_.intd, cfg_.out_dir + name);
    save_checkpoint(pair_.intd, cfg_.out_dir + "/intd.ckpt");
}

namespace {

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    const std::uint64_t n = v.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("truncated trainer state");
    return v;
}

} // namespace

void AdversarialTrainer::save_trainer_state(int epochs_done) const {
    if (cfg_.out_dir.empty()) return;
    const std::string path = cfg_.out_dir + "/trainer_state.bin";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trainer state: " + path);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&epochs_done), sizeof(epochs_done));
    out.write(reinterpret_cast<const char*>(&lr_), sizeof(lr_));
    const std::int64_t step_loc = pair_.adam_loc.step, step_int = pair_.adam_intd.step;
    out.write(reinterpret_cast<const char*>(&step_loc), sizeof(step_loc));
    out.write(reinterpret_cast<const char*>(&step_int), sizeof(step_int));
    write_doubles(out, pair_.loc.data);
    write_doubles(out, pair_.intd.data);
    write_doubles(out, pair_.loc_base.data);
    write_doubles(out, pair_.intd_base.data);
    write_doubles(out, pair_.adam_loc.m);
    write_doubles(out, pair_.adam_loc.v);
    write_doubles(out, pair_.adam_intd.m);
    write_doubles(out, pair_.adam_intd.v);
}

int AdversarialTrainer::load_trainer_state() {
    const std::string path = cfg_.out_dir + "/trainer_state.bin";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("resume requested but no trainer state at " + path);
    std::uint32_t version = 0;
    int epochs_done = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != 1) throw std::runtime_error("unsupported trainer state version");
    in.read(reinterpret_cast<char*>(&epochs_done), sizeof(epochs_done));
    in.read(reinterpret_cast<char*>(&lr_), sizeof(lr_));
    std::int64_t step_loc = 0, step_int = 0;
    in.read(reinterpret_cast<char*>(&step_loc), sizeof(step_loc));
    in.read(reinterpret_cast<char*>(&step_int), sizeof(step_int));
    pair_.adam_loc.step = step_loc;
    pair_.adam_intd.step = step_int;
    pair_.loc.data = read_doubles(in);
    pair_.intd.data = read_doubles(in);
    pair_.loc_base.data = read_doubles(in);
    pair_.intd_base.data = read_doubles(in);
    pair_.adam_loc.m = read_doubles(in);
    pair_.adam_loc.v = read_doubles(in);
    pair_.adam_intd.m = read_doubles(in);
    pair_.adam_intd.v = read_doubles(in);
    return epochs_done;
}

void AdversarialTrainer::train(bool resume) {
    if (!cfg_.out_dir.empty()) std::filesystem::create_directories(cfg_.out_dir);

    int start_epoch = 1;
    if (resume) start_epoch = load_trainer_state() + 1;

    for (int epoch = start_epoch; epoch <= cfg_.n_epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const std::vector<Instance> data = generate_epoch_data(epoch);

        auto run_phase = [&](Role role) {
            double reward_sum = 0.0;
            std::int64_t count = 0;
            for (std::size_t off = 0; off < data.size(); off += cfg_.batch_size) {
                const std::size_t end = std::min(data.size(), off + cfg_.batch_size);
                const std::vector<Instance> batch(data.begin() + static_cast<std::ptrdiff_t>(off),
                                                  data.begin() + static_cast<std::ptrdiff_t>(end));
                const BatchStats stats =
                    role == Role::Location
                        ? reinforce_update_location(batch, epoch, static_cast<std::int64_t>(off))
                        : reinforce_update_interdiction(batch, epoch,
                                                        static_cast<std::int64_t>(off));
                reward_sum += stats.mean_sampled_reward * stats.batch_size;
                count += stats.batch_size;
            }
            return count > 0 ? reward_sum / static_cast<double>(count) : 0.0;
        };

        // location phase
        const double loc_reward = run_phase(Role::Location);
        const auto [loc_cur, loc_base] = validate_location();
        const bool promote_loc = loc_cur > loc_base;
        if (promote_loc) pair_.loc_base = pair_.loc;
        CurveRow row;
        row.epoch = epoch;
        row.phase = "location";
        row.mean_sampled_reward = loc_reward;
        row.val_current = loc_cur;
        row.val_baseline = loc_base;
        row.promoted = promote_loc ? 1 : 0;
        row.lr = lr_;
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        write_curve_row(row);

        // interdiction phase
        const double int_reward = run_phase(Role::Interdiction);
        const auto [int_cur, int_base] = validate_interdiction();
        const bool promote_int = cfg_.data.r > 0 && int_cur > int_base;
        if (promote_int) pair_.intd_base = pair_.intd;
        row.phase = "interdiction";
        row.mean_sampled_reward = int_reward;
        row.val_current = int_cur;
        row.val_baseline = int_base;
        row.promoted = promote_int ? 1 : 0;
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        write_curve_row(row);

        if (epoch % cfg_.lr_decay_every == 0) lr_ *= cfg_.lr_decay_factor;

        save_epoch_artifacts(epoch);
        save_trainer_state(epoch);
    }
}

} // namespace mclip
