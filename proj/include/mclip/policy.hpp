#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mclip/coverage.hpp"
#include "mclip/instance.hpp"
#include "mclip/rng.hpp"

namespace mclip {

enum class Role { Location, Interdiction };
enum class DecodeMode { Greedy, Sampled };

// One attention backbone serves both agents; role only changes masking,
// budget and reward wiring. f is the feed-forward width ("hidden
// dimension"), independent from the embedding width d.
struct PolicyDims {
    int d = 32;
    int h = 4;
    int L = 2;
    int f = 32;

    static constexpr int features = 6; // x, y, located, covered_before, interdicted, covered_now
    static constexpr int globals = 2;  // steps_remaining / budget, fraction covered

    void validate() const;
    bool operator==(const PolicyDims&) const = default;
};

// Closed form, audited by hand in the tests:
//   d*F + d                              input projection
// + L * (4d^2 + 2fd + f + 3d)            per encoder layer
// + d*(d+G) + d + d^2                    decoder context / output projections
std::size_t policy_param_count(const PolicyDims& dims);

// All learnable tensors of one agent, flattened in declaration order:
//   W_in [d x F], b_in [d],
//   per layer: Wq Wk Wv Wo [d x d], g1 [d], W1 [f x d], b1 [f],
//              W2 [d x f], b2 [d], g2 [d],
//   W_ctx [d x (d+G)], b_ctx [d], W_out [d x d].
// Matrices are row-major and applied as y = W * x. The checkpoint file
// stores exactly this order as little-endian float32.
struct PolicyParams {
    Role role = Role::Location;
    PolicyDims dims;
    std::uint64_t seed_lineage = 0;
    int epoch = 0;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
};

// Weights uniform in +-1/sqrt(fan_in); biases zero; normalization scales one.
PolicyParams init_params(Role role, const PolicyDims& dims, std::uint64_t seed);

// Checkpoint: one JSON header line (version, role, dims, feature schema,
// seed lineage, epoch, n_params) terminated by '\n', then n_params
// little-endian float32 values in declaration order.
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

struct Rollout {
    std::vector<int> actions;      // in selection order
    std::vector<double> log_probs; // one per step, <= 0
    DecodeMode mode = DecodeMode::Greedy;

    double total_log_prob() const;
    std::vector<int> sorted_actions() const;
};

// Per-node state features + global summary for one decoding step.
// `chosen` is the action prefix (selection order); for the interdiction
// role `conditioning` holds the open sites under attack.
struct StateFeatures {
    std::vector<double> nodes; // row-major n x features
    std::array<double, 2> globals{0.0, 0.0};
};

StateFeatures build_state_features(const Instance& inst, const CoverageKernel& kernel,
                                   Role role, const std::vector<int>& chosen,
                                   const std::vector<int>* conditioning);

struct EncodeResult {
    int n = 0;
    std::vector<double> embeddings; // row-major n x d
    std::vector<double> graph;      // d, mean of node embeddings
};

EncodeResult encode_instance(const PolicyParams& params, const std::vector<double>& node_features,
                             int n);

// Masked pointer attention over the node embeddings. Logits are
// tanh-clipped to +-kLogitClip, masked entries get exactly zero
// probability. Throws if every node is masked.
std::vector<double> decode_action_distribution(const PolicyParams& params,
                                               const EncodeResult& enc,
                                               const std::array<double, 2>& globals,
                                               const std::vector<std::uint8_t>& mask);

inline constexpr double kLogitClip = 10.0;

// Forward/backward engine with reusable buffers. One evaluator per thread;
// the bound params must outlive it.
class PolicyEvaluator {
public:
    explicit PolicyEvaluator(const PolicyParams& params);
    ~PolicyEvaluator();
    PolicyEvaluator(PolicyEvaluator&&) noexcept;
    PolicyEvaluator& operator=(PolicyEvaluator&&) noexcept;

    void rebind(const PolicyParams& params);
    const PolicyParams& params() const { return *params_; }

    // Autoregressive construction of p (location) or r (interdiction)
    // actions. Location role forbids conditioning; interdiction requires
    // it and never leaves it. Greedy ties resolve to the lowest index.
    Rollout rollout(const Instance& inst, const CoverageKernel& kernel,
                    const std::vector<int>* conditioning, DecodeMode mode, Rng* rng);

    // Teacher-forced log-probability of a feasible action sequence.
    double log_prob_of(const Instance& inst, const CoverageKernel& kernel,
                       const std::vector<int>* conditioning, const std::vector<int>& sequence);

    // Adds scale * d(log pi(sequence))/d(theta) into grad (same layout as
    // params.data). Returns the sequence log-probability.
    double accumulate_log_prob_grad(const Instance& inst, const CoverageKernel& kernel,
                                    const std::vector<int>* conditioning,
                                    const std::vector<int>& sequence, double scale,
                                    std::span<double> grad);

private:
    struct Step;
    double run_sequence(const Instance& inst, const CoverageKernel& kernel,
                        const std::vector<int>* conditioning, const std::vector<int>* forced,
                        DecodeMode mode, Rng* rng, double grad_scale, double* grad, Rollout* out);

    void forward(int n);
    void backward(int n, double* grad);

    const PolicyParams* params_;
    // workspace (sized for the current n)
    struct Buffers;
    std::unique_ptr<Buffers> buf_;
};

} // namespace mclip
