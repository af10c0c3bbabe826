#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dtse/telemetry.hpp"
#include "dtse/tensor.hpp"

namespace dtse::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Interactive: two branches (power, voltage) with cross-gating.
/// Concat: every channel in one vector, one branch, no gating (ablation baseline).
enum class Architecture { Interactive, Concat };

const char* architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

struct ModelConfig {
    Architecture architecture = Architecture::Interactive;
    std::size_t d = 32;        // feature size
    std::size_t d_ff = 64;     // feed-forward hidden size
    std::size_t blocks = 2;    // fusion blocks in series
    std::size_t heads = 4;     // query heads
    std::size_t groups = 2;    // key/value groups
    std::size_t window = 8;    // time steps per window
    std::size_t state_dim = 0;
    std::vector<std::size_t> power_channels;
    std::vector<std::size_t> voltage_channels;
    bool positional_encoding = true;
    // Fixed affine on the head output, x̂ = y ⊙ scale + offset; empty = identity.
    std::vector<double> output_offset;
    std::vector<double> output_scale;
    bool standardize_targets = false;  // train() fills the affine from training-split state statistics

    // training
    std::size_t epochs = 30;
    double lr = 1e-4;
    ad::OptimizerKind optimizer = ad::OptimizerKind::Sgd;
    std::uint64_t seed = 1;
    bool shuffle = true;
    std::size_t max_train_windows = 0;  // 0 = every window in the training split
    std::vector<double> train_alpha;    // per channel; empty = no augmentation masking

    std::size_t channel_count() const { return power_channels.size() + voltage_channels.size(); }
    std::size_t head_dim() const { return d / heads; }
    /// Errors: InvalidArgument.
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

/// T consecutive steps of masked, normalized measurements split by branch, with their target states.
struct Window {
    Tensor z_power;  // T x m_p
    Tensor z_volt;   // T x m_v
    Tensor target;   // T x n
    std::size_t end_step = 0;
};

/// Builds the window ending at `end_step` from per-step input rows (masked, normalized) and the dataset states.
Window make_window(std::span<const std::vector<double>> inputs, const telemetry::Dataset& dataset,
                   std::size_t end_step, const ModelConfig& config);

/// Sinusoidal table, rows = time steps.
Tensor positional_encoding(std::size_t steps, std::size_t d);

struct ForwardStats {
    std::size_t kv_projections = 0;  // K/V projection pairs evaluated
    std::size_t query_heads = 0;
    std::size_t attention_calls = 0;
};

// -- building blocks (tape level) --

/// z·W + b (+ positional encoding when given). No activation.
Var project_branch(Tape& tape, Var z, Var weight, Var bias, const Tensor* encoding);

struct AttentionWeights {
    Var wq;               // d x d
    std::vector<Var> wk;  // per group, d x d_k
    std::vector<Var> wv;  // per group, d x d_k
    Var wo;               // d x d
};

/// Grouped-query attention with residual: X + concat_h(softmax(Q_h K_g^T / sqrt(d_k)) V_g) Wo,
/// where head h reads group g = h / (H/G). K_g and V_g are evaluated once per group.
Var gqa_attention(Tape& tape, Var x, const AttentionWeights& w, std::size_t heads, std::size_t groups,
                  ForwardStats* stats = nullptr);

struct GateWeights {
    Var w1, b1, w2, b2;  // d x d_ff, 1 x d_ff, d_ff x d, 1 x d
};

/// sigmoid(relu(a W1 + b1) W2 + b2)
Var gate(Tape& tape, Var a, const GateWeights& w);

/// H1 = g(a2; gate2) ⊙ a2 + a1,  H2 = g(a1; gate1) ⊙ a1 + a2.
std::pair<Var, Var> cross_gate(Tape& tape, Var a1, Var a2, const GateWeights& gate1, const GateWeights& gate2);

/// (1/(nT)) Σ (x − x̂)².
Var loss(Tape& tape, Var estimate, Var truth);
double loss(const Tensor& estimate, const Tensor& truth);

// -- the model --

class DtModel {
  public:
    /// Fresh parameters: uniform(±sqrt(1/fan_in)) weights, zero biases, seeded from config.seed.
    static DtModel initialize(const ModelConfig& config);
    static DtModel from_parameters(const ModelConfig& config, ad::ParameterSet params);

    const ModelConfig& config() const { return config_; }
    ad::ParameterSet& params() { return params_; }
    const ad::ParameterSet& params() const { return params_; }
    std::size_t parameter_count() const { return params_.scalar_count(); }

    /// Records the full forward pass with the weights as constants.
    Var forward(Tape& tape, const Window& window, ForwardStats* stats = nullptr) const;
    /// Same pass with the weights entered as parameters, so backward() fills this model's gradients.
    Var forward_trainable(Tape& tape, const Window& window, ForwardStats* stats = nullptr);

    /// x̂ for every step of the window, T x n.
    Tensor estimate_voltages(const Window& window) const;

    void save(const std::string& path) const;
    static DtModel load(const std::string& path);

  private:
    DtModel(ModelConfig config, ad::ParameterSet params);
    template <typename Leaf>
    Var build(Tape& tape, const Window& window, Leaf&& leaf, ForwardStats* stats) const;

    ModelConfig config_;
    ad::ParameterSet params_;
    Tensor encoding_;
};

struct EpochLoss {
    std::size_t epoch = 0;
    double train = 0.0;
    double validation = 0.0;  // NaN when the validation split holds no full window
};

struct TrainResult {
    DtModel model;
    std::vector<EpochLoss> history;
};

/// Per epoch: fresh Bernoulli masks over the training split, then for each window forward, loss,
/// backward, optimizer step. Errors: NonFiniteLoss, InvalidArgument.
TrainResult train(const telemetry::Dataset& dataset, const ModelConfig& config);

void write_history_csv(const std::vector<EpochLoss>& history, const std::string& path);

/// Masked, normalized input row for every dataset step, masks drawn per step from (seed, stream).
std::vector<std::vector<double>> masked_inputs(const telemetry::Dataset& dataset, std::span<const double> alpha,
                                               std::uint64_t seed, std::uint64_t stream,
                                               std::vector<telemetry::MaskVector>* masks = nullptr);

/// Estimate for each step in [first, last): the final row of the window ending there.
/// Steps earlier than window - 1 are skipped.
std::vector<std::vector<double>> estimate_series(const DtModel& model, const telemetry::Dataset& dataset,
                                                 std::span<const std::vector<double>> inputs, std::size_t first,
                                                 std::size_t last);

/// Per-state mean and population std over the training split (std below 1e-12 becomes 1).
void fit_output_scaling(ModelConfig& config, const telemetry::Dataset& dataset);

/// Branch split derived from a schema: P/Q channels vs voltage channels.
void assign_branches(ModelConfig& config, const telemetry::MeasurementSchema& schema);

}  // namespace dtse::model
