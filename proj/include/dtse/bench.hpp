#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtse/grid.hpp"
#include "dtse/model.hpp"
#include "dtse/telemetry.hpp"

namespace dtse::bench {

// -- metrics --

struct ErrorMetrics {
    double rmse_pct = 0.0;  // 100 * RMSE of |V| in p.u.
    double mae_mag = 0.0;   // p.u.
    double mae_ang = 0.0;   // rad, differences wrapped to (-pi, pi]
    std::size_t samples = 0;
};

/// Each series element is a state vector [Re(v); Im(v)]. Averages run over node-phase × time.
/// Errors: LengthMismatch.
ErrorMetrics compute_metrics(std::span<const std::vector<double>> estimate, std::span<const std::vector<double>> truth);

/// Angle difference wrapped to (-pi, pi].
double wrap_angle(double radians);

// -- report --

struct MetricRow {
    std::string method;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
};

struct SummaryRow {
    std::string method;
    double alpha = 0.0;
    std::string metric;
    std::size_t count = 0;
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

struct ModelInfo {
    std::string method;
    std::size_t parameters = 0;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
};

/// Estimated vs true voltage magnitude at one phase-node (analog of a per-node time trace).
struct Trace {
    std::string node;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> steps;
    std::vector<double> truth;
    std::vector<std::pair<std::string, std::vector<double>>> estimates;  // NaN where a method produced nothing
};

struct MetricsReport {
    std::vector<MetricRow> rows;
    std::vector<ModelInfo> models;
    std::optional<Trace> trace;

    /// Grouped by (method, alpha, metric) in order of first appearance; mean = ordered sum / count,
    /// clamped to [min, max].
    std::vector<SummaryRow> summarize() const;
    /// Mean over seeds, or nullopt when no row matches.
    std::optional<double> mean(const std::string& method, double alpha, const std::string& metric) const;
};

std::vector<SummaryRow> summarize(std::span<const MetricRow> rows);

/// metrics.csv, summary.csv, models.csv; sweep.svg and timeseries.svg when there is data.
/// Errors: IoError.
void emit_report(const MetricsReport& report, const std::string& out_dir);
std::vector<MetricRow> read_metrics_csv(const std::string& path);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

/// Stand-alone SVG writers.
std::string sweep_svg(std::span<const SummaryRow> summary);
std::string timeseries_svg(const Trace& trace);

// -- experiment configuration --

struct ChannelRule {
    telemetry::ChannelKind kind = telemetry::ChannelKind::PInjection;
    std::vector<std::string> buses;  // empty = every non-slack bus
    std::string phases;              // empty = every active phase
    double sigma = 0.01;
    double alpha = 0.05;
};

struct ProfileConfig {
    std::size_t steps = 500;
    double period = 96.0;  // steps per day at 15-minute sampling
    double amplitude = 0.3;
    double jitter = 0.05;
    double bus_scale_spread = 0.2;
};

struct WlsConfig {
    bool enabled = true;
    double tol = 1e-8;
    int max_iter = 50;
};

struct ExperimentConfig {
    std::string feeder_path;
    std::string measurements_csv;  // optional: import instead of simulating
    std::string states_csv;
    std::uint64_t data_seed = 11;
    double pf_tol = 1e-8;
    int pf_max_iter = 100;
    bool noise = true;
    ProfileConfig profile;
    std::vector<ChannelRule> channels;
    model::ModelConfig model;
    bool ablation = true;
    WlsConfig wls;
    std::vector<double> eval_alphas{0.0};
    std::vector<std::uint64_t> seeds{1};
    std::string timeseries_node;
    std::optional<double> timeseries_alpha;
    std::string output_dir = "out";
    std::string checkpoint;
    int jobs = 1;

    /// Errors: ConfigError.
    void validate() const;
    /// Relative paths resolve against base_dir.
    static ExperimentConfig from_json(const std::string& text, const std::string& base_dir = ".");
    static ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides = {});
    std::string to_json() const;
};

/// "a.b.c=value" applied to a JSON document; value parsed as JSON when possible, else taken as a string.
std::string apply_overrides(const std::string& json_text, const std::vector<std::string>& overrides);

telemetry::MeasurementSchema build_schema(const grid::FeederModel& feeder, std::span<const ChannelRule> rules);

/// Daily sinusoid × per-bus scale × (1 + jitter noise) applied to nominal loads; seeded.
std::vector<grid::LoadScenario> generate_profiles(const grid::FeederModel& feeder, const ProfileConfig& profile,
                                                  std::uint64_t seed);

// -- pipeline --

struct Experiment {
    ExperimentConfig config;
    grid::FeederModel feeder;
    telemetry::MeasurementSchema schema;
    telemetry::Dataset dataset;
};

/// Loads the feeder, builds the schema, then simulates or imports the dataset.
Experiment prepare(const ExperimentConfig& config);

/// Model config bound to the experiment's schema and state dimension.
model::ModelConfig model_config(const Experiment& experiment, model::Architecture architecture);

model::TrainResult train_model(const Experiment& experiment, model::Architecture architecture);

/// Concatenation baseline: all channels in one vector, one GQA stack, no cross-gating, same head and budget.
model::TrainResult ablation_concat(const Experiment& experiment);

struct WlsOutcome {
    std::size_t solved = 0;
    std::size_t rank_deficient = 0;
    std::size_t no_convergence = 0;
    std::vector<std::vector<double>> estimates;  // per evaluated step; empty vector when not solved
};

/// WLS over the evaluation steps under one uniform alpha and seed (same masks as the models see).
WlsOutcome run_wls(const Experiment& experiment, double alpha, std::uint64_t seed);

/// Evaluates the given models (either may be null) and WLS at every alpha × seed.
MetricsReport evaluate(const Experiment& experiment, const model::DtModel* dt, const model::DtModel* ablation);

/// RankDeficient fraction of WLS solves per alpha × seed, as metric rows.
MetricsReport wls_monte_carlo(const Experiment& experiment);

/// Full protocol: prepare, train DT (and ablation), evaluate, emit the report into config.output_dir.
MetricsReport run_sweep(const ExperimentConfig& config);

/// First step index of the evaluation range (the validation split).
std::size_t evaluation_begin(const telemetry::Dataset& dataset);

}  // namespace dtse::bench
