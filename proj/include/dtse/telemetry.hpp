#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dtse/grid.hpp"

namespace dtse::telemetry {

using grid::Complex;

enum class ChannelKind { PInjection, QInjection, VMagnitude, VAngle };

/// Short tag used in channel names: "P", "Q", "Vm", "Va".
std::string_view kind_tag(ChannelKind kind);
ChannelKind kind_from_tag(std::string_view tag);
inline bool is_power(ChannelKind k) { return k == ChannelKind::PInjection || k == ChannelKind::QInjection; }

struct Channel {
    ChannelKind kind = ChannelKind::PInjection;
    std::string bus;
    int phase = 0;
    double sigma = 0.0;  // noise std dev, channel units (p.u. or rad)
    double alpha = 0.0;  // missing probability

    /// "kind:bus:phase"
    std::string name() const;
};

/// Ordered measurement channels. When bound to a feeder, each channel carries its phase-node index.
class MeasurementSchema {
  public:
    MeasurementSchema() = default;

    /// Validates sigma > 0 (InvalidSigma) and 0 <= alpha < 1 (InvalidAlpha) without a feeder.
    explicit MeasurementSchema(std::vector<Channel> channels);
    /// Also resolves every channel against the feeder (UnknownChannelTarget).
    MeasurementSchema(std::vector<Channel> channels, const grid::FeederModel& feeder);

    std::size_t size() const { return channels_.size(); }
    const std::vector<Channel>& channels() const { return channels_; }
    const Channel& operator[](std::size_t i) const { return channels_[i]; }
    bool bound() const { return !nodes_.empty() || channels_.empty(); }
    std::size_t node(std::size_t channel) const { return nodes_.at(channel); }

    std::vector<std::string> names() const;
    std::vector<double> sigmas() const;
    std::vector<double> alphas() const;
    /// Indices of P/Q channels and of voltage channels, in schema order.
    std::vector<std::size_t> power_channels() const;
    std::vector<std::size_t> voltage_channels() const;

    /// Copy with every channel's alpha replaced.
    MeasurementSchema with_uniform_alpha(double alpha) const;

  private:
    std::vector<Channel> channels_;
    std::vector<std::size_t> nodes_;
};

struct MeasurementVector {
    std::vector<double> values;
    std::size_t time = 0;
};

/// true (1) = missing
struct MaskVector {
    std::vector<std::uint8_t> missing;
    std::size_t count() const;
};

// -- state layout: x = [Re(v); Im(v)] over the non-slack phase-nodes --

std::vector<double> state_from_voltages(const grid::FeederModel& feeder, const std::vector<Complex>& voltage);
/// Full phase-node voltages, slack nodes filled from the source.
std::vector<Complex> voltages_from_state(const grid::FeederModel& feeder, std::span<const double> state);
/// "re:bus:phase" ... then "im:bus:phase" ...
std::vector<std::string> state_labels(const grid::FeederModel& feeder);

/// Noiseless h(v). P/Q = Re/Im of v_i·conj((Y·v)_i), V_magnitude = |v_i|, V_angle = arg(v_i).
MeasurementVector measure(const std::vector<Complex>& voltage, const Eigen::MatrixXcd& admittance,
                          const MeasurementSchema& schema);

/// Adds independent N(0, sigma_j^2) draws; deterministic per seed. Zero sigma leaves a channel unchanged.
MeasurementVector add_noise(const MeasurementVector& z, std::span<const double> sigma, std::uint64_t seed);
MeasurementVector add_noise(const MeasurementVector& z, const MeasurementSchema& schema, std::uint64_t seed);

/// Independently marks channel j missing with probability alpha_j and zeroes it.
/// Expects an already normalized vector so that zero is the neutral fill.
std::pair<MeasurementVector, MaskVector> apply_mask(const MeasurementVector& z, std::span<const double> alpha,
                                                     std::uint64_t seed);
std::pair<MeasurementVector, MaskVector> apply_mask(const MeasurementVector& z, const MeasurementSchema& schema,
                                                     std::uint64_t seed);

struct Normalization {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Time-indexed {z_t, missing_t, x_t}. z holds raw (noisy, unnormalized) readings; missing marks entries absent
/// at the source (blank CSV cells). Random training/evaluation masks are applied on top, never stored here.
struct Dataset {
    std::vector<std::string> channel_names;
    std::vector<std::string> state_labels;
    std::vector<MeasurementVector> z;
    std::vector<MaskVector> missing;
    std::vector<std::vector<double>> x;
    std::size_t train_steps = 0;
    Normalization norm;

    std::size_t steps() const { return z.size(); }
    std::size_t channels() const { return channel_names.size(); }
    std::size_t state_dim() const { return state_labels.size(); }

    /// z-scored step t with source-missing entries set to 0.
    std::vector<double> normalized(std::size_t t) const;
};

inline constexpr double kDefaultTrainFraction = 0.8;

/// Recomputes `norm` from unmasked entries of the first train_steps rows.
void compute_normalization(Dataset& dataset);
/// Splits by time: the first round(fraction * steps) rows train.
void set_train_fraction(Dataset& dataset, double fraction);

struct BuildOptions {
    double pf_tol = 1e-8;
    int pf_max_iter = 100;
    double train_fraction = kDefaultTrainFraction;
    bool noise = true;  // false: z_t = h(x_t) exactly
};

/// Power flow -> x_t, measure + noise -> z_t for every profile step.
/// A failing power flow surfaces as StepError(NoConvergence) with the step index.
Dataset build_dataset(const grid::FeederModel& feeder, const std::vector<grid::LoadScenario>& profiles,
                      const MeasurementSchema& schema, std::uint64_t seed, const BuildOptions& options = {});

/// Errors: HeaderMismatch, RaggedRows, UnparseableNumber, IoError.
Dataset import_csv(const std::string& measurements_path, const std::string& states_path,
                   const MeasurementSchema& schema, double train_fraction = kDefaultTrainFraction);
void export_csv(const Dataset& dataset, const std::string& measurements_path, const std::string& states_path);

}  // namespace dtse::telemetry
