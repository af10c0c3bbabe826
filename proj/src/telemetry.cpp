#include "dtse/telemetry.hpp"

#include <cmath>
#include <random>

#include "dtse/error.hpp"
#include "dtse/random.hpp"

namespace dtse::telemetry {

std::string_view kind_tag(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::PInjection: return "P";
        case ChannelKind::QInjection: return "Q";
        case ChannelKind::VMagnitude: return "Vm";
        case ChannelKind::VAngle: return "Va";
    }
    return "?";
}

ChannelKind kind_from_tag(std::string_view tag) {
    if (tag == "P") return ChannelKind::PInjection;
    if (tag == "Q") return ChannelKind::QInjection;
    if (tag == "Vm") return ChannelKind::VMagnitude;
    if (tag == "Va") return ChannelKind::VAngle;
    fail(ErrorCode::InvalidArgument, "unknown channel kind '" + std::string(tag) + "'");
}

std::string Channel::name() const {
    return std::string(kind_tag(kind)) + ":" + bus + ":" + grid::phase_letter(phase);
}

MeasurementSchema::MeasurementSchema(std::vector<Channel> channels) : channels_(std::move(channels)) {
    for (const auto& c : channels_) {
        if (!(c.sigma > 0.0) || !std::isfinite(c.sigma))
            fail(ErrorCode::InvalidSigma, c.name() + " sigma must be positive");
        if (!(c.alpha >= 0.0 && c.alpha < 1.0)) fail(ErrorCode::InvalidAlpha, c.name() + " alpha must lie in [0, 1)");
    }
}

MeasurementSchema::MeasurementSchema(std::vector<Channel> channels, const grid::FeederModel& feeder)
    : MeasurementSchema(std::move(channels)) {
    nodes_.reserve(channels_.size());
    for (const auto& c : channels_) {
        auto bus = feeder.bus_index(c.bus);
        if (!bus) fail(ErrorCode::UnknownChannelTarget, c.name() + ": no such bus");
        auto node = feeder.node_index(*bus, c.phase);
        if (!node) fail(ErrorCode::UnknownChannelTarget, c.name() + ": phase not active");
        nodes_.push_back(*node);
    }
}

std::vector<std::string> MeasurementSchema::names() const {
    std::vector<std::string> out;
    for (const auto& c : channels_) out.push_back(c.name());
    return out;
}

std::vector<double> MeasurementSchema::sigmas() const {
    std::vector<double> out;
    for (const auto& c : channels_) out.push_back(c.sigma);
    return out;
}

std::vector<double> MeasurementSchema::alphas() const {
    std::vector<double> out;
    for (const auto& c : channels_) out.push_back(c.alpha);
    return out;
}

std::vector<std::size_t> MeasurementSchema::power_channels() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < channels_.size(); ++i)
        if (is_power(channels_[i].kind)) out.push_back(i);
    return out;
}

std::vector<std::size_t> MeasurementSchema::voltage_channels() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < channels_.size(); ++i)
        if (!is_power(channels_[i].kind)) out.push_back(i);
    return out;
}

MeasurementSchema MeasurementSchema::with_uniform_alpha(double alpha) const {
    if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must lie in [0, 1)");
    MeasurementSchema copy = *this;
    for (auto& c : copy.channels_) c.alpha = alpha;
    return copy;
}

std::size_t MaskVector::count() const {
    std::size_t n = 0;
    for (auto m : missing) n += m ? 1 : 0;
    return n;
}

std::vector<double> state_from_voltages(const grid::FeederModel& feeder, const std::vector<Complex>& voltage) {
    const auto& states = feeder.state_nodes();
    if (voltage.size() != feeder.phase_nodes().size())
        fail(ErrorCode::LengthMismatch, "voltage vector does not cover the phase-nodes");
    std::vector<double> x(2 * states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        x[k] = voltage[states[k]].real();
        x[states.size() + k] = voltage[states[k]].imag();
    }
    return x;
}

std::vector<Complex> voltages_from_state(const grid::FeederModel& feeder, std::span<const double> state) {
    const auto& states = feeder.state_nodes();
    if (state.size() != 2 * states.size()) fail(ErrorCode::LengthMismatch, "state vector has the wrong length");
    const auto& nodes = feeder.phase_nodes();
    std::vector<Complex> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (feeder.is_slack_node(i)) v[i] = feeder.slack_voltage()[static_cast<std::size_t>(nodes[i].phase)];
    for (std::size_t k = 0; k < states.size(); ++k) v[states[k]] = Complex(state[k], state[states.size() + k]);
    return v;
}

std::vector<std::string> state_labels(const grid::FeederModel& feeder) {
    std::vector<std::string> labels;
    for (const char* part : {"re:", "im:"})
        for (std::size_t node : feeder.state_nodes()) labels.push_back(part + feeder.node_label(node));
    return labels;
}

MeasurementVector measure(const std::vector<Complex>& voltage, const Eigen::MatrixXcd& admittance,
                          const MeasurementSchema& schema) {
    if (!schema.bound()) fail(ErrorCode::UnknownChannelTarget, "schema is not bound to a feeder");
    const auto n = static_cast<Eigen::Index>(voltage.size());
    if (admittance.rows() != n || admittance.cols() != n)
        fail(ErrorCode::LengthMismatch, "admittance matrix does not match the voltage vector");
    MeasurementVector z;
    z.values.resize(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const std::size_t node = schema.node(j);
        if (node >= voltage.size()) fail(ErrorCode::UnknownChannelTarget, schema[j].name());
        const Complex v = voltage[node];
        switch (schema[j].kind) {
            case ChannelKind::PInjection:
            case ChannelKind::QInjection: {
                Complex current{};
                for (Eigen::Index k = 0; k < n; ++k) current += admittance(static_cast<Eigen::Index>(node), k) * voltage[static_cast<std::size_t>(k)];
                const Complex s = v * std::conj(current);
                z.values[j] = schema[j].kind == ChannelKind::PInjection ? s.real() : s.imag();
                break;
            }
            case ChannelKind::VMagnitude: z.values[j] = std::abs(v); break;
            case ChannelKind::VAngle: z.values[j] = std::arg(v); break;
        }
    }
    return z;
}

MeasurementVector add_noise(const MeasurementVector& z, std::span<const double> sigma, std::uint64_t seed) {
    if (sigma.size() != z.values.size()) fail(ErrorCode::LengthMismatch, "sigma does not match the measurement vector");
    MeasurementVector out = z;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t j = 0; j < sigma.size(); ++j) {
        const double draw = normal(rng);
        out.values[j] += sigma[j] * draw;
    }
    return out;
}

MeasurementVector add_noise(const MeasurementVector& z, const MeasurementSchema& schema, std::uint64_t seed) {
    const auto sigma = schema.sigmas();
    return add_noise(z, sigma, seed);
}

std::pair<MeasurementVector, MaskVector> apply_mask(const MeasurementVector& z, std::span<const double> alpha,
                                                     std::uint64_t seed) {
    if (alpha.size() != z.values.size()) fail(ErrorCode::LengthMismatch, "alpha does not match the measurement vector");
    MeasurementVector out = z;
    MaskVector mask{std::vector<std::uint8_t>(alpha.size(), 0)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        const double u = unit(rng);
        if (u < alpha[j]) {
            mask.missing[j] = 1;
            out.values[j] = 0.0;
        }
    }
    return {std::move(out), std::move(mask)};
}

std::pair<MeasurementVector, MaskVector> apply_mask(const MeasurementVector& z, const MeasurementSchema& schema,
                                                     std::uint64_t seed) {
    const auto alpha = schema.alphas();
    return apply_mask(z, alpha, seed);
}

std::vector<double> Dataset::normalized(std::size_t t) const {
    const auto& raw = z.at(t).values;
    const auto& miss = missing.at(t).missing;
    std::vector<double> out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j)
        out[j] = miss[j] ? 0.0 : (raw[j] - norm.mean[j]) / norm.stddev[j];
    return out;
}

void compute_normalization(Dataset& dataset) {
    const std::size_t m = dataset.channels();
    dataset.norm.mean.assign(m, 0.0);
    dataset.norm.stddev.assign(m, 1.0);
    const std::size_t rows = std::min(dataset.train_steps, dataset.steps());
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < rows; ++t) {
            if (dataset.missing[t].missing[j]) continue;
            sum += dataset.z[t].values[j];
            ++count;
        }
        if (count == 0) continue;
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t t = 0; t < rows; ++t) {
            if (dataset.missing[t].missing[j]) continue;
            const double d = dataset.z[t].values[j] - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(count));
        dataset.norm.mean[j] = mean;
        dataset.norm.stddev[j] = sd > 1e-12 ? sd : 1.0;
    }
}

void set_train_fraction(Dataset& dataset, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1]");
    dataset.train_steps = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.steps())));
    if (dataset.train_steps == 0 && dataset.steps() > 0) dataset.train_steps = 1;
    compute_normalization(dataset);
}

Dataset build_dataset(const grid::FeederModel& feeder, const std::vector<grid::LoadScenario>& profiles,
                      const MeasurementSchema& schema, std::uint64_t seed, const BuildOptions& options) {
    if (profiles.empty()) fail(ErrorCode::InvalidArgument, "load profile is empty");
    if (!schema.bound()) fail(ErrorCode::UnknownChannelTarget, "schema is not bound to a feeder");
    Dataset ds;
    ds.channel_names = schema.names();
    ds.state_labels = state_labels(feeder);
    const Eigen::MatrixXcd y = grid::admittance_matrix(feeder);
    const auto sigma = schema.sigmas();
    for (std::size_t t = 0; t < profiles.size(); ++t) {
        grid::VoltageSolution sol;
        try {
            sol = grid::solve_power_flow(feeder, profiles[t], options.pf_tol, options.pf_max_iter);
        } catch (const Error& e) {
            throw StepError(e.code(), t, e.detail());
        }
        auto z = measure(sol.voltage, y, schema);
        if (options.noise) z = add_noise(z, sigma, derive_seed(seed, seed_stream::noise, t));
        z.time = t;
        ds.z.push_back(std::move(z));
        ds.missing.push_back(MaskVector{std::vector<std::uint8_t>(schema.size(), 0)});
        ds.x.push_back(state_from_voltages(feeder, sol.voltage));
    }
    set_train_fraction(ds, options.train_fraction);
    return ds;
}

}  // namespace dtse::telemetry
