#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "csv_util.hpp"
#include "dtse/error.hpp"
#include "dtse/model.hpp"
#include "dtse/random.hpp"

namespace dtse::model {

std::vector<std::vector<double>> masked_inputs(const telemetry::Dataset& dataset, std::span<const double> alpha,
                                               std::uint64_t seed, std::uint64_t stream,
                                               std::vector<telemetry::MaskVector>* masks) {
    std::vector<std::vector<double>> rows;
    rows.reserve(dataset.steps());
    if (masks) masks->clear();
    const std::vector<double> none(dataset.channels(), 0.0);
    const std::span<const double> a = alpha.empty() ? std::span<const double>(none) : alpha;
    for (std::size_t t = 0; t < dataset.steps(); ++t) {
        telemetry::MeasurementVector z{dataset.normalized(t), t};
        auto [masked, mask] = telemetry::apply_mask(z, a, derive_seed(seed, stream, t));
        for (std::size_t j = 0; j < mask.missing.size(); ++j) mask.missing[j] |= dataset.missing[t].missing[j];
        rows.push_back(std::move(masked.values));
        if (masks) masks->push_back(std::move(mask));
    }
    return rows;
}

std::vector<std::vector<double>> estimate_series(const DtModel& model, const telemetry::Dataset& dataset,
                                                 std::span<const std::vector<double>> inputs, std::size_t first,
                                                 std::size_t last) {
    const auto& c = model.config();
    std::vector<std::vector<double>> out;
    for (std::size_t t = std::max(first, c.window - 1); t < std::min(last, dataset.steps()); ++t) {
        const Tensor est = model.estimate_voltages(make_window(inputs, dataset, t, c));
        const auto row = est.rows() - 1;
        std::vector<double> x(est.cols());
        for (std::size_t k = 0; k < est.cols(); ++k) x[k] = est(row, k);
        out.push_back(std::move(x));
    }
    return out;
}

TrainResult train(const telemetry::Dataset& dataset, const ModelConfig& requested) {
    ModelConfig config = requested;
    if (config.standardize_targets && config.output_offset.empty() && config.output_scale.empty())
        fit_output_scaling(config, dataset);
    config.validate();
    if (dataset.steps() <= config.window)
        fail(ErrorCode::InvalidArgument, "dataset needs more than " + std::to_string(config.window) + " steps");
    if (!config.train_alpha.empty() && config.train_alpha.size() != dataset.channels())
        fail(ErrorCode::LengthMismatch, "train_alpha must list one probability per channel");
    if (config.channel_count() != dataset.channels())
        fail(ErrorCode::ShapeMismatch, "branch split does not cover the dataset channels");

    TrainResult result{DtModel::initialize(config), {}};
    DtModel& model = result.model;
    ad::Optimizer optimizer(ad::OptimizerConfig{config.optimizer, config.lr});

    // window end steps entirely inside the training split
    std::vector<std::size_t> train_ends;
    for (std::size_t e = config.window - 1; e < dataset.train_steps; ++e) train_ends.push_back(e);
    if (config.max_train_windows && train_ends.size() > config.max_train_windows)
        train_ends.resize(config.max_train_windows);
    if (train_ends.empty()) fail(ErrorCode::InvalidArgument, "training split is shorter than one window");
    std::vector<std::size_t> valid_ends;
    for (std::size_t e = dataset.train_steps + config.window - 1; e < dataset.steps(); ++e) valid_ends.push_back(e);

    const auto valid_inputs = masked_inputs(dataset, config.train_alpha, config.seed, seed_stream::valid_mask);
    std::mt19937_64 shuffler(derive_seed(config.seed, seed_stream::shuffle));

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto inputs =
            masked_inputs(dataset, config.train_alpha, derive_seed(config.seed, seed_stream::train_mask, epoch),
                          seed_stream::train_mask);
        std::vector<std::size_t> order = train_ends;
        if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffler);

        double total = 0.0;
        for (std::size_t end : order) {
            const Window w = make_window(inputs, dataset, end, config);
            Tape tape;
            double value = 0.0;
            try {
                const Var est = model.forward_trainable(tape, w);
                const Var l = loss(tape, est, tape.constant(w.target));
                value = tape.value(l).item();
                tape.backward(l);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::NonFiniteValue)
                    fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
                throw;
            }
            if (!std::isfinite(value)) fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch));
            total += value;
            optimizer.step(model.params());
        }

        EpochLoss rec;
        rec.epoch = epoch;
        rec.train = total / static_cast<double>(order.size());
        if (valid_ends.empty()) {
            rec.validation = std::numeric_limits<double>::quiet_NaN();
        } else {
            double vt = 0.0;
            for (std::size_t end : valid_ends) {
                const Window w = make_window(valid_inputs, dataset, end, config);
                vt += loss(model.estimate_voltages(w), w.target);
            }
            rec.validation = vt / static_cast<double>(valid_ends.size());
            if (!std::isfinite(rec.validation)) fail(ErrorCode::NonFiniteLoss, "validation loss at epoch " + std::to_string(epoch));
        }
        result.history.push_back(rec);
    }
    return result;
}

void write_history_csv(const std::vector<EpochLoss>& history, const std::string& path) {
    auto out = csv::open_for_write(path);
    out << "epoch,train_loss,val_loss\n";
    for (const auto& h : history) {
        out << h.epoch << ',' << csv::format(h.train) << ',';
        if (std::isfinite(h.validation)) out << csv::format(h.validation);
        out << '\n';
    }
    if (!out) fail(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace dtse::model
