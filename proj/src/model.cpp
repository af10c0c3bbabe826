#include "dtse/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dtse/error.hpp"
#include "dtse/random.hpp"

namespace dtse::model {

const char* architecture_name(Architecture a) { return a == Architecture::Interactive ? "interactive" : "concat"; }

Architecture architecture_from_name(const std::string& name) {
    if (name == "interactive") return Architecture::Interactive;
    if (name == "concat") return Architecture::Concat;
    fail(ErrorCode::ConfigError, "unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
    auto bad = [](const std::string& what) { fail(ErrorCode::InvalidArgument, "model config: " + what); };
    if (d == 0 || d_ff == 0) bad("d and d_ff must be positive");
    if (heads == 0 || groups == 0) bad("heads and groups must be positive");
    if (heads % groups != 0) bad("heads must be a multiple of groups");
    if (d % heads != 0) bad("d must be a multiple of heads");
    if (window < 1) bad("window must be at least 1");
    if (state_dim == 0) bad("state_dim must be positive");
    if (power_channels.empty() || voltage_channels.empty()) bad("both branches need at least one channel");
    if (!(lr >= 0.0)) bad("learning rate must be non-negative");
    if (!output_offset.empty() && output_offset.size() != state_dim) bad("output_offset must have state_dim entries");
    if (!output_scale.empty() && output_scale.size() != state_dim) bad("output_scale must have state_dim entries");
    for (double s : output_scale)
        if (!(s > 0.0) || !std::isfinite(s)) bad("output_scale entries must be positive and finite");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["architecture"] = architecture_name(architecture);
    j["d"] = d;
    j["d_ff"] = d_ff;
    j["blocks"] = blocks;
    j["heads"] = heads;
    j["groups"] = groups;
    j["window"] = window;
    j["state_dim"] = state_dim;
    j["power_channels"] = power_channels;
    j["voltage_channels"] = voltage_channels;
    j["positional_encoding"] = positional_encoding;
    j["output_offset"] = output_offset;
    j["output_scale"] = output_scale;
    j["standardize_targets"] = standardize_targets;
    j["epochs"] = epochs;
    j["lr"] = lr;
    j["optimizer"] = ad::optimizer_name(optimizer);
    j["seed"] = seed;
    j["shuffle"] = shuffle;
    j["max_train_windows"] = max_train_windows;
    j["train_alpha"] = train_alpha;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    ModelConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.architecture = architecture_from_name(j.value("architecture", "interactive"));
        c.d = j.at("d");
        c.d_ff = j.at("d_ff");
        c.blocks = j.at("blocks");
        c.heads = j.at("heads");
        c.groups = j.at("groups");
        c.window = j.at("window");
        c.state_dim = j.at("state_dim");
        c.power_channels = j.at("power_channels").get<std::vector<std::size_t>>();
        c.voltage_channels = j.at("voltage_channels").get<std::vector<std::size_t>>();
        c.positional_encoding = j.value("positional_encoding", true);
        if (j.contains("output_offset")) c.output_offset = j["output_offset"].get<std::vector<double>>();
        if (j.contains("output_scale")) c.output_scale = j["output_scale"].get<std::vector<double>>();
        c.standardize_targets = j.value("standardize_targets", c.standardize_targets);
        c.epochs = j.value("epochs", c.epochs);
        c.lr = j.value("lr", c.lr);
        c.optimizer = ad::optimizer_from_name(j.value("optimizer", std::string("sgd")));
        c.seed = j.value("seed", c.seed);
        c.shuffle = j.value("shuffle", c.shuffle);
        c.max_train_windows = j.value("max_train_windows", c.max_train_windows);
        if (j.contains("train_alpha")) c.train_alpha = j["train_alpha"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("model config: ") + e.what());
    }
    return c;
}

void fit_output_scaling(ModelConfig& config, const telemetry::Dataset& dataset) {
    const std::size_t n = dataset.state_dim();
    const std::size_t rows = std::min(dataset.train_steps, dataset.steps());
    if (rows == 0) fail(ErrorCode::InvalidArgument, "training split is empty");
    std::vector<double> mean(n, 0.0), var(n, 0.0);
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t i = 0; i < n; ++i) mean[i] += dataset.x[t][i];
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t i = 0; i < n; ++i) var[i] += (dataset.x[t][i] - mean[i]) * (dataset.x[t][i] - mean[i]);
    std::vector<double> scale(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::sqrt(var[i] / static_cast<double>(rows));
        scale[i] = s < 1e-12 ? 1.0 : s;
    }
    config.output_offset = std::move(mean);
    config.output_scale = std::move(scale);
}

void assign_branches(ModelConfig& config, const telemetry::MeasurementSchema& schema) {
    config.power_channels = schema.power_channels();
    config.voltage_channels = schema.voltage_channels();
}

Window make_window(std::span<const std::vector<double>> inputs, const telemetry::Dataset& dataset,
                   std::size_t end_step, const ModelConfig& config) {
    const std::size_t t_len = config.window;
    if (end_step + 1 < t_len || end_step >= dataset.steps() || end_step >= inputs.size())
        fail(ErrorCode::InvalidArgument, "window ending at step " + std::to_string(end_step) + " is out of range");
    if (dataset.state_dim() != config.state_dim) fail(ErrorCode::ShapeMismatch, "dataset state dimension differs from config");
    Window w;
    w.end_step = end_step;
    w.z_power = Tensor(t_len, config.power_channels.size());
    w.z_volt = Tensor(t_len, config.voltage_channels.size());
    w.target = Tensor(t_len, config.state_dim);
    const std::size_t start = end_step + 1 - t_len;
    for (std::size_t r = 0; r < t_len; ++r) {
        const auto& row = inputs[start + r];
        if (row.size() != dataset.channels()) fail(ErrorCode::ShapeMismatch, "input row width differs from the dataset");
        for (std::size_t c = 0; c < config.power_channels.size(); ++c) w.z_power(r, c) = row.at(config.power_channels[c]);
        for (std::size_t c = 0; c < config.voltage_channels.size(); ++c) w.z_volt(r, c) = row.at(config.voltage_channels[c]);
        const auto& x = dataset.x[start + r];
        for (std::size_t k = 0; k < config.state_dim; ++k) w.target(r, k) = x[k];
    }
    return w;
}

Tensor positional_encoding(std::size_t steps, std::size_t d) {
    Tensor pe(steps, d);
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t i = 0; i < d; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
            const double angle = static_cast<double>(t) * rate;
            pe(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

Var project_branch(Tape& tape, Var z, Var weight, Var bias, const Tensor* encoding) {
    Var out = tape.add(tape.matmul(z, weight), bias);
    if (encoding) out = tape.add(out, tape.constant(*encoding));
    return out;
}

Var gqa_attention(Tape& tape, Var x, const AttentionWeights& w, std::size_t heads, std::size_t groups,
                  ForwardStats* stats) {
    const std::size_t d = tape.value(x).cols();
    if (heads == 0 || groups == 0 || heads % groups != 0 || d % heads != 0)
        fail(ErrorCode::ShapeMismatch, "gqa: d=" + std::to_string(d) + " H=" + std::to_string(heads) +
                                           " G=" + std::to_string(groups));
    if (w.wk.size() != groups || w.wv.size() != groups) fail(ErrorCode::ShapeMismatch, "gqa: expected one K/V weight per group");
    const std::size_t dk = d / heads;
    const std::size_t per_group = heads / groups;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    const Var q = tape.matmul(x, w.wq);
    std::vector<Var> keys, values;
    for (std::size_t g = 0; g < groups; ++g) {
        keys.push_back(tape.matmul(x, w.wk[g]));
        values.push_back(tape.matmul(x, w.wv[g]));
        if (stats) ++stats->kv_projections;
    }
    std::vector<Var> head_out;
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t g = h / per_group;
        const Var qh = tape.slice_cols(q, h * dk, (h + 1) * dk);
        const Var scores = tape.scale(tape.matmul(qh, tape.transpose(keys[g])), inv_sqrt_dk);
        head_out.push_back(tape.matmul(tape.row_softmax(scores), values[g]));
        if (stats) ++stats->query_heads;
    }
    if (stats) ++stats->attention_calls;
    const Var merged = tape.matmul(tape.concat_cols(std::span<const Var>(head_out)), w.wo);
    return tape.add(merged, x);
}

Var gate(Tape& tape, Var a, const GateWeights& w) {
    const Var hidden = tape.relu(tape.add(tape.matmul(a, w.w1), w.b1));
    return tape.sigmoid(tape.add(tape.matmul(hidden, w.w2), w.b2));
}

std::pair<Var, Var> cross_gate(Tape& tape, Var a1, Var a2, const GateWeights& gate1, const GateWeights& gate2) {
    const auto& s1 = tape.value(a1);
    const auto& s2 = tape.value(a2);
    if (!s1.same_shape(s2)) fail(ErrorCode::ShapeMismatch, "cross_gate: " + s1.shape_string() + " vs " + s2.shape_string());
    const Var h1 = tape.add(tape.mul(gate(tape, a2, gate2), a2), a1);
    const Var h2 = tape.add(tape.mul(gate(tape, a1, gate1), a1), a2);
    return {h1, h2};
}

Var loss(Tape& tape, Var estimate, Var truth) {
    if (!tape.value(estimate).same_shape(tape.value(truth)))
        fail(ErrorCode::ShapeMismatch, "loss: " + tape.value(estimate).shape_string() + " vs " +
                                           tape.value(truth).shape_string());
    return tape.mean_all(tape.square(tape.sub(estimate, truth)));
}

double loss(const Tensor& estimate, const Tensor& truth) {
    Tape tape;
    return tape.value(loss(tape, tape.constant(estimate), tape.constant(truth))).item();
}

// -- DtModel --

namespace {

struct BranchNames {
    std::string tag;
    std::size_t inputs;
};

std::vector<BranchNames> branches_of(const ModelConfig& c) {
    if (c.architecture == Architecture::Concat) return {{"all", c.channel_count()}};
    return {{"p", c.power_channels.size()}, {"v", c.voltage_channels.size()}};
}

}  // namespace

DtModel::DtModel(ModelConfig config, ad::ParameterSet params) : config_(std::move(config)), params_(std::move(params)) {
    if (config_.positional_encoding) encoding_ = positional_encoding(config_.window, config_.d);
}

DtModel DtModel::initialize(const ModelConfig& config) {
    config.validate();
    ad::ParameterSet ps;
    std::uint64_t counter = 0;
    auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        ps.add_uniform(name, rows, cols, derive_seed(config.seed, seed_stream::init, counter++));
    };
    const std::size_t d = config.d;
    const std::size_t dk = config.head_dim();
    const auto branches = branches_of(config);
    for (const auto& b : branches) {
        weight("proj." + b.tag + ".w", b.inputs, d);
        ps.add_zeros("proj." + b.tag + ".b", 1, d);
    }
    for (std::size_t k = 0; k < config.blocks; ++k) {
        for (const auto& b : branches) {
            const std::string pre = "block" + std::to_string(k) + "." + b.tag;
            weight(pre + ".attn.wq", d, d);
            for (std::size_t g = 0; g < config.groups; ++g) {
                weight(pre + ".attn.wk.g" + std::to_string(g), d, dk);
                weight(pre + ".attn.wv.g" + std::to_string(g), d, dk);
            }
            weight(pre + ".attn.wo", d, d);
            if (config.architecture == Architecture::Interactive) {
                weight(pre + ".gate.w1", d, config.d_ff);
                ps.add_zeros(pre + ".gate.b1", 1, config.d_ff);
                weight(pre + ".gate.w2", config.d_ff, d);
                ps.add_zeros(pre + ".gate.b2", 1, d);
            }
        }
    }
    for (const auto& b : branches) {
        weight("out." + b.tag + ".w", d, d);
        ps.add_zeros("out." + b.tag + ".b", 1, d);
    }
    weight("head.w1", d * branches.size(), config.d_ff);
    ps.add_zeros("head.b1", 1, config.d_ff);
    weight("head.w2", config.d_ff, config.state_dim);
    ps.add_zeros("head.b2", 1, config.state_dim);
    return DtModel(config, std::move(ps));
}

DtModel DtModel::from_parameters(const ModelConfig& config, ad::ParameterSet params) {
    config.validate();
    const DtModel reference = initialize(config);
    if (reference.params().size() != params.size())
        fail(ErrorCode::ShapeMismatch, "parameter count does not match the model config");
    for (const auto& p : reference.params()) {
        if (!params.contains(p.name)) fail(ErrorCode::ShapeMismatch, "missing parameter '" + p.name + "'");
        if (!params[p.name].value.same_shape(p.value)) fail(ErrorCode::ShapeMismatch, "shape of '" + p.name + "'");
    }
    return DtModel(config, std::move(params));
}

template <typename Leaf>
Var DtModel::build(Tape& tape, const Window& window, Leaf&& leaf, ForwardStats* stats) const {
    const auto& c = config_;
    if (window.z_power.rows() != c.window || window.z_volt.rows() != c.window ||
        window.z_power.cols() != c.power_channels.size() || window.z_volt.cols() != c.voltage_channels.size())
        fail(ErrorCode::ShapeMismatch, "window does not conform to the model config");
    const Tensor* enc = c.positional_encoding ? &encoding_ : nullptr;
    const auto branches = branches_of(c);

    std::vector<Var> inputs;
    if (c.architecture == Architecture::Concat) {
        inputs.push_back(tape.concat_cols({tape.constant(window.z_power), tape.constant(window.z_volt)}));
    } else {
        inputs.push_back(tape.constant(window.z_power));
        inputs.push_back(tape.constant(window.z_volt));
    }
    std::vector<Var> h;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const auto& tag = branches[i].tag;
        h.push_back(project_branch(tape, inputs[i], leaf("proj." + tag + ".w"), leaf("proj." + tag + ".b"), enc));
    }
    for (std::size_t k = 0; k < c.blocks; ++k) {
        std::vector<Var> attended;
        std::vector<GateWeights> gates;
        for (std::size_t i = 0; i < branches.size(); ++i) {
            const std::string pre = "block" + std::to_string(k) + "." + branches[i].tag;
            AttentionWeights aw;
            aw.wq = leaf(pre + ".attn.wq");
            for (std::size_t g = 0; g < c.groups; ++g) {
                aw.wk.push_back(leaf(pre + ".attn.wk.g" + std::to_string(g)));
                aw.wv.push_back(leaf(pre + ".attn.wv.g" + std::to_string(g)));
            }
            aw.wo = leaf(pre + ".attn.wo");
            attended.push_back(gqa_attention(tape, h[i], aw, c.heads, c.groups, stats));
            if (c.architecture == Architecture::Interactive)
                gates.push_back(GateWeights{leaf(pre + ".gate.w1"), leaf(pre + ".gate.b1"), leaf(pre + ".gate.w2"),
                                            leaf(pre + ".gate.b2")});
        }
        if (c.architecture == Architecture::Interactive) {
            auto [h1, h2] = cross_gate(tape, attended[0], attended[1], gates[0], gates[1]);
            h = {h1, h2};
        } else {
            h = attended;
        }
    }
    std::vector<Var> outs;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const auto& tag = branches[i].tag;
        outs.push_back(tape.add(tape.matmul(h[i], leaf("out." + tag + ".w")), leaf("out." + tag + ".b")));
    }
    const Var fused = outs.size() == 1 ? outs[0] : tape.concat_cols(std::span<const Var>(outs));
    const Var hidden = tape.relu(tape.add(tape.matmul(fused, leaf("head.w1")), leaf("head.b1")));
    Var out = tape.add(tape.matmul(hidden, leaf("head.w2")), leaf("head.b2"));
    if (!c.output_scale.empty()) out = tape.mul(out, tape.constant(Tensor(1, c.state_dim, c.output_scale)));
    if (!c.output_offset.empty()) out = tape.add(out, tape.constant(Tensor(1, c.state_dim, c.output_offset)));
    return out;
}

Var DtModel::forward_trainable(Tape& tape, const Window& window, ForwardStats* stats) {
    return build(tape, window, [&](const std::string& n) { return tape.parameter(params_[n]); }, stats);
}

Var DtModel::forward(Tape& tape, const Window& window, ForwardStats* stats) const {
    return build(tape, window, [&](const std::string& n) { return tape.constant(params_[n].value); }, stats);
}

Tensor DtModel::estimate_voltages(const Window& window) const {
    Tape tape;
    return tape.value(forward(tape, window));
}

void DtModel::save(const std::string& path) const { ad::save_checkpoint(path, params_, config_.to_json()); }

DtModel DtModel::load(const std::string& path) {
    auto ck = ad::load_checkpoint(path);
    if (ck.meta.empty()) fail(ErrorCode::ConfigError, path + ": checkpoint carries no model config");
    return from_parameters(ModelConfig::from_json(ck.meta), std::move(ck.params));
}

}  // namespace dtse::model
