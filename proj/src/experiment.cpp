#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "csv_util.hpp"
#include "dtse/bench.hpp"
#include "dtse/error.hpp"
#include "dtse/random.hpp"
#include "dtse/wls.hpp"

namespace dtse::bench {

using nlohmann::json;

namespace {

constexpr int kConfigFormatVersion = 1;

std::string resolve(const std::string& path, const std::string& base) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base) / p).lexically_normal().string();
}

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::ConfigError, what); }

}  // namespace

std::string apply_overrides(const std::string& json_text, const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        config_error(std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) config_error("override '" + item + "' must look like key.path=value");
        const std::string key = item.substr(0, eq);
        const std::string raw = item.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;
        }
        json* node = &doc;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) config_error("override '" + item + "' has an empty key segment");
            if (!node->is_object()) config_error("override '" + item + "' descends into a non-object");
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        *node = value;
    }
    return doc.dump();
}

void ExperimentConfig::validate() const {
    if (feeder_path.empty()) config_error("'feeder' is required");
    if (measurements_csv.empty() != states_csv.empty())
        config_error("'dataset' needs both 'measurements' and 'states' paths");
    if (channels.empty()) config_error("'channels' must list at least one rule");
    if (profile.steps < 2) config_error("profile.steps must be at least 2");
    if (!(profile.period > 0.0)) config_error("profile.period must be positive");
    if (eval_alphas.empty()) config_error("evaluation.alphas must not be empty");
    for (double a : eval_alphas)
        if (!(a >= 0.0 && a <= 0.95)) config_error("evaluation alphas must lie in [0, 0.95]");
    if (seeds.empty()) config_error("evaluation.seeds must list at least one seed");
    if (jobs < 1) config_error("jobs must be at least 1");
    if (!(pf_tol > 0.0) || pf_max_iter < 1) config_error("power_flow tol and max_iter must be positive");
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const std::string& base_dir) {
    ExperimentConfig c;
    try {
        const json j = json::parse(text);
        const int version = j.value("format_version", kConfigFormatVersion);
        if (version != kConfigFormatVersion) config_error("unsupported config format_version " + std::to_string(version));
        c.feeder_path = resolve(j.at("feeder").get<std::string>(), base_dir);
        if (j.contains("dataset")) {
            c.measurements_csv = resolve(j["dataset"].value("measurements", ""), base_dir);
            c.states_csv = resolve(j["dataset"].value("states", ""), base_dir);
        }
        c.data_seed = j.value("data_seed", c.data_seed);
        c.noise = j.value("noise", c.noise);
        if (j.contains("power_flow")) {
            c.pf_tol = j["power_flow"].value("tol", c.pf_tol);
            c.pf_max_iter = j["power_flow"].value("max_iter", c.pf_max_iter);
        }
        if (j.contains("profile")) {
            const auto& p = j["profile"];
            c.profile.steps = p.value("steps", c.profile.steps);
            c.profile.period = p.value("period", c.profile.period);
            c.profile.amplitude = p.value("amplitude", c.profile.amplitude);
            c.profile.jitter = p.value("jitter", c.profile.jitter);
            c.profile.bus_scale_spread = p.value("bus_scale_spread", c.profile.bus_scale_spread);
        }
        for (const auto& r : j.at("channels")) {
            ChannelRule rule;
            rule.kind = telemetry::kind_from_tag(r.at("kind").get<std::string>());
            const auto& buses = r.at("buses");
            if (buses.is_string()) {
                if (buses.get<std::string>() != "*") rule.buses.push_back(buses.get<std::string>());
            } else {
                rule.buses = buses.get<std::vector<std::string>>();
            }
            rule.phases = r.value("phases", "");
            rule.sigma = r.at("sigma").get<double>();
            rule.alpha = r.value("alpha", 0.0);
            c.channels.push_back(std::move(rule));
        }
        if (j.contains("model")) {
            const auto& m = j["model"];
            auto& mc = c.model;
            mc.d = m.value("d", mc.d);
            mc.d_ff = m.value("d_ff", mc.d_ff);
            mc.blocks = m.value("blocks", mc.blocks);
            mc.heads = m.value("heads", mc.heads);
            mc.groups = m.value("groups", mc.groups);
            mc.window = m.value("window", mc.window);
            mc.epochs = m.value("epochs", mc.epochs);
            mc.lr = m.value("lr", mc.lr);
            mc.optimizer = ad::optimizer_from_name(m.value("optimizer", std::string(ad::optimizer_name(mc.optimizer))));
            mc.seed = m.value("seed", mc.seed);
            mc.shuffle = m.value("shuffle", mc.shuffle);
            mc.positional_encoding = m.value("positional_encoding", mc.positional_encoding);
            mc.max_train_windows = m.value("max_train_windows", mc.max_train_windows);
            mc.standardize_targets = m.value("standardize_targets", mc.standardize_targets);
        }
        c.ablation = j.value("ablation", c.ablation);
        if (j.contains("wls")) {
            c.wls.enabled = j["wls"].value("enabled", c.wls.enabled);
            c.wls.tol = j["wls"].value("tol", c.wls.tol);
            c.wls.max_iter = j["wls"].value("max_iter", c.wls.max_iter);
        }
        if (j.contains("evaluation")) {
            const auto& e = j["evaluation"];
            if (e.contains("alphas")) c.eval_alphas = e["alphas"].get<std::vector<double>>();
            if (e.contains("seeds")) c.seeds = e["seeds"].get<std::vector<std::uint64_t>>();
            c.timeseries_node = e.value("timeseries_node", "");
            if (e.contains("timeseries_alpha")) c.timeseries_alpha = e["timeseries_alpha"].get<double>();
        }
        c.output_dir = resolve(j.value("output_dir", c.output_dir), base_dir);
        c.checkpoint = resolve(j.value("checkpoint", ""), base_dir);
        c.jobs = j.value("jobs", c.jobs);
    } catch (const json::exception& e) {
        config_error(std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        config_error(e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto base = std::filesystem::path(path).parent_path().string();
    return from_json(apply_overrides(buf.str(), overrides), base.empty() ? "." : base);
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["format_version"] = kConfigFormatVersion;
    j["feeder"] = feeder_path;
    if (!measurements_csv.empty()) j["dataset"] = {{"measurements", measurements_csv}, {"states", states_csv}};
    j["data_seed"] = data_seed;
    j["noise"] = noise;
    j["power_flow"] = {{"tol", pf_tol}, {"max_iter", pf_max_iter}};
    j["profile"] = {{"steps", profile.steps},
                    {"period", profile.period},
                    {"amplitude", profile.amplitude},
                    {"jitter", profile.jitter},
                    {"bus_scale_spread", profile.bus_scale_spread}};
    j["channels"] = json::array();
    for (const auto& r : channels) {
        json rule = {{"kind", std::string(telemetry::kind_tag(r.kind))}, {"sigma", r.sigma}, {"alpha", r.alpha}};
        rule["buses"] = r.buses.empty() ? json("*") : json(r.buses);
        if (!r.phases.empty()) rule["phases"] = r.phases;
        j["channels"].push_back(rule);
    }
    j["model"] = {{"d", model.d},
                  {"d_ff", model.d_ff},
                  {"blocks", model.blocks},
                  {"heads", model.heads},
                  {"groups", model.groups},
                  {"window", model.window},
                  {"epochs", model.epochs},
                  {"lr", model.lr},
                  {"optimizer", ad::optimizer_name(model.optimizer)},
                  {"seed", model.seed},
                  {"shuffle", model.shuffle},
                  {"positional_encoding", model.positional_encoding},
                  {"max_train_windows", model.max_train_windows},
                  {"standardize_targets", model.standardize_targets}};
    j["ablation"] = ablation;
    j["wls"] = {{"enabled", wls.enabled}, {"tol", wls.tol}, {"max_iter", wls.max_iter}};
    j["evaluation"] = {{"alphas", eval_alphas}, {"seeds", seeds}, {"timeseries_node", timeseries_node}};
    if (timeseries_alpha) j["evaluation"]["timeseries_alpha"] = *timeseries_alpha;
    j["output_dir"] = output_dir;
    if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
    j["jobs"] = jobs;
    return j.dump(2);
}

telemetry::MeasurementSchema build_schema(const grid::FeederModel& feeder, std::span<const ChannelRule> rules) {
    std::vector<telemetry::Channel> channels;
    for (const auto& rule : rules) {
        std::vector<std::size_t> buses;
        if (rule.buses.empty()) {
            for (std::size_t b = 0; b < feeder.buses().size(); ++b)
                if (b != feeder.slack()) buses.push_back(b);
        } else {
            for (const auto& id : rule.buses) {
                auto b = feeder.bus_index(id);
                if (!b) fail(ErrorCode::UnknownChannelTarget, "channel rule names unknown bus '" + id + "'");
                buses.push_back(*b);
            }
        }
        for (std::size_t b : buses) {
            std::vector<int> phases;
            if (rule.phases.empty())
                phases = feeder.buses()[b].phases;
            else
                for (char ch : rule.phases) phases.push_back(grid::phase_index(ch));
            for (int p : phases)
                channels.push_back(telemetry::Channel{rule.kind, feeder.buses()[b].id, p, rule.sigma, rule.alpha});
        }
    }
    return telemetry::MeasurementSchema(std::move(channels), feeder);
}

std::vector<grid::LoadScenario> generate_profiles(const grid::FeederModel& feeder, const ProfileConfig& profile,
                                                  std::uint64_t seed) {
    const std::size_t nb = feeder.buses().size();
    std::vector<double> scale(nb, 1.0), shift(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        std::mt19937_64 rng(derive_seed(seed, seed_stream::profile, b));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        scale[b] = 1.0 + profile.bus_scale_spread * (2.0 * unit(rng) - 1.0);
        shift[b] = 0.5 * unit(rng);
    }
    const auto& nominal = feeder.nominal_loads().demand;
    const auto& nodes = feeder.phase_nodes();
    std::vector<grid::LoadScenario> out;
    out.reserve(profile.steps);
    for (std::size_t t = 0; t < profile.steps; ++t) {
        std::mt19937_64 rng(derive_seed(seed, seed_stream::profile + 1, t));
        std::normal_distribution<double> normal(0.0, 1.0);
        grid::LoadScenario s{std::vector<grid::Complex>(nodes.size())};
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const std::size_t b = nodes[i].bus;
            const double daily =
                1.0 + profile.amplitude *
                          std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / profile.period + shift[b]);
            const double factor = std::max(0.0, daily * scale[b] * (1.0 + profile.jitter * normal(rng)));
            s.demand[i] = nominal[i] * factor;
        }
        out.push_back(std::move(s));
    }
    return out;
}

Experiment prepare(const ExperimentConfig& config) {
    config.validate();
    auto feeder = grid::load_feeder(config.feeder_path);
    auto schema = build_schema(feeder, config.channels);
    telemetry::Dataset dataset;
    if (!config.measurements_csv.empty()) {
        dataset = telemetry::import_csv(config.measurements_csv, config.states_csv, schema);
        if (dataset.state_labels != telemetry::state_labels(feeder))
            fail(ErrorCode::HeaderMismatch, config.states_csv + ": state columns do not match the feeder");
    } else {
        const auto profiles = generate_profiles(feeder, config.profile, config.data_seed);
        telemetry::BuildOptions opts;
        opts.pf_tol = config.pf_tol;
        opts.pf_max_iter = config.pf_max_iter;
        opts.noise = config.noise;
        dataset = telemetry::build_dataset(feeder, profiles, schema, config.data_seed, opts);
    }
    return Experiment{config, std::move(feeder), std::move(schema), std::move(dataset)};
}

model::ModelConfig model_config(const Experiment& experiment, model::Architecture architecture) {
    model::ModelConfig mc = experiment.config.model;
    mc.architecture = architecture;
    mc.state_dim = experiment.dataset.state_dim();
    model::assign_branches(mc, experiment.schema);
    mc.train_alpha = experiment.schema.alphas();
    return mc;
}

model::TrainResult train_model(const Experiment& experiment, model::Architecture architecture) {
    return model::train(experiment.dataset, model_config(experiment, architecture));
}

model::TrainResult ablation_concat(const Experiment& experiment) {
    return train_model(experiment, model::Architecture::Concat);
}

std::size_t evaluation_begin(const telemetry::Dataset& dataset) { return dataset.train_steps; }

namespace {

std::vector<double> uniform(std::size_t n, double alpha) { return std::vector<double>(n, alpha); }

WlsOutcome run_wls_masked(const Experiment& ex, const std::vector<telemetry::MaskVector>& masks) {
    WlsOutcome out;
    const auto& ds = ex.dataset;
    const auto x0 = wls::flat_start(ex.feeder);
    wls::GaussNewtonOptions opts;
    opts.tol = ex.config.wls.tol;
    opts.max_iter = ex.config.wls.max_iter;
    for (std::size_t t = evaluation_begin(ds); t < ds.steps(); ++t) {
        auto problem = wls::make_problem(ex.feeder, ex.schema, ds.z[t].values, masks[t]);
        try {
            auto est = wls::estimate_wls(problem, x0, opts);
            out.estimates.push_back(std::move(est.x));
            ++out.solved;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::RankDeficient)
                ++out.rank_deficient;
            else if (e.code() == ErrorCode::NoConvergence)
                ++out.no_convergence;
            else
                throw;
            out.estimates.emplace_back();
        }
    }
    return out;
}

void push_metrics(std::vector<MetricRow>& rows, const std::string& method, double alpha, std::uint64_t seed,
                  const ErrorMetrics& m) {
    rows.push_back({method, alpha, seed, "rmse_pct", m.rmse_pct});
    rows.push_back({method, alpha, seed, "mae_mag", m.mae_mag});
    rows.push_back({method, alpha, seed, "mae_ang", m.mae_ang});
}

struct PointResult {
    std::vector<MetricRow> rows;
    std::optional<Trace> trace;
};

std::optional<std::size_t> state_index(const telemetry::Dataset& ds, const std::string& node) {
    const auto it = std::find(ds.state_labels.begin(), ds.state_labels.end(), "re:" + node);
    if (it == ds.state_labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ds.state_labels.begin());
}

double magnitude(const std::vector<double>& x, std::size_t k) {
    if (x.empty()) return NAN;
    return std::hypot(x[k], x[x.size() / 2 + k]);
}

PointResult evaluate_point(const Experiment& ex, const model::DtModel* dt, const model::DtModel* ablation, double alpha,
                           std::uint64_t seed, bool with_trace) {
    PointResult res;
    const auto& ds = ex.dataset;
    const std::size_t begin = evaluation_begin(ds);
    std::vector<telemetry::MaskVector> masks;
    const auto a = uniform(ds.channels(), alpha);
    const auto inputs = model::masked_inputs(ds, a, seed, seed_stream::eval_mask, &masks);

    struct Named {
        std::string name;
        std::vector<std::vector<double>> est;
        std::size_t first;
    };
    std::vector<Named> series;
    for (auto [name, m] : {std::pair<const char*, const model::DtModel*>{"dt", dt}, {"ablation", ablation}}) {
        if (!m) continue;
        const std::size_t first = std::max(begin, m->config().window - 1);
        auto est = model::estimate_series(*m, ds, inputs, begin, ds.steps());
        const std::vector<std::vector<double>> truth(ds.x.begin() + static_cast<std::ptrdiff_t>(first), ds.x.end());
        push_metrics(res.rows, name, alpha, seed, compute_metrics(est, truth));
        series.push_back({name, std::move(est), first});
    }
    if (ex.config.wls.enabled) {
        auto outcome = run_wls_masked(ex, masks);
        std::vector<std::vector<double>> est, truth;
        for (std::size_t i = 0; i < outcome.estimates.size(); ++i) {
            if (outcome.estimates[i].empty()) continue;
            est.push_back(outcome.estimates[i]);
            truth.push_back(ds.x[begin + i]);
        }
        if (!est.empty()) push_metrics(res.rows, "wls", alpha, seed, compute_metrics(est, truth));
        const double total = static_cast<double>(outcome.estimates.size());
        res.rows.push_back({"wls", alpha, seed, "rank_deficient_fraction",
                            total > 0 ? static_cast<double>(outcome.rank_deficient) / total : 0.0});
        series.push_back({"wls", std::move(outcome.estimates), begin});
    }

    if (with_trace) {
        if (auto k = state_index(ds, ex.config.timeseries_node)) {
            Trace tr;
            tr.node = ex.config.timeseries_node;
            tr.alpha = alpha;
            tr.seed = seed;
            for (std::size_t t = begin; t < ds.steps(); ++t) {
                tr.steps.push_back(t);
                tr.truth.push_back(magnitude(ds.x[t], *k));
            }
            for (const auto& s : series) {
                std::vector<double> mags(tr.steps.size(), NAN);
                for (std::size_t i = 0; i < s.est.size(); ++i) mags[s.first - begin + i] = magnitude(s.est[i], *k);
                tr.estimates.emplace_back(s.name, std::move(mags));
            }
            res.trace = std::move(tr);
        }
    }
    return res;
}

template <typename Fn>
std::vector<PointResult> run_points(std::size_t count, int jobs, Fn&& fn, std::vector<PointResult>& done,
                                    std::exception_ptr& error) {
    std::vector<std::optional<PointResult>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    auto work = [&](std::size_t i) {
        try {
            slots[i] = fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            work(i);
            if (errors[i]) break;
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min<int>(jobs, static_cast<int>(count)); ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) work(i);
            });
        for (auto& th : pool) th.join();
    }
    // completed points, in order, up to the first failure
    for (std::size_t i = 0; i < count; ++i) {
        if (errors[i]) {
            error = errors[i];
            break;
        }
        if (!slots[i]) break;
        done.push_back(std::move(*slots[i]));
    }
    return {};
}

void evaluate_into(const Experiment& ex, const model::DtModel* dt, const model::DtModel* ablation, MetricsReport& report) {
    const auto& cfg = ex.config;
    const double trace_alpha = cfg.timeseries_alpha.value_or(cfg.eval_alphas.front());
    std::vector<std::pair<double, std::uint64_t>> points;
    for (double a : cfg.eval_alphas)
        for (auto s : cfg.seeds) points.emplace_back(a, s);
    bool trace_taken = false;
    std::vector<bool> want_trace(points.size(), false);
    if (!cfg.timeseries_node.empty())
        for (std::size_t i = 0; i < points.size() && !trace_taken; ++i)
            if (points[i].first == trace_alpha) want_trace[i] = trace_taken = true;

    std::vector<PointResult> done;
    std::exception_ptr error;
    run_points(
        points.size(), cfg.jobs,
        [&](std::size_t i) { return evaluate_point(ex, dt, ablation, points[i].first, points[i].second, want_trace[i]); },
        done, error);
    for (auto& r : done) {
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
        if (r.trace) report.trace = std::move(r.trace);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

WlsOutcome run_wls(const Experiment& experiment, double alpha, std::uint64_t seed) {
    std::vector<telemetry::MaskVector> masks;
    model::masked_inputs(experiment.dataset, uniform(experiment.dataset.channels(), alpha), seed,
                         seed_stream::eval_mask, &masks);
    return run_wls_masked(experiment, masks);
}

MetricsReport evaluate(const Experiment& experiment, const model::DtModel* dt, const model::DtModel* ablation) {
    MetricsReport report;
    evaluate_into(experiment, dt, ablation, report);
    return report;
}

MetricsReport wls_monte_carlo(const Experiment& experiment) {
    const auto& cfg = experiment.config;
    std::vector<std::pair<double, std::uint64_t>> points;
    for (double a : cfg.eval_alphas)
        for (auto s : cfg.seeds) points.emplace_back(a, s);
    std::vector<PointResult> done;
    std::exception_ptr error;
    run_points(
        points.size(), cfg.jobs,
        [&](std::size_t i) {
            const auto [alpha, seed] = points[i];
            const auto out = run_wls(experiment, alpha, seed);
            const double total = static_cast<double>(out.estimates.size());
            PointResult r;
            r.rows.push_back({"wls", alpha, seed, "rank_deficient_fraction",
                              total > 0 ? static_cast<double>(out.rank_deficient) / total : 0.0});
            r.rows.push_back({"wls", alpha, seed, "solved_fraction",
                              total > 0 ? static_cast<double>(out.solved) / total : 0.0});
            return r;
        },
        done, error);
    MetricsReport report;
    for (auto& r : done) report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
    if (error) std::rethrow_exception(error);
    return report;
}

MetricsReport run_sweep(const ExperimentConfig& config) {
    const Experiment ex = prepare(config);
    std::filesystem::create_directories(config.output_dir);
    {
        auto out = csv::open_for_write((std::filesystem::path(config.output_dir) / "config.json").string());
        out << config.to_json() << '\n';
    }
    MetricsReport report;
    auto dt = train_model(ex, model::Architecture::Interactive);
    const auto dir = std::filesystem::path(config.output_dir);
    model::write_history_csv(dt.history, (dir / "history_dt.csv").string());
    dt.model.save((dir / "dt.ckpt").string());
    auto info = [](const char* name, const model::TrainResult& r) {
        ModelInfo m{name, r.model.parameter_count(), NAN, NAN};
        if (!r.history.empty()) {
            m.final_train_loss = r.history.back().train;
            m.final_val_loss = r.history.back().validation;
        }
        return m;
    };
    report.models.push_back(info("dt", dt));
    std::optional<model::TrainResult> abl;
    if (config.ablation) {
        abl = ablation_concat(ex);
        model::write_history_csv(abl->history, (dir / "history_ablation.csv").string());
        report.models.push_back(info("ablation", *abl));
    }
    try {
        evaluate_into(ex, &dt.model, abl ? &abl->model : nullptr, report);
    } catch (...) {
        emit_report(report, config.output_dir);
        throw;
    }
    emit_report(report, config.output_dir);
    return report;
}

}  // namespace dtse::bench
