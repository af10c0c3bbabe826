// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status 1 if any fails.
// usage: acceptance <work dir>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "dtse/bench.hpp"
#include "dtse/error.hpp"
#include "dtse/model.hpp"
#include "dtse/random.hpp"
#include "dtse/wls.hpp"
#include "support.hpp"

using namespace dtse;
using ad::Tape;
using ad::Tensor;
using ad::Var;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

model::ModelConfig tiny_config() {
    model::ModelConfig c;
    c.d = 4;
    c.d_ff = 6;
    c.blocks = 1;
    c.heads = 2;
    c.groups = 1;
    c.window = 2;
    c.state_dim = 3;
    c.power_channels = {0, 1};
    c.voltage_channels = {2};
    c.seed = 5;
    return c;
}

// 1: gradient checks over every tape op and the tiny model
Outcome autodiff() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    using Build = std::function<Var(Tape&, Var, std::uint64_t)>;
    const std::vector<std::pair<const char*, Build>> ops{
        {"matmul", [](Tape& t, Var x, std::uint64_t s) { return t.matmul(x, t.constant(random_tensor(t.value(x).cols(), 3, s))); }},
        {"matmul_rhs", [](Tape& t, Var x, std::uint64_t s) { return t.matmul(t.constant(random_tensor(2, t.value(x).rows(), s)), x); }},
        {"add", [](Tape& t, Var x, std::uint64_t s) { return t.add(x, t.constant(random_tensor(t.value(x).rows(), t.value(x).cols(), s))); }},
        {"add_row", [](Tape& t, Var x, std::uint64_t s) { return t.add(t.constant(random_tensor(4, t.value(x).cols(), s)), x); }},
        {"mul_row", [](Tape& t, Var x, std::uint64_t s) { return t.mul(t.constant(random_tensor(4, t.value(x).cols(), s)), x); }},
        {"sub", [](Tape& t, Var x, std::uint64_t s) { return t.sub(t.constant(random_tensor(t.value(x).rows(), t.value(x).cols(), s)), x); }},
        {"mul", [](Tape& t, Var x, std::uint64_t) { return t.mul(x, x); }},
        {"scale", [](Tape& t, Var x, std::uint64_t) { return t.scale(x, -2.5); }},
        {"transpose", [](Tape& t, Var x, std::uint64_t) { return t.transpose(x); }},
        {"row_softmax", [](Tape& t, Var x, std::uint64_t) { return t.row_softmax(x); }},
        {"sigmoid", [](Tape& t, Var x, std::uint64_t) { return t.sigmoid(x); }},
        {"relu", [](Tape& t, Var x, std::uint64_t) { return t.relu(x); }},
        {"concat_cols", [](Tape& t, Var x, std::uint64_t) { return t.concat_cols({x, t.scale(x, 3.0)}); }},
        {"slice_cols", [](Tape& t, Var x, std::uint64_t) { return t.slice_cols(x, t.value(x).cols() / 2, t.value(x).cols()); }},
        {"square", [](Tape& t, Var x, std::uint64_t) { return t.square(x); }},
    };
    double worst = 0.0;
    for (const auto& [name, build] : ops) {
        for (std::uint64_t s = 0; s < 20; ++s) {
            std::mt19937_64 rng(s);
            const std::size_t rows = 1 + rng() % 4, cols = 2 + rng() % 4;
            const bool row = std::string(name).ends_with("_row");
            Tensor x = random_tensor(row ? 1 : rows, cols, 100 + s);
            if (std::string(name) == "relu")
                for (auto& v : x.values())
                    if (std::abs(v) < 0.05) v += 0.1;
            const double err = ad::grad_check(
                [&, b = build](Tape& t, Var v) {
                    const Var y = b(t, v, 200 + s);
                    const auto& yv = t.value(y);
                    return t.mean_all(t.mul(y, t.constant(random_tensor(yv.rows(), yv.cols(), 300 + s))));
                },
                x);
            if (err >= 1e-4) o.require(false, std::string(name) + " error " + fmt("%.2e", err));
            worst = std::max(worst, err);
        }
    }
    o.note("ops max rel error " + fmt("%.2e", worst));

    const auto c = tiny_config();
    auto m = model::DtModel::initialize(c);
    std::uint64_t s = 60;
    for (auto& p : m.params())
        if (p.name.ends_with(".b") || p.name.ends_with("b1") || p.name.ends_with("b2"))
            p.value = random_tensor(p.value.rows(), p.value.cols(), s++, 0.3);
    model::Window w;
    w.z_power = random_tensor(2, 2, 8);
    w.z_volt = random_tensor(2, 1, 9);
    w.target = random_tensor(2, 3, 10);
    w.end_step = 1;
    const double err = ad::grad_check(
        [&](Tape& tape, ad::ParameterSet&) {
            return model::loss(tape, m.forward_trainable(tape, w), tape.constant(w.target));
        },
        m.params());
    o.require(err < 1e-4, "tiny model error " + fmt("%.2e", err));
    o.note("tiny model max rel error " + fmt("%.2e", err));
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "too slow");
    o.note(fmt("%.1f s", secs));
    return o;
}

// 2: h(x) at the power-flow solution reproduces the specified injections
Outcome measurement_consistency() {
    Outcome o;
    for (const auto& [name, f] : {std::pair{"2-bus", test::two_bus()}, std::pair{"8-bus", test::eight_bus()}}) {
        const auto schema = test::complete_schema(f);
        const auto sol = grid::solve_power_flow(f, f.nominal_loads());
        const auto z = telemetry::measure(sol.voltage, grid::admittance_matrix(f), schema).values;
        double worst = 0.0;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const auto node = schema.node(j);
            if (f.is_slack_node(node)) continue;
            const auto injection = -f.nominal_loads().demand[node];
            if (schema[j].kind == telemetry::ChannelKind::PInjection) worst = std::max(worst, std::abs(z[j] - injection.real()));
            if (schema[j].kind == telemetry::ChannelKind::QInjection) worst = std::max(worst, std::abs(z[j] - injection.imag()));
        }
        o.require(worst <= 1e-8, std::string(name) + " injection error " + fmt("%.2e", worst));
        o.note(std::string(name) + " max injection error " + fmt("%.1e", worst));

        const auto flat = grid::solve_power_flow(f, f.zero_loads());
        bool exact = true;
        for (std::size_t i = 0; i < f.phase_nodes().size(); ++i)
            exact = exact && flat.voltage[i] == f.slack_voltage()[static_cast<std::size_t>(f.phase_nodes()[i].phase)];
        o.require(exact, std::string(name) + " zero load not flat");
    }
    return o;
}

// 3: WLS recovery and weight-scale invariance
Outcome wls_exactness() {
    Outcome o;
    for (const auto& [name, f] : {std::pair{"2-bus", test::two_bus()}, std::pair{"8-bus", test::eight_bus()}}) {
        const auto schema = test::complete_schema(f);
        const auto sol = grid::solve_power_flow(f, f.nominal_loads(), 1e-12, 200);
        const auto truth = telemetry::state_from_voltages(f, sol.voltage);
        auto problem = wls::make_problem(f, schema, telemetry::measure(sol.voltage, grid::admittance_matrix(f), schema).values);
        const auto est = wls::estimate_wls(problem, wls::flat_start(f));
        double err = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) err = std::max(err, std::abs(est.x[i] - truth[i]));
        o.require(est.converged && err < 1e-6 && est.iterations <= 20,
                  std::string(name) + " recovery " + fmt("%.2e", err) + " in " + std::to_string(est.iterations));
        o.note(std::string(name) + " error " + fmt("%.1e", err) + " in " + std::to_string(est.iterations) + " it");

        // noisy readings so the argmin is not the truth, then W scaled by a constant
        std::mt19937_64 rng(4);
        std::normal_distribution<double> noise(0.0, 0.002);
        for (auto& v : problem.z) v += noise(rng);
        const auto a = wls::estimate_wls(problem, wls::flat_start(f));
        auto scaled = problem;
        scaled.weights *= 37.5;
        const auto b = wls::estimate_wls(scaled, wls::flat_start(f));
        double diff = 0.0;
        for (std::size_t i = 0; i < a.x.size(); ++i) diff = std::max(diff, std::abs(a.x[i] - b.x[i]));
        o.require(diff <= 1e-8, std::string(name) + " scale variance " + fmt("%.2e", diff));
    }
    return o;
}

// scalar-loop attention with residual
Tensor attention_oracle(const Tensor& x, const Tensor& wq, const std::vector<Tensor>& wk, const std::vector<Tensor>& wv,
                        const Tensor& wo, std::size_t heads, std::size_t groups) {
    const std::size_t n = x.rows(), d = x.cols(), dk = d / heads;
    const Tensor q = matmul(x, wq);
    Tensor cat(n, d);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t g = h / (heads / groups);
        const Tensor k = matmul(x, wk[g]), v = matmul(x, wv[g]);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> score(n);
            double top = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t e = 0; e < dk; ++e) s += q(i, h * dk + e) * k(j, e);
                score[j] = s / std::sqrt(static_cast<double>(dk));
                top = std::max(top, score[j]);
            }
            double z = 0.0;
            for (auto& s : score) z += (s = std::exp(s - top));
            for (std::size_t e = 0; e < dk; ++e) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += score[j] / z * v(j, e);
                cat(i, h * dk + e) = acc;
            }
        }
    }
    Tensor out = matmul(cat, wo);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
    return out;
}

// 4: grouped-query attention
Outcome gqa() {
    Outcome o;
    struct Shape {
        std::size_t t, d, heads, groups;
    };
    double worst = 0.0;
    std::uint64_t seed = 10;
    for (const auto& sh : {Shape{3, 4, 2, 1}, Shape{5, 8, 4, 2}, Shape{4, 8, 4, 1}, Shape{2, 6, 3, 3}}) {
        const Tensor x = random_tensor(sh.t, sh.d, seed++);
        const Tensor wq = random_tensor(sh.d, sh.d, seed++), wo = random_tensor(sh.d, sh.d, seed++);
        std::vector<Tensor> wk, wv;
        for (std::size_t g = 0; g < sh.groups; ++g) {
            wk.push_back(random_tensor(sh.d, sh.d / sh.heads, seed++));
            wv.push_back(random_tensor(sh.d, sh.d / sh.heads, seed++));
        }
        Tape tape;
        model::AttentionWeights w{tape.constant(wq), {}, {}, tape.constant(wo)};
        for (std::size_t g = 0; g < sh.groups; ++g) {
            w.wk.push_back(tape.constant(wk[g]));
            w.wv.push_back(tape.constant(wv[g]));
        }
        const Var xv = tape.constant(x);
        const Tensor out = tape.value(model::gqa_attention(tape, xv, w, sh.heads, sh.groups));
        const Tensor expected = attention_oracle(x, wq, wk, wv, wo, sh.heads, sh.groups);
        for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(out[i] - expected[i]));

        if (sh.groups == sh.heads) {
            // textbook multi-head attention, every head with its own K and V
            const std::size_t dk = sh.d / sh.heads;
            const Var q = tape.matmul(xv, tape.constant(wq));
            std::vector<Var> heads;
            for (std::size_t h = 0; h < sh.heads; ++h) {
                const Var k = tape.matmul(xv, w.wk[h]);
                const Var v = tape.matmul(xv, w.wv[h]);
                const Var s = tape.scale(tape.matmul(tape.slice_cols(q, h * dk, (h + 1) * dk), tape.transpose(k)),
                                         1.0 / std::sqrt(static_cast<double>(dk)));
                heads.push_back(tape.matmul(tape.row_softmax(s), v));
            }
            const Var mha = tape.add(tape.matmul(tape.concat_cols(std::span<const Var>(heads)), w.wo), xv);
            o.require(tape.value(mha) == out, "G = H differs from multi-head attention");
        }
    }
    o.require(worst < 1e-10, "oracle error " + fmt("%.2e", worst));
    o.note("oracle max error " + fmt("%.1e", worst));

    auto cfg = tiny_config();
    cfg.d = 8;
    cfg.heads = 4;
    for (std::size_t groups : {1, 2, 4}) {
        cfg.groups = groups;
        cfg.blocks = 3;
        const auto m = model::DtModel::initialize(cfg);
        model::Window w;
        w.z_power = random_tensor(cfg.window, 2, 1);
        w.z_volt = random_tensor(cfg.window, 1, 2);
        w.target = random_tensor(cfg.window, 3, 3);
        Tape tape;
        model::ForwardStats stats;
        m.forward(tape, w, &stats);
        o.require(stats.kv_projections == groups * 2 * 3,
                  "G=" + std::to_string(groups) + " counted " + std::to_string(stats.kv_projections) + " K/V projections");
    }
    o.note("K/V projections = G x 2 branches x blocks");
    return o;
}

struct GateTensors {
    Tensor w1, b1, w2, b2;
    GateTensors(std::size_t d, std::size_t d_ff, std::uint64_t seed, double bias = 0.0)
        : w1(random_tensor(d, d_ff, seed)), b1(random_tensor(1, d_ff, seed + 1)), w2(random_tensor(d_ff, d, seed + 2)),
          b2(random_tensor(1, d, seed + 3)) {
        if (bias != 0.0) {
            for (auto& v : w2.values()) v *= 1e-3;
            b2.fill(bias);
        }
    }
    model::GateWeights on(Tape& t) const { return {t.constant(w1), t.constant(b1), t.constant(w2), t.constant(b2)}; }
    Tensor eval(const Tensor& a) const {
        Tensor out(a.rows(), w2.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
            std::vector<double> hidden(w1.cols());
            for (std::size_t j = 0; j < w1.cols(); ++j) {
                double s = b1[j];
                for (std::size_t k = 0; k < a.cols(); ++k) s += a(r, k) * w1(k, j);
                hidden[j] = std::max(0.0, s);
            }
            for (std::size_t j = 0; j < w2.cols(); ++j) {
                double s = b2[j];
                for (std::size_t k = 0; k < hidden.size(); ++k) s += hidden[k] * w2(k, j);
                out(r, j) = 1.0 / (1.0 + std::exp(-s));
            }
        }
        return out;
    }
};

// 5: cross gating
Outcome gating() {
    Outcome o;
    const Tensor a1 = random_tensor(3, 4, 40), a2 = random_tensor(3, 4, 41);
    double closed = 0.0, open = 0.0, oracle = 0.0;
    {
        const GateTensors g1(4, 6, 42, -30.0), g2(4, 6, 43, -30.0);
        Tape t;
        auto [h1, h2] = model::cross_gate(t, t.constant(a1), t.constant(a2), g1.on(t), g2.on(t));
        for (std::size_t i = 0; i < a1.size(); ++i)
            closed = std::max({closed, std::abs(t.value(h1)[i] - a1[i]), std::abs(t.value(h2)[i] - a2[i])});
    }
    {
        const GateTensors g1(4, 6, 44, 30.0), g2(4, 6, 45, 30.0);
        Tape t;
        auto [h1, h2] = model::cross_gate(t, t.constant(a1), t.constant(a2), g1.on(t), g2.on(t));
        for (std::size_t i = 0; i < a1.size(); ++i)
            open = std::max({open, std::abs(t.value(h1)[i] - (a1[i] + a2[i])), std::abs(t.value(h2)[i] - (a1[i] + a2[i]))});
    }
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Tensor b1 = random_tensor(5, 4, 100 + s, 2.0), b2 = random_tensor(5, 4, 200 + s, 2.0);
        const GateTensors g1(4, 6, 300 + 4 * s), g2(4, 6, 500 + 4 * s);
        Tape t;
        auto [h1, h2] = model::cross_gate(t, t.constant(b1), t.constant(b2), g1.on(t), g2.on(t));
        const Tensor s1 = g1.eval(b1), s2 = g2.eval(b2);
        for (std::size_t i = 0; i < b1.size(); ++i)
            oracle = std::max({oracle, std::abs(t.value(h1)[i] - (s2[i] * b2[i] + b1[i])),
                               std::abs(t.value(h2)[i] - (s1[i] * b1[i] + b2[i]))});
    }
    o.require(closed < 1e-9, "closed-gate error " + fmt("%.2e", closed));
    o.require(open < 1e-9, "open-gate error " + fmt("%.2e", open));
    o.require(oracle < 1e-12, "oracle error " + fmt("%.2e", oracle));
    o.note("closed " + fmt("%.1e", closed) + ", open " + fmt("%.1e", open) + ", oracle " + fmt("%.1e", oracle));
    return o;
}

// 6: overfit 10 windows with the default optimizer
Outcome overfit() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = test::eight_bus();
    const auto schema = bench::build_schema(f, test::eight_bus_rules(0.0));
    bench::ProfileConfig profile;
    profile.steps = 100;
    telemetry::BuildOptions opts;
    opts.noise = false;
    const auto ds = telemetry::build_dataset(f, bench::generate_profiles(f, profile, 3), schema, 3, opts);

    model::ModelConfig c;  // library defaults apart from the smoke-test settings
    c.state_dim = ds.state_dim();
    model::assign_branches(c, schema);
    c.epochs = 500;
    c.lr = 1e-3;
    c.max_train_windows = 10;

    const auto inputs = model::masked_inputs(ds, {}, 0, seed_stream::eval_mask);
    auto mean_loss = [&](const model::DtModel& m) {
        double sum = 0.0;
        for (std::size_t e = c.window - 1; e < c.window - 1 + 10; ++e) {
            const auto w = model::make_window(inputs, ds, e, c);
            sum += model::loss(m.estimate_voltages(w), w.target);
        }
        return sum / 10.0;
    };
    const double initial = mean_loss(model::DtModel::initialize(c));
    const auto result = model::train(ds, c);
    const double final = mean_loss(result.model);
    const double secs = seconds_since(t0);
    const double ratio = final / initial;
    o.require(ratio < 0.01, "final/initial " + fmt("%.4f", ratio));
    o.require(secs < 300.0, "too slow");
    o.note("loss " + fmt("%.4g", initial) + " -> " + fmt("%.4g", final) + " (" + fmt("%.2f", 100.0 * ratio) + "%), " +
           fmt("%.1f s", secs));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bench::ExperimentConfig desk_config(const fs::path& out) {
    auto c = bench::ExperimentConfig::load(test::config("sweep.json"));
    c.output_dir = out.string();
    c.jobs = 1;
    return c;
}

// 7: the desk sweep
Outcome desk_sweep(const fs::path& work) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto config = desk_config(work / "sweep_a");
    const auto report = bench::run_sweep(config);
    const double secs = seconds_since(t0);

    const auto lo = report.mean("dt", 0.0, "mae_mag"), hi = report.mean("dt", 0.4, "mae_mag");
    o.require(lo && hi && *hi >= *lo, "DT MAE at 0.4 below MAE at 0");
    if (lo && hi) o.note("(a) DT MAE " + fmt("%.3e", *lo) + " at 0, " + fmt("%.3e", *hi) + " at 0.4");

    bool finite = true;
    for (double a : config.eval_alphas) {
        std::size_t rows = 0;
        for (const auto& r : report.rows)
            if (r.method == "dt" && r.alpha == a) {
                ++rows;
                finite = finite && std::isfinite(r.value);
            }
        finite = finite && rows == 3 * config.seeds.size();
    }
    o.require(finite, "DT estimates not finite at every alpha");

    auto mc_config = config;
    mc_config.eval_alphas = {0.0, 0.4};
    mc_config.seeds.clear();
    for (std::uint64_t s = 1; s <= 20; ++s) mc_config.seeds.push_back(s);
    const auto mc = bench::wls_monte_carlo(bench::prepare(mc_config));
    const auto f0 = mc.mean("wls", 0.0, "rank_deficient_fraction"), f4 = mc.mean("wls", 0.4, "rank_deficient_fraction");
    o.require(f0 && f4 && *f4 > *f0, "WLS failure fraction does not grow");
    if (f0 && f4) o.note("(b) WLS rank-deficient " + fmt("%.3f", *f0) + " at 0, " + fmt("%.3f", *f4) + " at 0.4 (20 seeds)");

    o.require(secs < 1800.0, "sweep too slow");
    o.note("(c) sweep " + fmt("%.1f s", secs));
    return o;
}

// 8: rerun determinism and summary recomputation
Outcome determinism(const fs::path& work) {
    Outcome o;
    bench::run_sweep(desk_config(work / "sweep_b"));
    const auto a = slurp(work / "sweep_a" / "metrics.csv"), b = slurp(work / "sweep_b" / "metrics.csv");
    o.require(!a.empty() && a == b, "metrics.csv differs between runs");

    const auto rows = bench::read_metrics_csv((work / "sweep_a" / "metrics.csv").string());
    const auto summary = bench::read_summary_csv((work / "sweep_a" / "summary.csv").string());
    bool exact = !summary.empty();
    for (const auto& s : summary) {
        double sum = 0.0, lo = INFINITY, hi = -INFINITY;
        std::size_t n = 0;
        for (const auto& r : rows)
            if (r.method == s.method && r.alpha == s.alpha && r.metric == s.metric) {
                sum += r.value;
                lo = std::min(lo, r.value);
                hi = std::max(hi, r.value);
                ++n;
            }
        const double mean = std::clamp(sum / static_cast<double>(n), lo, hi);
        exact = exact && n == s.count && lo == s.min && hi == s.max && mean == s.mean;
    }
    o.require(exact, "summary.csv not recomputable from metrics.csv");
    o.note(std::to_string(rows.size()) + " rows, " + std::to_string(summary.size()) + " summary groups");
    return o;
}

// 9: empirical mask rate
Outcome mask_rate() {
    Outcome o;
    const std::size_t channels = 350, steps = 2864;
    const std::vector<double> alpha(channels, 0.05);
    telemetry::MeasurementVector z{std::vector<double>(channels, 0.0), 0};
    std::size_t missing = 0;
    for (std::size_t t = 0; t < steps; ++t)
        missing += telemetry::apply_mask(z, alpha, derive_seed(1, seed_stream::train_mask, t)).second.count();
    const double rate = static_cast<double>(missing) / static_cast<double>(channels * steps);
    o.require(rate >= 0.047 && rate <= 0.053, "rate " + fmt("%.5f", rate));
    o.note("rate " + fmt("%.5f", rate));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dtse_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"autodiff gradient checks", autodiff},
        {"power-flow / measurement consistency", measurement_consistency},
        {"WLS exactness", wls_exactness},
        {"GQA correctness and K/V count", gqa},
        {"gating algebra", gating},
        {"training viability (overfit)", overfit},
        {"desk sweep", [&] { return desk_sweep(work); }},
        {"determinism and reporting", [&] { return determinism(work); }},
        {"masking statistics", mask_rate},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        failed += !o.pass;
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
