// dtse command-line front end. Everything goes through the C interface.
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtse/dtse.h"

namespace {

struct Failure {
    dtse_status status;
};

void check(dtse_status s) {
    if (s != DTSE_OK) throw Failure{s};
}

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    int jobs = 0;
    int epochs = 0;
    int seeds = 0;
    std::string alphas;
};

void add_common(CLI::App* app, Common& c, bool training) {
    app->add_option("-c,--config", c.config, "Experiment config file (JSON)")->required();
    app->add_option("-s,--set", c.sets, "Override a config entry, e.g. model.lr=0.001")->take_all();
    app->add_option("-o,--out", c.out, "Output directory (overrides output_dir)");
    app->add_option("-j,--jobs", c.jobs, "Worker threads for sweep points; 1 is deterministic");
    app->add_option("--seeds", c.seeds, "Evaluate seeds 1..N");
    app->add_option("--alphas", c.alphas, "Comma-separated evaluation missing ratios");
    if (training) app->add_option("--epochs", c.epochs, "Training epochs");
}

using Experiment = std::unique_ptr<dtse_experiment, decltype(&dtse_experiment_free)>;
using Model = std::unique_ptr<dtse_model, decltype(&dtse_model_free)>;
using Report = std::unique_ptr<dtse_report, decltype(&dtse_report_free)>;

Experiment open(const Common& c) {
    std::vector<std::string> sets = c.sets;
    if (c.epochs > 0) sets.push_back("model.epochs=" + std::to_string(c.epochs));
    if (c.seeds > 0) {
        std::string list = "[";
        for (int i = 1; i <= c.seeds; ++i) list += (i > 1 ? "," : "") + std::to_string(i);
        sets.push_back("evaluation.seeds=" + list + "]");
    }
    if (!c.alphas.empty()) sets.push_back("evaluation.alphas=[" + c.alphas + "]");
    std::vector<const char*> argv;
    for (const auto& s : sets) argv.push_back(s.c_str());
    dtse_experiment* raw = nullptr;
    check(dtse_experiment_load(c.config.c_str(), argv.data(), argv.size(), &raw));
    Experiment e(raw, dtse_experiment_free);
    if (!c.out.empty()) check(dtse_experiment_set_output(e.get(), c.out.c_str()));
    if (c.jobs > 0) check(dtse_experiment_set_jobs(e.get(), c.jobs));
    return e;
}

std::string out_dir(const Common& c, const std::string& fallback) { return c.out.empty() ? fallback : c.out; }

std::string join(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
}

std::string config_out(const Experiment& e) { return dtse_experiment_output_dir(e.get()); }

void echo(const Experiment& e, const std::string& dir) {
    ensure_dir(dir);
    check(dtse_experiment_write_config(e.get(), join(dir, "config.json").c_str()));
}

int run_gen(const Common& c) {
    auto e = open(c);
    const auto dir = out_dir(c, config_out(e));
    echo(e, dir);
    check(dtse_dataset_export(e.get(), join(dir, "measurements.csv").c_str(), join(dir, "states.csv").c_str()));
    std::size_t steps = 0, channels = 0, states = 0, train = 0;
    check(dtse_experiment_shape(e.get(), &steps, &channels, &states, &train));
    std::printf("wrote %zu steps x %zu channels (%zu states, %zu training steps) to %s\n", steps, channels, states,
                train, dir.c_str());
    return 0;
}

int run_train(const Common& c, const std::string& arch, std::string checkpoint) {
    auto e = open(c);
    const auto dir = out_dir(c, config_out(e));
    echo(e, dir);
    dtse_model* raw = nullptr;
    check(dtse_model_train(e.get(), arch.c_str(), &raw));
    Model m(raw, dtse_model_free);
    if (checkpoint.empty() && arch != "concat") checkpoint = dtse_experiment_checkpoint(e.get());
    if (checkpoint.empty()) checkpoint = join(dir, arch == "concat" ? "ablation.ckpt" : "dt.ckpt");
    check(dtse_model_save(m.get(), checkpoint.c_str()));
    const auto history = join(dir, arch == "concat" ? "history_ablation.csv" : "history_dt.csv");
    check(dtse_model_write_history(m.get(), history.c_str()));
    std::size_t params = 0;
    check(dtse_model_parameter_count(m.get(), &params));
    std::printf("trained %s model (%zu parameters) -> %s\n", arch.c_str(), params, checkpoint.c_str());
    return 0;
}

int run_eval(const Common& c, std::string dt_path, const std::string& ablation_path) {
    auto e = open(c);
    if (dt_path.empty()) dt_path = dtse_experiment_checkpoint(e.get());
    const auto dir = out_dir(c, config_out(e));
    echo(e, dir);
    Model dt(nullptr, dtse_model_free), abl(nullptr, dtse_model_free);
    dtse_model* raw = nullptr;
    if (!dt_path.empty()) {
        check(dtse_model_load(dt_path.c_str(), &raw));
        dt.reset(raw);
    }
    if (!ablation_path.empty()) {
        check(dtse_model_load(ablation_path.c_str(), &raw));
        abl.reset(raw);
    }
    dtse_report* rep = nullptr;
    check(dtse_evaluate(e.get(), dt.get(), abl.get(), &rep));
    Report r(rep, dtse_report_free);
    check(dtse_report_emit(r.get(), dir.c_str()));
    std::size_t rows = 0;
    check(dtse_report_row_count(r.get(), &rows));
    std::printf("%zu metric rows -> %s\n", rows, dir.c_str());
    return 0;
}

int run_sweep(const Common& c) {
    auto e = open(c);
    dtse_report* rep = nullptr;
    check(dtse_run_sweep(e.get(), &rep));
    Report r(rep, dtse_report_free);
    std::size_t rows = 0;
    check(dtse_report_row_count(r.get(), &rows));
    std::printf("%zu metric rows -> %s\n", rows, out_dir(c, config_out(e)).c_str());
    return 0;
}

int run_wls(const Common& c) {
    auto e = open(c);
    const auto dir = out_dir(c, config_out(e));
    echo(e, dir);
    dtse_report* rep = nullptr;
    check(dtse_wls_montecarlo(e.get(), &rep));
    Report r(rep, dtse_report_free);
    check(dtse_report_emit(r.get(), dir.c_str()));
    std::printf("wls monte carlo -> %s\n", dir.c_str());
    return 0;
}

int run_report(const std::string& metrics, const std::string& dir) {
    dtse_report* rep = nullptr;
    check(dtse_report_load(metrics.c_str(), &rep));
    Report r(rep, dtse_report_free);
    check(dtse_report_emit(r.get(), dir.c_str()));
    std::printf("report -> %s\n", dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distribution system state estimation bench"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dtse_version()));

    Common gen_opts, train_opts, eval_opts, sweep_opts, wls_opts;
    auto* gen = app.add_subcommand("gen", "Simulate telemetry and write measurements.csv / states.csv");
    add_common(gen, gen_opts, false);

    auto* train = app.add_subcommand("train", "Train a model and write its checkpoint");
    add_common(train, train_opts, true);
    std::string arch = "interactive", checkpoint;
    train->add_option("--arch", arch, "interactive or concat")->check(CLI::IsMember({"interactive", "concat"}));
    train->add_option("--checkpoint", checkpoint, "Checkpoint path (default: config checkpoint, else <out>/dt.ckpt)");

    auto* eval = app.add_subcommand("eval", "Evaluate checkpoints and WLS over alphas x seeds");
    add_common(eval, eval_opts, false);
    std::string dt_path, ablation_path;
    eval->add_option("--model", dt_path, "Checkpoint of the interactive model (default: config checkpoint)");
    eval->add_option("--ablation", ablation_path, "Checkpoint of the concat baseline");

    auto* sweep = app.add_subcommand("sweep", "Train once, evaluate every alpha x seed, write the report");
    add_common(sweep, sweep_opts, true);

    auto* wls = app.add_subcommand("wls", "WLS rank-deficiency Monte Carlo over alphas x seeds");
    add_common(wls, wls_opts, false);

    auto* report = app.add_subcommand("report", "Rebuild summary.csv and sweep.svg from a metrics.csv");
    std::string metrics, report_out = ".";
    report->add_option("metrics", metrics, "metrics.csv")->required();
    report->add_option("-o,--out", report_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) return run_gen(gen_opts);
        if (*train) return run_train(train_opts, arch, checkpoint);
        if (*eval) return run_eval(eval_opts, dt_path, ablation_path);
        if (*sweep) return run_sweep(sweep_opts);
        if (*wls) return run_wls(wls_opts);
        if (*report) return run_report(metrics, report_out);
    } catch (const Failure& f) {
        std::fprintf(stderr, "dtse: %s\n", dtse_last_error());
        return dtse_exit_code(f.status);
    }
    return 0;
}
