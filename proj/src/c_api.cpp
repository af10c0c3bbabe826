#include "dtse/dtse.h"

#include <cmath>
#include <exception>
#include <fstream>
#include <new>
#include <optional>
#include <string>

#include "csv_util.hpp"
#include "dtse/bench.hpp"
#include "dtse/error.hpp"

using dtse::ErrorCode;

struct dtse_experiment {
    dtse::bench::ExperimentConfig config;
    std::optional<dtse::bench::Experiment> prepared;
};

struct dtse_model {
    dtse::model::DtModel model;
    std::vector<dtse::model::EpochLoss> history;
};

struct dtse_report {
    dtse::bench::MetricsReport report;
};

namespace {

thread_local std::string g_message;
thread_local std::string g_kind;

dtse_status status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::CycleDetected:
        case ErrorCode::DisconnectedBus:
        case ErrorCode::DuplicateId:
        case ErrorCode::SingularImpedance:
        case ErrorCode::UnknownBus:
            return DTSE_ERR_TOPOLOGY;
        case ErrorCode::UnknownChannelTarget:
        case ErrorCode::InvalidAlpha:
        case ErrorCode::InvalidSigma:
        case ErrorCode::HeaderMismatch:
        case ErrorCode::RaggedRows:
        case ErrorCode::UnparseableNumber:
        case ErrorCode::InvalidLoad:
            return DTSE_ERR_DATA;
        case ErrorCode::NoConvergence:
        case ErrorCode::RankDeficient:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::NonFiniteLoss:
            return DTSE_ERR_NUMERIC;
        case ErrorCode::IoError:
            return DTSE_ERR_IO;
        case ErrorCode::ShapeMismatch:
        case ErrorCode::NotScalarLoss:
        case ErrorCode::MissingGradient:
        case ErrorCode::LengthMismatch:
            return DTSE_ERR_INTERNAL;
        case ErrorCode::InvalidArgument:
        case ErrorCode::ConfigError:
            return DTSE_ERR_CONFIG;
    }
    return DTSE_ERR_INTERNAL;
}

template <typename Fn>
dtse_status guarded(Fn&& fn) {
    try {
        fn();
        g_message.clear();
        g_kind.clear();
        return DTSE_OK;
    } catch (const dtse::Error& e) {
        g_message = e.what();
        g_kind = std::string(dtse::error_code_name(e.code()));
        return status_for(e.code());
    } catch (const std::bad_alloc&) {
        g_message = "out of memory";
        g_kind = "Internal";
        return DTSE_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_message = e.what();
        g_kind = "Internal";
        return DTSE_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) dtse::fail(ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

dtse::bench::Experiment& prepared(dtse_experiment* e) {
    if (!e->prepared) e->prepared = dtse::bench::prepare(e->config);
    return *e->prepared;
}

}  // namespace

extern "C" {

const char* dtse_version(void) { return "1.0.0"; }
const char* dtse_last_error(void) { return g_message.c_str(); }
const char* dtse_last_error_kind(void) { return g_kind.c_str(); }

const char* dtse_status_name(dtse_status status) {
    switch (status) {
        case DTSE_OK: return "ok";
        case DTSE_ERR_CONFIG: return "config";
        case DTSE_ERR_TOPOLOGY: return "topology";
        case DTSE_ERR_DATA: return "data";
        case DTSE_ERR_NUMERIC: return "numeric";
        case DTSE_ERR_IO: return "io";
        case DTSE_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

int dtse_exit_code(dtse_status status) {
    switch (status) {
        case DTSE_OK: return 0;
        case DTSE_ERR_CONFIG:
        case DTSE_ERR_TOPOLOGY:
        case DTSE_ERR_DATA: return 2;
        case DTSE_ERR_NUMERIC: return 3;
        case DTSE_ERR_IO: return 4;
        case DTSE_ERR_INTERNAL: return 3;
    }
    return 3;
}

dtse_status dtse_experiment_load(const char* config_path, const char* const* overrides, size_t count,
                                 dtse_experiment** out) {
    return guarded([&] {
        require(config_path, "config_path");
        require(out, "out");
        std::vector<std::string> ov;
        for (size_t i = 0; i < count; ++i) {
            require(overrides[i], "override");
            ov.emplace_back(overrides[i]);
        }
        auto* e = new dtse_experiment{dtse::bench::ExperimentConfig::load(config_path, ov), std::nullopt};
        *out = e;
    });
}

void dtse_experiment_free(dtse_experiment* experiment) { delete experiment; }

dtse_status dtse_experiment_prepare(dtse_experiment* experiment) {
    return guarded([&] {
        require(experiment, "experiment");
        prepared(experiment);
    });
}

dtse_status dtse_experiment_set_output(dtse_experiment* experiment, const char* dir) {
    return guarded([&] {
        require(experiment, "experiment");
        require(dir, "dir");
        experiment->config.output_dir = dir;
        if (experiment->prepared) experiment->prepared->config.output_dir = dir;
    });
}

const char* dtse_experiment_output_dir(const dtse_experiment* experiment) {
    return experiment ? experiment->config.output_dir.c_str() : "";
}

const char* dtse_experiment_checkpoint(const dtse_experiment* experiment) {
    return experiment ? experiment->config.checkpoint.c_str() : "";
}

dtse_status dtse_experiment_set_jobs(dtse_experiment* experiment, int jobs) {
    return guarded([&] {
        require(experiment, "experiment");
        if (jobs < 1) dtse::fail(ErrorCode::ConfigError, "jobs must be at least 1");
        experiment->config.jobs = jobs;
        if (experiment->prepared) experiment->prepared->config.jobs = jobs;
    });
}

dtse_status dtse_experiment_write_config(const dtse_experiment* experiment, const char* path) {
    return guarded([&] {
        require(experiment, "experiment");
        require(path, "path");
        auto out = dtse::csv::open_for_write(path);
        out << experiment->config.to_json() << '\n';
    });
}

dtse_status dtse_experiment_shape(dtse_experiment* experiment, size_t* steps, size_t* channels, size_t* state_dim,
                                  size_t* train_steps) {
    return guarded([&] {
        require(experiment, "experiment");
        const auto& ds = prepared(experiment).dataset;
        if (steps) *steps = ds.steps();
        if (channels) *channels = ds.channels();
        if (state_dim) *state_dim = ds.state_dim();
        if (train_steps) *train_steps = ds.train_steps;
    });
}

dtse_status dtse_dataset_export(dtse_experiment* experiment, const char* measurements_path, const char* states_path) {
    return guarded([&] {
        require(experiment, "experiment");
        require(measurements_path, "measurements_path");
        require(states_path, "states_path");
        dtse::telemetry::export_csv(prepared(experiment).dataset, measurements_path, states_path);
    });
}

dtse_status dtse_model_train(dtse_experiment* experiment, const char* architecture, dtse_model** out) {
    return guarded([&] {
        require(experiment, "experiment");
        require(out, "out");
        const auto arch = dtse::model::architecture_from_name(architecture ? architecture : "interactive");
        auto result = dtse::bench::train_model(prepared(experiment), arch);
        *out = new dtse_model{std::move(result.model), std::move(result.history)};
    });
}

dtse_status dtse_model_load(const char* path, dtse_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new dtse_model{dtse::model::DtModel::load(path), {}};
    });
}

void dtse_model_free(dtse_model* model) { delete model; }

dtse_status dtse_model_save(const dtse_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        model->model.save(path);
    });
}

dtse_status dtse_model_write_history(const dtse_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        dtse::model::write_history_csv(model->history, path);
    });
}

dtse_status dtse_model_parameter_count(const dtse_model* model, size_t* count) {
    return guarded([&] {
        require(model, "model");
        require(count, "count");
        *count = model->model.parameter_count();
    });
}

dtse_status dtse_evaluate(dtse_experiment* experiment, const dtse_model* dt, const dtse_model* ablation,
                          dtse_report** out) {
    return guarded([&] {
        require(experiment, "experiment");
        require(out, "out");
        auto report = dtse::bench::evaluate(prepared(experiment), dt ? &dt->model : nullptr,
                                            ablation ? &ablation->model : nullptr);
        auto info = [](const char* name, const dtse_model* m) {
            dtse::bench::ModelInfo i{name, m->model.parameter_count(), NAN, NAN};
            if (!m->history.empty()) {
                i.final_train_loss = m->history.back().train;
                i.final_val_loss = m->history.back().validation;
            }
            return i;
        };
        if (dt) report.models.push_back(info("dt", dt));
        if (ablation) report.models.push_back(info("ablation", ablation));
        *out = new dtse_report{std::move(report)};
    });
}

dtse_status dtse_wls_montecarlo(dtse_experiment* experiment, dtse_report** out) {
    return guarded([&] {
        require(experiment, "experiment");
        require(out, "out");
        *out = new dtse_report{dtse::bench::wls_monte_carlo(prepared(experiment))};
    });
}

dtse_status dtse_run_sweep(const dtse_experiment* experiment, dtse_report** out) {
    return guarded([&] {
        require(experiment, "experiment");
        auto report = dtse::bench::run_sweep(experiment->config);
        if (out) *out = new dtse_report{std::move(report)};
    });
}

dtse_status dtse_report_load(const char* metrics_csv, dtse_report** out) {
    return guarded([&] {
        require(metrics_csv, "metrics_csv");
        require(out, "out");
        dtse::bench::MetricsReport r;
        r.rows = dtse::bench::read_metrics_csv(metrics_csv);
        *out = new dtse_report{std::move(r)};
    });
}

dtse_status dtse_report_emit(const dtse_report* report, const char* out_dir) {
    return guarded([&] {
        require(report, "report");
        require(out_dir, "out_dir");
        dtse::bench::emit_report(report->report, out_dir);
    });
}

dtse_status dtse_report_row_count(const dtse_report* report, size_t* rows) {
    return guarded([&] {
        require(report, "report");
        require(rows, "rows");
        *rows = report->report.rows.size();
    });
}

dtse_status dtse_report_mean(const dtse_report* report, const char* method, double alpha, const char* metric,
                             double* mean) {
    return guarded([&] {
        require(report, "report");
        require(method, "method");
        require(metric, "metric");
        require(mean, "mean");
        auto m = report->report.mean(method, alpha, metric);
        if (!m) dtse::fail(ErrorCode::InvalidArgument, "no rows for the requested method, alpha and metric");
        *mean = *m;
    });
}

void dtse_report_free(dtse_report* report) { delete report; }

}  // extern "C"
