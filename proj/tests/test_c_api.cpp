#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "dtse/dtse.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "dtse_c_api_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kSweep = std::string(DTSE_CONFIG_DIR) + "/sweep.json";

// shrunk so the whole flow runs in a few seconds
const char* const kSmall[] = {"profile.steps=60",       "model.d=8",        "model.d_ff=8",
                              "model.blocks=1",         "model.heads=2",    "model.groups=1",
                              "model.window=4",         "model.epochs=2",   "evaluation.alphas=[0.0,0.2]",
                              "evaluation.seeds=[1,2]", "ablation=true"};

}  // namespace

TEST_CASE("status names and exit codes") {
    CHECK(std::string(dtse_status_name(DTSE_OK)) == "ok");
    CHECK(dtse_exit_code(DTSE_OK) == 0);
    CHECK(dtse_exit_code(DTSE_ERR_CONFIG) == 2);
    CHECK(dtse_exit_code(DTSE_ERR_TOPOLOGY) == 2);
    CHECK(dtse_exit_code(DTSE_ERR_DATA) == 2);
    CHECK(dtse_exit_code(DTSE_ERR_NUMERIC) == 3);
    CHECK(dtse_exit_code(DTSE_ERR_IO) == 4);
    CHECK(dtse_exit_code(DTSE_ERR_INTERNAL) == 3);
    CHECK(std::string(dtse_version()).size() > 0);
}

TEST_CASE("errors come back as codes with a message") {
    dtse_experiment* ex = nullptr;
    CHECK(dtse_experiment_load("/no/such/config.json", nullptr, 0, &ex) == DTSE_ERR_IO);
    CHECK(ex == nullptr);
    CHECK(std::string(dtse_last_error()).find("/no/such/config.json") != std::string::npos);
    CHECK(std::string(dtse_last_error_kind()) == "IoError");

    CHECK(dtse_experiment_load(nullptr, nullptr, 0, &ex) == DTSE_ERR_CONFIG);
    CHECK(dtse_experiment_load(kSweep.c_str(), nullptr, 0, nullptr) == DTSE_ERR_CONFIG);

    const char* bad_alpha[] = {"evaluation.alphas=[0.99]"};
    CHECK(dtse_experiment_load(kSweep.c_str(), bad_alpha, 1, &ex) == DTSE_ERR_CONFIG);

    const char* bad_feeder[] = {"feeder=/missing/feeder.json"};
    REQUIRE(dtse_experiment_load(kSweep.c_str(), bad_feeder, 1, &ex) == DTSE_OK);
    CHECK(dtse_experiment_prepare(ex) == DTSE_ERR_IO);
    CHECK(std::string(dtse_last_error()).find("/missing/feeder.json") != std::string::npos);
    dtse_experiment_free(ex);

    const char* bad_bus[] = {"channels=[{\"kind\":\"Vm\",\"buses\":[\"nowhere\"],\"sigma\":0.01}]"};
    REQUIRE(dtse_experiment_load(kSweep.c_str(), bad_bus, 1, &ex) == DTSE_OK);
    CHECK(dtse_experiment_prepare(ex) == DTSE_ERR_DATA);
    dtse_experiment_free(ex);

    dtse_model* m = nullptr;
    CHECK(dtse_model_load("/no/such/model.ckpt", &m) == DTSE_ERR_IO);
    CHECK(dtse_model_train(nullptr, "interactive", &m) == DTSE_ERR_CONFIG);
    dtse_report* r = nullptr;
    CHECK(dtse_report_load("/no/such/metrics.csv", &r) == DTSE_ERR_IO);

    // freeing null handles is a no-op
    dtse_experiment_free(nullptr);
    dtse_model_free(nullptr);
    dtse_report_free(nullptr);
}

TEST_CASE("end-to-end through the C interface") {
    const auto dir = scratch("flow");
    dtse_experiment* ex = nullptr;
    REQUIRE(dtse_experiment_load(kSweep.c_str(), kSmall, std::size(kSmall), &ex) == DTSE_OK);
    REQUIRE(dtse_experiment_set_output(ex, dir.c_str()) == DTSE_OK);
    CHECK(std::string(dtse_experiment_output_dir(ex)) == dir.string());
    CHECK(dtse_experiment_set_jobs(ex, 0) == DTSE_ERR_CONFIG);

    size_t steps = 0, channels = 0, state_dim = 0, train_steps = 0;
    REQUIRE(dtse_experiment_shape(ex, &steps, &channels, &state_dim, &train_steps) == DTSE_OK);
    CHECK(steps == 60);
    CHECK(channels == 63);
    CHECK(state_dim == 42);
    CHECK(train_steps == 48);

    REQUIRE(dtse_dataset_export(ex, (dir / "m.csv").c_str(), (dir / "s.csv").c_str()) == DTSE_OK);
    CHECK(fs::exists(dir / "m.csv"));

    dtse_model* dt = nullptr;
    dtse_model* ab = nullptr;
    CHECK(dtse_model_train(ex, "sideways", &dt) == DTSE_ERR_CONFIG);
    REQUIRE(dtse_model_train(ex, "interactive", &dt) == DTSE_OK);
    REQUIRE(dtse_model_train(ex, "concat", &ab) == DTSE_OK);
    size_t p_dt = 0, p_ab = 0;
    dtse_model_parameter_count(dt, &p_dt);
    dtse_model_parameter_count(ab, &p_ab);
    CHECK(p_dt > p_ab);

    const auto ckpt = dir / "dt.ckpt";
    REQUIRE(dtse_model_save(dt, ckpt.c_str()) == DTSE_OK);
    REQUIRE(dtse_model_write_history(dt, (dir / "history.csv").c_str()) == DTSE_OK);
    dtse_model* back = nullptr;
    REQUIRE(dtse_model_load(ckpt.c_str(), &back) == DTSE_OK);

    dtse_report* r1 = nullptr;
    dtse_report* r2 = nullptr;
    REQUIRE(dtse_evaluate(ex, dt, ab, &r1) == DTSE_OK);
    REQUIRE(dtse_evaluate(ex, back, nullptr, &r2) == DTSE_OK);
    double a = 0, b = 0;
    REQUIRE(dtse_report_mean(r1, "dt", 0.2, "mae_mag", &a) == DTSE_OK);
    REQUIRE(dtse_report_mean(r2, "dt", 0.2, "mae_mag", &b) == DTSE_OK);
    CHECK(a == b);  // the checkpoint restores the model exactly
    CHECK(std::isfinite(a));
    CHECK(dtse_report_mean(r2, "ablation", 0.2, "mae_mag", &b) == DTSE_ERR_CONFIG);

    REQUIRE(dtse_report_emit(r1, dir.c_str()) == DTSE_OK);
    dtse_report* loaded = nullptr;
    REQUIRE(dtse_report_load((dir / "metrics.csv").c_str(), &loaded) == DTSE_OK);
    size_t n1 = 0, n2 = 0;
    dtse_report_row_count(r1, &n1);
    dtse_report_row_count(loaded, &n2);
    CHECK(n1 == n2);
    CHECK(n1 > 0);

    dtse_report* mc = nullptr;
    REQUIRE(dtse_wls_montecarlo(ex, &mc) == DTSE_OK);
    CHECK(dtse_report_mean(mc, "wls", 0.0, "rank_deficient_fraction", &a) == DTSE_OK);

    const auto sweep_dir = dir / "sweep";
    REQUIRE(dtse_experiment_set_output(ex, sweep_dir.c_str()) == DTSE_OK);
    REQUIRE(dtse_run_sweep(ex, nullptr) == DTSE_OK);
    CHECK(fs::exists(sweep_dir / "metrics.csv"));
    CHECK(fs::exists(sweep_dir / "summary.csv"));
    REQUIRE(dtse_experiment_write_config(ex, (dir / "echo.json").c_str()) == DTSE_OK);
    dtse_experiment* echo = nullptr;
    CHECK(dtse_experiment_load((dir / "echo.json").c_str(), nullptr, 0, &echo) == DTSE_OK);

    for (auto* r : {r1, r2, loaded, mc}) dtse_report_free(r);
    for (auto* m : {dt, ab, back}) dtse_model_free(m);
    dtse_experiment_free(echo);
    dtse_experiment_free(ex);
}
