#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dtse/grid.hpp"
#include "dtse/telemetry.hpp"

namespace dtse::wls {

/// Weighted least-squares state estimation problem. Holds a non-owning pointer to the feeder,
/// which must outlive the problem.
struct WlsProblem {
    const grid::FeederModel* feeder = nullptr;
    telemetry::MeasurementSchema schema;  // bound to *feeder
    Eigen::MatrixXcd admittance;
    Eigen::VectorXd weights;  // diagonal of W = R^-1
    std::vector<double> z;
    std::optional<telemetry::MaskVector> mask;

    std::size_t rows() const { return z.size(); }
    std::size_t state_dim() const { return feeder->state_dim(); }
    /// Measurement rows per state variable.
    double redundancy() const { return static_cast<double>(rows()) / static_cast<double>(state_dim()); }
};

/// W = diag(1/sigma^2) from the schema.
WlsProblem make_problem(const grid::FeederModel& feeder, const telemetry::MeasurementSchema& schema,
                        std::vector<double> z, std::optional<telemetry::MaskVector> mask = std::nullopt);

struct StateEstimate {
    std::vector<double> x;
    int iterations = 0;
    double objective = 0.0;  // (z - h(x))^T W (z - h(x)) at x
    bool converged = false;
};

struct GaussNewtonOptions {
    double tol = 1e-8;
    int max_iter = 50;
    double fd_step = 1e-6;
    int max_halvings = 10;
    double max_condition = 1e12;
};

/// h(x) for the rows of the problem.
std::vector<double> evaluate(const WlsProblem& problem, std::span<const double> x);
double objective(const WlsProblem& problem, std::span<const double> x);

/// Central-difference Jacobian of h, rows = schema channels, cols = state entries.
Eigen::MatrixXd jacobian_fd(const grid::FeederModel& feeder, const telemetry::MeasurementSchema& schema,
                            const Eigen::MatrixXcd& admittance, std::span<const double> x, double step = 1e-6);

/// Removes rows flagged by the mask. An absent or all-false mask returns the problem unchanged.
WlsProblem drop_missing(const WlsProblem& problem);

/// Gauss-Newton with step halving. Masked rows are dropped first.
/// Errors: RankDeficient, NoConvergence.
StateEstimate estimate_wls(const WlsProblem& problem, std::span<const double> x0, const GaussNewtonOptions& options = {});

/// Slack magnitude replicated on every non-slack phase-node with 0, -120, +120 degree rotations.
std::vector<double> flat_start(const grid::FeederModel& feeder);

/// Hook for tests: receives the accepted step of every iteration.
using StepObserver = void (*)(void* context, int iteration, const Eigen::VectorXd& step, double objective);
StateEstimate estimate_wls(const WlsProblem& problem, std::span<const double> x0, const GaussNewtonOptions& options,
                           StepObserver observer, void* context);

}  // namespace dtse::wls
