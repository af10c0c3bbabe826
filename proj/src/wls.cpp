#include "dtse/wls.hpp"

#include <cmath>
#include <numbers>

#include "dtse/error.hpp"

namespace dtse::wls {

using telemetry::MeasurementSchema;

WlsProblem make_problem(const grid::FeederModel& feeder, const MeasurementSchema& schema, std::vector<double> z,
                        std::optional<telemetry::MaskVector> mask) {
    if (!schema.bound()) fail(ErrorCode::UnknownChannelTarget, "schema is not bound to a feeder");
    if (z.size() != schema.size()) fail(ErrorCode::LengthMismatch, "measurement vector does not match the schema");
    if (mask && mask->missing.size() != schema.size()) fail(ErrorCode::LengthMismatch, "mask does not match the schema");
    WlsProblem p;
    p.feeder = &feeder;
    p.schema = schema;
    p.admittance = grid::admittance_matrix(feeder);
    p.weights.resize(static_cast<Eigen::Index>(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j)
        p.weights(static_cast<Eigen::Index>(j)) = 1.0 / (schema[j].sigma * schema[j].sigma);
    p.z = std::move(z);
    p.mask = std::move(mask);
    return p;
}

std::vector<double> evaluate(const WlsProblem& problem, std::span<const double> x) {
    const auto v = telemetry::voltages_from_state(*problem.feeder, x);
    return telemetry::measure(v, problem.admittance, problem.schema).values;
}

double objective(const WlsProblem& problem, std::span<const double> x) {
    const auto h = evaluate(problem, x);
    double total = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) {
        const double r = problem.z[j] - h[j];
        total += problem.weights(static_cast<Eigen::Index>(j)) * r * r;
    }
    return total;
}

Eigen::MatrixXd jacobian_fd(const grid::FeederModel& feeder, const MeasurementSchema& schema,
                            const Eigen::MatrixXcd& admittance, std::span<const double> x, double step) {
    if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
    const auto m = static_cast<Eigen::Index>(schema.size());
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd jac(m, n);
    std::vector<double> probe(x.begin(), x.end());
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        probe[ku] = x[ku] + step;
        const auto plus = telemetry::measure(telemetry::voltages_from_state(feeder, probe), admittance, schema).values;
        probe[ku] = x[ku] - step;
        const auto minus = telemetry::measure(telemetry::voltages_from_state(feeder, probe), admittance, schema).values;
        probe[ku] = x[ku];
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            jac(j, k) = (plus[ju] - minus[ju]) / (2.0 * step);
        }
    }
    return jac;
}

WlsProblem drop_missing(const WlsProblem& problem) {
    if (!problem.mask || problem.mask->count() == 0) {
        WlsProblem same = problem;
        same.mask.reset();
        return same;
    }
    std::vector<telemetry::Channel> kept;
    std::vector<double> z;
    std::vector<double> w;
    for (std::size_t j = 0; j < problem.rows(); ++j) {
        if (problem.mask->missing[j]) continue;
        kept.push_back(problem.schema[j]);
        z.push_back(problem.z[j]);
        w.push_back(problem.weights(static_cast<Eigen::Index>(j)));
    }
    WlsProblem out;
    out.feeder = problem.feeder;
    out.schema = MeasurementSchema(std::move(kept), *problem.feeder);
    out.admittance = problem.admittance;
    out.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    out.z = std::move(z);
    return out;
}

std::vector<double> flat_start(const grid::FeederModel& feeder) {
    const int first = feeder.buses()[feeder.slack()].phases.front();
    const double mag = std::abs(feeder.slack_voltage()[static_cast<std::size_t>(first)]);
    constexpr double kRotation[3] = {0.0, -2.0 * std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};
    std::vector<grid::Complex> v(feeder.phase_nodes().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::polar(mag, kRotation[static_cast<std::size_t>(feeder.phase_nodes()[i].phase)]);
    return telemetry::state_from_voltages(feeder, v);
}

StateEstimate estimate_wls(const WlsProblem& problem, std::span<const double> x0, const GaussNewtonOptions& options) {
    return estimate_wls(problem, x0, options, nullptr, nullptr);
}

StateEstimate estimate_wls(const WlsProblem& input, std::span<const double> x0, const GaussNewtonOptions& options,
                           StepObserver observer, void* context) {
    const WlsProblem problem = input.mask ? drop_missing(input) : input;
    const std::size_t n = problem.state_dim();
    if (x0.size() != n) fail(ErrorCode::LengthMismatch, "initial state has the wrong length");
    if (problem.rows() < n)
        fail(ErrorCode::RankDeficient, std::to_string(problem.rows()) + " measurements for " + std::to_string(n) +
                                           " states");

    StateEstimate est;
    est.x.assign(x0.begin(), x0.end());
    est.objective = objective(problem, est.x);
    const auto& w = problem.weights;
    const auto ni = static_cast<Eigen::Index>(n);

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        const auto h = evaluate(problem, est.x);
        Eigen::VectorXd r(static_cast<Eigen::Index>(h.size()));
        for (std::size_t j = 0; j < h.size(); ++j) r(static_cast<Eigen::Index>(j)) = problem.z[j] - h[j];
        const Eigen::MatrixXd jac = jacobian_fd(*problem.feeder, problem.schema, problem.admittance, est.x, options.fd_step);
        const Eigen::MatrixXd gain = jac.transpose() * w.asDiagonal() * jac;
        const Eigen::VectorXd rhs = jac.transpose() * (w.asDiagonal() * r);

        // Condition estimate on the Jacobi-scaled gain matrix.
        const Eigen::VectorXd diag = gain.diagonal();
        if ((diag.array() <= 0.0).any()) fail(ErrorCode::RankDeficient, "a state has no measurement sensitivity");
        const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd scaled = scale.asDiagonal() * gain * scale.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues()(0);
        const double hi = eig.eigenvalues()(ni - 1);
        if (!(lo > 0.0) || hi / lo > options.max_condition)
            fail(ErrorCode::RankDeficient, "gain matrix condition estimate " + std::to_string(lo > 0.0 ? hi / lo : INFINITY));
        Eigen::LLT<Eigen::MatrixXd> llt(gain);
        if (llt.info() != Eigen::Success) fail(ErrorCode::RankDeficient, "Cholesky factorization failed");
        const Eigen::VectorXd delta = llt.solve(rhs);
        if (delta.lpNorm<Eigen::Infinity>() <= options.tol) {
            // at this size the objective change is below rounding; take the step without a line search
            for (std::size_t i = 0; i < n; ++i) est.x[i] += delta(static_cast<Eigen::Index>(i));
            est.objective = objective(problem, est.x);
            est.iterations = iter;
            est.converged = true;
            if (observer) observer(context, iter, delta, est.objective);
            return est;
        }

        double t = 1.0;
        bool accepted = false;
        std::vector<double> trial(n);
        double trial_obj = 0.0;
        for (int k = 0; k <= options.max_halvings; ++k, t *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = est.x[i] + t * delta(static_cast<Eigen::Index>(i));
            trial_obj = objective(problem, trial);
            if (std::isfinite(trial_obj) && trial_obj <= est.objective) {
                accepted = true;
                break;
            }
        }
        if (!accepted) fail(ErrorCode::NoConvergence, "no descent step found at iteration " + std::to_string(iter));
        const Eigen::VectorXd step = t * delta;
        est.x = std::move(trial);
        est.objective = trial_obj;
        est.iterations = iter;
        if (observer) observer(context, iter, step, est.objective);
        if (step.lpNorm<Eigen::Infinity>() <= options.tol) {
            est.converged = true;
            return est;
        }
    }
    fail(ErrorCode::NoConvergence, "Gauss-Newton did not converge in " + std::to_string(options.max_iter) + " iterations");
}

}  // namespace dtse::wls
