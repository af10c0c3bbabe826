#include <cmath>
#include <complex>
#include <numbers>

#include "dtse/bench.hpp"
#include "dtse/error.hpp"

namespace dtse::bench {

double wrap_angle(double radians) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(radians, two_pi);
    if (r > std::numbers::pi) r -= two_pi;
    if (r <= -std::numbers::pi) r += two_pi;
    return r;
}

ErrorMetrics compute_metrics(std::span<const std::vector<double>> estimate, std::span<const std::vector<double>> truth) {
    if (estimate.size() != truth.size())
        fail(ErrorCode::LengthMismatch, std::to_string(estimate.size()) + " estimates vs " + std::to_string(truth.size()) +
                                            " ground-truth steps");
    ErrorMetrics m;
    double sq = 0.0, abs_mag = 0.0, abs_ang = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const auto& xe = estimate[t];
        const auto& xt = truth[t];
        if (xe.size() != xt.size() || xt.size() % 2 != 0)
            fail(ErrorCode::LengthMismatch, "state vectors at step " + std::to_string(t) + " differ in length");
        const std::size_t half = xt.size() / 2;
        for (std::size_t k = 0; k < half; ++k) {
            const std::complex<double> ve(xe[k], xe[half + k]);
            const std::complex<double> vt(xt[k], xt[half + k]);
            const double dm = std::abs(ve) - std::abs(vt);
            sq += dm * dm;
            abs_mag += std::abs(dm);
            abs_ang += std::abs(wrap_angle(std::arg(ve) - std::arg(vt)));
            ++m.samples;
        }
    }
    if (m.samples == 0) return m;
    const double n = static_cast<double>(m.samples);
    m.rmse_pct = 100.0 * std::sqrt(sq / n);
    m.mae_mag = abs_mag / n;
    m.mae_ang = abs_ang / n;
    return m;
}

}  // namespace dtse::bench
