#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "dtse/bench.hpp"
#include "dtse/grid.hpp"
#include "dtse/telemetry.hpp"

namespace test {

inline std::string fixture(const std::string& name) { return std::string(DTSE_FIXTURE_DIR) + "/" + name; }
inline std::string config(const std::string& name) { return std::string(DTSE_CONFIG_DIR) + "/" + name; }

inline dtse::grid::FeederModel two_bus() { return dtse::grid::load_feeder(fixture("feeder_2bus.json")); }
inline dtse::grid::FeederModel eight_bus() { return dtse::grid::load_feeder(fixture("feeder_8bus.json")); }

// V2 = V1 - z conj(S2 / V2), iterated to a fixed point
inline std::complex<double> two_bus_oracle(std::complex<double> v1, std::complex<double> z, std::complex<double> s) {
    std::complex<double> v = v1;
    for (int i = 0; i < 10000; ++i) {
        const auto next = v1 - z * std::conj(s / v);
        if (std::abs(next - v) < 1e-16) return next;
        v = next;
    }
    return v;
}

// the 8-bus metering used by the example sweep config
inline std::vector<dtse::bench::ChannelRule> eight_bus_rules(double alpha = 0.05) {
    using K = dtse::telemetry::ChannelKind;
    return {
        {K::PInjection, {}, "", 0.002, alpha},
        {K::QInjection, {}, "", 0.002, alpha},
        {K::VMagnitude, {"sub", "n2", "n3", "n5", "n6"}, "", 0.001, alpha},
        {K::VAngle, {"sub", "n3"}, "", 0.0005, alpha},
    };
}

// every channel kind at every phase-node
inline dtse::telemetry::MeasurementSchema complete_schema(const dtse::grid::FeederModel& feeder, double sigma = 0.01) {
    using K = dtse::telemetry::ChannelKind;
    std::vector<dtse::telemetry::Channel> ch;
    for (auto kind : {K::PInjection, K::QInjection, K::VMagnitude, K::VAngle})
        for (std::size_t i = 0; i < feeder.phase_nodes().size(); ++i) {
            const auto& node = feeder.phase_nodes()[i];
            ch.push_back({kind, feeder.buses()[node.bus].id, node.phase, sigma, 0.0});
        }
    return dtse::telemetry::MeasurementSchema(std::move(ch), feeder);
}

}  // namespace test
