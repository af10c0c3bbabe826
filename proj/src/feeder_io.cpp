#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dtse/error.hpp"
#include "dtse/grid.hpp"

namespace dtse::grid {

namespace {

using nlohmann::json;

constexpr int kFeederFormatVersion = 1;

std::vector<int> parse_phases(const std::string& text) {
    std::vector<int> out;
    for (char c : text) out.push_back(phase_index(c));
    return out;
}

std::string phases_string(const std::vector<int>& phases) {
    std::string s;
    for (int p : phases) s += phase_letter(p);
    return s;
}

Eigen::Matrix3cd parse_impedance(const json& z) {
    if (!z.is_array() || z.size() != 3) throw Error(ErrorCode::ConfigError, "impedance must be a 3x3 array");
    Eigen::Matrix3cd m;
    for (int r = 0; r < 3; ++r) {
        const auto& row = z.at(static_cast<std::size_t>(r));
        if (!row.is_array() || row.size() != 3) throw Error(ErrorCode::ConfigError, "impedance row must have 3 entries");
        for (int c = 0; c < 3; ++c) {
            const auto& pair = row.at(static_cast<std::size_t>(c));
            if (!pair.is_array() || pair.size() != 2)
                throw Error(ErrorCode::ConfigError, "impedance entry must be [re, im]");
            m(r, c) = Complex(pair[0].get<double>(), pair[1].get<double>());
        }
    }
    return m;
}

}  // namespace

FeederSpec parse_feeder_spec(std::string_view text) {
    FeederSpec spec;
    try {
        const json doc = json::parse(text);
        spec.format_version = doc.at("format_version").get<int>();
        if (spec.format_version != kFeederFormatVersion)
            throw Error(ErrorCode::ConfigError, "unsupported feeder format_version " + std::to_string(spec.format_version));
        spec.name = doc.value("name", "");
        if (doc.contains("base")) {
            spec.base_kv = doc["base"].value("kv", 1.0);
            spec.base_kva = doc["base"].value("kva", 1.0);
        }
        const auto& slack = doc.at("slack");
        spec.slack_bus = slack.at("bus").get<std::string>();
        const auto& volts = slack.at("voltage");
        if (!volts.is_array() || volts.size() != 3)
            throw Error(ErrorCode::ConfigError, "slack voltage must list [magnitude, angle_deg] for phases a, b, c");
        for (std::size_t p = 0; p < 3; ++p) {
            const double mag = volts[p].at(0).get<double>();
            const double deg = volts[p].at(1).get<double>();
            spec.slack_voltage[p] = std::polar(mag, deg * std::numbers::pi / 180.0);
        }
        for (const auto& b : doc.at("buses"))
            spec.buses.push_back(BusSpec{b.at("id").get<std::string>(), parse_phases(b.at("phases").get<std::string>())});
        for (const auto& l : doc.at("lines"))
            spec.lines.push_back(LineSpec{l.at("from").get<std::string>(), l.at("to").get<std::string>(),
                                          parse_impedance(l.at("z"))});
        if (doc.contains("loads")) {
            for (const auto& ld : doc["loads"]) {
                const auto phase = ld.at("phase").get<std::string>();
                if (phase.size() != 1) throw Error(ErrorCode::ConfigError, "load phase must be a single letter");
                spec.nominal_loads.push_back(LoadSpec{ld.at("bus").get<std::string>(), phase_index(phase[0]),
                                                      Complex(ld.at("p").get<double>(), ld.value("q", 0.0))});
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("feeder description: ") + e.what());
    }
    return spec;
}

FeederSpec load_feeder_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open feeder fixture '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_feeder_spec(buf.str());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

std::string dump_feeder_spec(const FeederSpec& spec) {
    json doc;
    doc["format_version"] = spec.format_version;
    doc["name"] = spec.name;
    doc["base"] = {{"kv", spec.base_kv}, {"kva", spec.base_kva}};
    json volts = json::array();
    for (const auto& v : spec.slack_voltage) volts.push_back({std::abs(v), std::arg(v) * 180.0 / std::numbers::pi});
    doc["slack"] = {{"bus", spec.slack_bus}, {"voltage", volts}};
    doc["buses"] = json::array();
    for (const auto& b : spec.buses) doc["buses"].push_back({{"id", b.id}, {"phases", phases_string(b.phases)}});
    doc["lines"] = json::array();
    for (const auto& l : spec.lines) {
        json z = json::array();
        for (int r = 0; r < 3; ++r) {
            json row = json::array();
            for (int c = 0; c < 3; ++c) row.push_back({l.impedance(r, c).real(), l.impedance(r, c).imag()});
            z.push_back(row);
        }
        doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"z", z}});
    }
    doc["loads"] = json::array();
    for (const auto& ld : spec.nominal_loads)
        doc["loads"].push_back({{"bus", ld.bus},
                                {"phase", std::string(1, phase_letter(ld.phase))},
                                {"p", ld.power.real()},
                                {"q", ld.power.imag()}});
    return doc.dump(2);
}

}  // namespace dtse::grid
