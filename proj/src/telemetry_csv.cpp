#include <string>

#include "csv_util.hpp"
#include "dtse/error.hpp"
#include "dtse/telemetry.hpp"

namespace dtse::telemetry {

namespace {

std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

void check_state_header(const std::vector<std::string>& header, const std::string& path) {
    if (header.empty() || header.size() % 2 != 0)
        throw Error(ErrorCode::HeaderMismatch, path + ": states header must hold re:/im: column pairs");
    const std::size_t half = header.size() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const auto& re = header[k];
        const auto& im = header[half + k];
        if (re.rfind("re:", 0) != 0 || im.rfind("im:", 0) != 0 || re.substr(3) != im.substr(3))
            throw Error(ErrorCode::HeaderMismatch, path + ": column " + std::to_string(k) + " ('" + re + "', '" + im +
                                                       "') is not a matching re:/im: pair");
    }
}

}  // namespace

Dataset import_csv(const std::string& measurements_path, const std::string& states_path,
                   const MeasurementSchema& schema, double train_fraction) {
    const auto zlines = csv::read_lines(measurements_path);
    const auto xlines = csv::read_lines(states_path);
    if (zlines.empty()) throw Error(ErrorCode::HeaderMismatch, measurements_path + ": missing header row");
    if (xlines.empty()) throw Error(ErrorCode::HeaderMismatch, states_path + ": missing header row");

    Dataset ds;
    ds.channel_names = schema.names();
    auto header = csv::split(zlines.front());
    for (auto& h : header) h = std::string(csv::trim(h));
    if (header != ds.channel_names)
        throw Error(ErrorCode::HeaderMismatch, measurements_path + ": header does not match the schema channel order");
    ds.state_labels = csv::split(xlines.front());
    for (auto& h : ds.state_labels) h = std::string(csv::trim(h));
    check_state_header(ds.state_labels, states_path);

    if (zlines.size() != xlines.size())
        throw Error(ErrorCode::RaggedRows, "measurement and state files have different row counts (" +
                                               std::to_string(zlines.size() - 1) + " vs " +
                                               std::to_string(xlines.size() - 1) + ")");
    const std::size_t m = ds.channel_names.size();
    const std::size_t n = ds.state_labels.size();
    for (std::size_t r = 1; r < zlines.size(); ++r) {
        const auto zc = csv::split(zlines[r]);
        const auto xc = csv::split(xlines[r]);
        if (zc.size() != m)
            throw Error(ErrorCode::RaggedRows, measurements_path + ": row " + std::to_string(r) + " has " +
                                                   std::to_string(zc.size()) + " cells, expected " + std::to_string(m));
        if (xc.size() != n)
            throw Error(ErrorCode::RaggedRows, states_path + ": row " + std::to_string(r) + " has " +
                                                   std::to_string(xc.size()) + " cells, expected " + std::to_string(n));
        MeasurementVector z{std::vector<double>(m, 0.0), r - 1};
        MaskVector miss{std::vector<std::uint8_t>(m, 0)};
        for (std::size_t j = 0; j < m; ++j) {
            auto v = csv::parse_cell(zc[j], measurements_path + " row " + std::to_string(r));
            if (v)
                z.values[j] = *v;
            else
                miss.missing[j] = 1;
        }
        std::vector<double> x(n);
        for (std::size_t k = 0; k < n; ++k) {
            auto v = csv::parse_cell(xc[k], states_path + " row " + std::to_string(r));
            if (!v) throw Error(ErrorCode::UnparseableNumber, states_path + " row " + std::to_string(r) + ": blank state");
            x[k] = *v;
        }
        ds.z.push_back(std::move(z));
        ds.missing.push_back(std::move(miss));
        ds.x.push_back(std::move(x));
    }
    set_train_fraction(ds, train_fraction);
    return ds;
}

void export_csv(const Dataset& dataset, const std::string& measurements_path, const std::string& states_path) {
    auto zout = csv::open_for_write(measurements_path);
    zout << join(dataset.channel_names) << '\n';
    for (std::size_t t = 0; t < dataset.steps(); ++t) {
        const auto& z = dataset.z[t].values;
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (j) zout << ',';
            if (!dataset.missing[t].missing[j]) zout << csv::format(z[j]);
        }
        zout << '\n';
    }
    auto xout = csv::open_for_write(states_path);
    xout << join(dataset.state_labels) << '\n';
    for (const auto& x : dataset.x) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (k) xout << ',';
            xout << csv::format(x[k]);
        }
        xout << '\n';
    }
    if (!zout || !xout) throw Error(ErrorCode::IoError, "failed writing dataset CSV");
}

}  // namespace dtse::telemetry
