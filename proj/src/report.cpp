#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <tuple>

#include "csv_util.hpp"
#include "dtse/bench.hpp"
#include "dtse/error.hpp"

namespace dtse::bench {

std::vector<SummaryRow> summarize(std::span<const MetricRow> rows) {
    std::vector<SummaryRow> out;
    std::map<std::tuple<std::string, double, std::string>, std::size_t> where;
    std::vector<double> sums;
    for (const auto& r : rows) {
        const auto key = std::make_tuple(r.method, r.alpha, r.metric);
        auto it = where.find(key);
        if (it == where.end()) {
            where.emplace(key, out.size());
            out.push_back(SummaryRow{r.method, r.alpha, r.metric, 1, r.value, 0.0, r.value});
            sums.push_back(r.value);
            continue;
        }
        auto& s = out[it->second];
        ++s.count;
        s.min = std::min(s.min, r.value);
        s.max = std::max(s.max, r.value);
        sums[it->second] += r.value;
    }
    // rounding in the sum can push the mean of equal values just outside [min, max]
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].mean = std::clamp(sums[i] / static_cast<double>(out[i].count), out[i].min, out[i].max);
    return out;
}

std::vector<SummaryRow> MetricsReport::summarize() const { return bench::summarize(rows); }

std::optional<double> MetricsReport::mean(const std::string& method, double alpha, const std::string& metric) const {
    for (const auto& s : summarize())
        if (s.method == method && s.alpha == alpha && s.metric == metric) return s.mean;
    return std::nullopt;
}

void emit_report(const MetricsReport& report, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create '" + out_dir + "': " + ec.message());
    const std::filesystem::path dir(out_dir);

    {
        auto out = csv::open_for_write((dir / "metrics.csv").string());
        out << "method,alpha,seed,metric,value\n";
        for (const auto& r : report.rows)
            out << r.method << ',' << csv::format(r.alpha) << ',' << r.seed << ',' << r.metric << ','
                << csv::format(r.value) << '\n';
        if (!out) fail(ErrorCode::IoError, "failed writing metrics.csv");
    }
    const auto summary = report.summarize();
    {
        auto out = csv::open_for_write((dir / "summary.csv").string());
        out << "method,alpha,metric,count,min,mean,max\n";
        for (const auto& s : summary)
            out << s.method << ',' << csv::format(s.alpha) << ',' << s.metric << ',' << s.count << ','
                << csv::format(s.min) << ',' << csv::format(s.mean) << ',' << csv::format(s.max) << '\n';
        if (!out) fail(ErrorCode::IoError, "failed writing summary.csv");
    }
    {
        auto out = csv::open_for_write((dir / "models.csv").string());
        out << "method,parameters,final_train_loss,final_val_loss\n";
        for (const auto& m : report.models) {
            // blank when unknown, e.g. for a model loaded from a checkpoint
            out << m.method << ',' << m.parameters << ',';
            if (std::isfinite(m.final_train_loss)) out << csv::format(m.final_train_loss);
            out << ',';
            if (std::isfinite(m.final_val_loss)) out << csv::format(m.final_val_loss);
            out << '\n';
        }
        if (!out) fail(ErrorCode::IoError, "failed writing models.csv");
    }
    if (!summary.empty()) {
        auto out = csv::open_for_write((dir / "sweep.svg").string());
        out << sweep_svg(summary);
        if (!out) fail(ErrorCode::IoError, "failed writing sweep.svg");
    }
    if (report.trace && !report.trace->steps.empty()) {
        auto out = csv::open_for_write((dir / "timeseries.svg").string());
        out << timeseries_svg(*report.trace);
        if (!out) fail(ErrorCode::IoError, "failed writing timeseries.svg");
    }
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines.front() != "method,alpha,seed,metric,value")
        fail(ErrorCode::HeaderMismatch, path + ": expected metrics.csv header");
    std::vector<MetricRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = csv::split(lines[i]);
        if (cells.size() != 5) fail(ErrorCode::RaggedRows, path + ": row " + std::to_string(i));
        MetricRow r;
        r.method = cells[0];
        const std::string where = path + " row " + std::to_string(i);
        r.alpha = csv::parse_cell(cells[1], where).value_or(0.0);
        r.seed = static_cast<std::uint64_t>(std::stoull(cells[2]));
        r.metric = cells[3];
        auto v = csv::parse_cell(cells[4], where);
        if (!v) fail(ErrorCode::UnparseableNumber, where + ": blank value");
        r.value = *v;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines.front() != "method,alpha,metric,count,min,mean,max")
        fail(ErrorCode::HeaderMismatch, path + ": expected summary.csv header");
    std::vector<SummaryRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = csv::split(lines[i]);
        if (c.size() != 7) fail(ErrorCode::RaggedRows, path + ": row " + std::to_string(i));
        const std::string where = path + " row " + std::to_string(i);
        SummaryRow s;
        s.method = c[0];
        s.alpha = csv::parse_cell(c[1], where).value_or(0.0);
        s.metric = c[2];
        s.count = static_cast<std::size_t>(std::stoull(c[3]));
        s.min = csv::parse_cell(c[4], where).value_or(NAN);
        s.mean = csv::parse_cell(c[5], where).value_or(NAN);
        s.max = csv::parse_cell(c[6], where).value_or(NAN);
        rows.push_back(std::move(s));
    }
    return rows;
}

}  // namespace dtse::bench
