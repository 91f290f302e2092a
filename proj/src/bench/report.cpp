#include "qvr/bench/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace qvr::bench {

using nlohmann::json;

std::string format_real(double value)
{
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, r.ptr);
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void row(std::ostream& out, const std::string& label, const std::string& quantity, const Summary& s)
{
    out << csv_field(label) << ',' << quantity << ',' << format_real(s.mean) << ',' << format_real(s.std) << '\n';
}

json summary_json(const Summary& s)
{
    return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"sem", s.sem}};
}

template <class F>
void write_file(const std::string& path, F&& body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace

void write_csv(const ReportSet& set, std::ostream& out)
{
    out << "method,quantity,mean,std\n";
    for (const auto& r : set.reports) {
        row(out, r.label, "quantile", r.estimate);
        for (std::size_t j = 0; j < r.beta.size(); ++j) row(out, r.label, "beta_" + std::to_string(j + 1), r.beta[j]);
        for (std::size_t j = 0; j < r.beta_estimate.size(); ++j) {
            row(out, r.label, "beta_estimate_" + std::to_string(j + 1), r.beta_estimate[j]);
        }
        if (r.draws) row(out, r.label, "draws", *r.draws);
    }
}

json to_json(const ReportSet& set)
{
    json reports = json::array();
    for (const auto& r : set.reports) {
        json estimates = json::array();
        for (const auto& run : r.runs) estimates.push_back(run.failed ? json(nullptr) : json(run.estimate));
        json beta = json::array();
        for (const auto& b : r.beta) beta.push_back(summary_json(b));
        json beta_estimate = json::array();
        for (const auto& b : r.beta_estimate) beta_estimate.push_back(summary_json(b));
        reports.push_back({
            {"label", r.label},
            {"method", r.method},
            {"model", r.model},
            {"alpha", r.alpha},
            {"n", r.n},
            {"seed", r.seed},
            {"replications", r.runs.size()},
            {"failures", r.failures},
            {"fallbacks", r.fallbacks},
            {"quantile", summary_json(r.estimate)},
            {"beta", beta},
            {"beta_estimate", beta_estimate},
            {"draws", r.draws ? summary_json(*r.draws) : json(nullptr)},
            {"estimates", estimates},
            {"histogram", {{"edges", r.histogram.edges}, {"counts", r.histogram.counts}}},
        });
    }
    return {{"title", set.title}, {"reports", reports}};
}

void write_json(const ReportSet& set, std::ostream& out) { out << to_json(set).dump(2) << '\n'; }

void write_histograms(const ReportSet& set, std::ostream& out)
{
    out << "method,lower,upper,count\n";
    for (const auto& r : set.reports) {
        const auto& h = r.histogram;
        for (std::size_t k = 0; k < h.counts.size(); ++k) {
            out << csv_field(r.label) << ',' << format_real(h.edges[k]) << ',' << format_real(h.edges[k + 1]) << ','
                << h.counts[k] << '\n';
        }
    }
}

void emit_report(const ReportSet& set, ReportFormat format, const std::string& path)
{
    write_file(path, [&](std::ostream& out) {
        if (format == ReportFormat::json) {
            write_json(set, out);
        } else {
            write_csv(set, out);
        }
    });
}

void emit_histograms(const ReportSet& set, const std::string& path)
{
    write_file(path, [&](std::ostream& out) { write_histograms(set, out); });
}

}  // namespace qvr::bench
