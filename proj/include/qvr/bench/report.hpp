#pragma once

#include "qvr/bench/config.hpp"
#include "qvr/bench/replication.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace qvr::bench {

struct ReportSet {
    std::string title;
    std::vector<ReplicationReport> reports;
};

/// Shortest decimal that reads back to the same double.
std::string format_real(double value);

/*!
 * CSV with the columns method,quantity,mean,std. Each report contributes a
 * "quantile" row, one "beta_k" and "beta_estimate_k" row per stratum when
 * present, and a "draws" row when metamodel draws were counted.
 */
void write_csv(const ReportSet& set, std::ostream& out);

/// Full report including per-replication estimates (null for failed ones) and histograms.
nlohmann::json to_json(const ReportSet& set);
void write_json(const ReportSet& set, std::ostream& out);

/// label,lower,upper,count rows of every report's histogram.
void write_histograms(const ReportSet& set, std::ostream& out);

/// Writes to `path`, throwing std::runtime_error on I/O failure.
void emit_report(const ReportSet& set, ReportFormat format, const std::string& path);
void emit_histograms(const ReportSet& set, const std::string& path);

}  // namespace qvr::bench
