#pragma once

#include "qvr/bench/config.hpp"
#include "qvr/estimators.hpp"
#include "qvr/importance.hpp"
#include "qvr/sampling.hpp"

#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qvr::bench {

/// Per-run constants computed once: metamodel quantiles and strata.
struct Prepared {
    const Experiment* experiment = nullptr;
    double z_alpha = 0.0;                 // metamodel alpha-quantile (cv)
    double threshold = 0.0;               // metamodel level of the cis event
    std::optional<StrataSpec> strata;     // ps, cs, acs
    std::optional<AllocationPlan> plan;   // cs
};

/// Stream path used for metamodel quantiles; disjoint from replication ids.
inline constexpr std::uint64_t kQuantileStreamId = ~std::uint64_t{0};

Prepared prepare(const Experiment& experiment);

/// Everything one estimator run produced, including the data a bootstrap needs.
struct RunResult {
    double estimate = 0.0;
    std::vector<double> beta;           // acs: final counts / n
    std::vector<double> beta_estimate;  // acs: allocation estimated from the pilot
    std::uint64_t draws = 0;            // cs, acs: metamodel evaluations
    bool fallback = false;              // cv degenerate control, acs floor or proportional fallback

    PairedSample paired;                         // ee, cv, ps
    std::optional<StratifiedSample> stratified;  // cs, acs
    std::optional<WeightedSample> weighted;      // cis
};

RunResult run_single(const Prepared& prepared, RngStream stream);

/// Re-estimates from (resampled) data with the experiment's estimator.
double estimate_paired(const Prepared& prepared, const PairedSample& sample);
double estimate_stratified(const Prepared& prepared, const StratifiedSample& sample);
double estimate_weighted(const Prepared& prepared, const WeightedSample& sample);

struct Replication {
    double estimate = 0.0;
    std::vector<double> beta;
    std::vector<double> beta_estimate;
    std::uint64_t draws = 0;
    bool failed = false;
    bool fallback = false;
    std::string error;
};

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;  // n-1 normalization
    double sem = 0.0;
};

Summary summarize(std::span<const double> values);

struct Histogram {
    std::vector<double> edges;  // bins are [edges[k], edges[k+1]), last one closed
    std::vector<std::size_t> counts;
};

/// Freedman-Diaconis bin width 2 IQR / n^(1/3); a single bin when the IQR is zero.
Histogram freedman_diaconis(std::span<const double> values);

struct ReplicationReport {
    std::string label;
    std::string method;
    std::string model;
    double alpha = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<Replication> runs;

    Summary estimate;
    std::vector<Summary> beta;
    std::vector<Summary> beta_estimate;
    std::optional<Summary> draws;
    std::size_t failures = 0;
    std::size_t fallbacks = 0;
    Histogram histogram;
};

/// Recomputes every summary field from `runs`.
void summarize_runs(ReplicationReport& report);

/*!
 * R independent replications, replication r on stream path [r] under the
 * master seed. Degenerate samples, quota failures and non-convergence are
 * recorded per replication; if every replication fails the first failure is
 * rethrown. Model errors and precondition violations abort the run.
 */
ReplicationReport run_replications(const Experiment& experiment, std::size_t workers = 0);

/// ceil(alpha N)-th order statistic of N plain Monte Carlo outputs of f.
double ground_truth_quantile(const ModelPair& pair, double alpha, std::size_t sample_count, RngStream& stream);

/// Number of worker threads to use for a request of 0 = automatic.
std::size_t resolve_workers(std::size_t requested);

}  // namespace qvr::bench
