#pragma once

#include "qvr/model.hpp"
#include "qvr/rng.hpp"
#include "qvr/sampling.hpp"
#include "qvr/weighted_cdf.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace qvr {

/// Per-stratum estimates of P_j(y) = P(Y <= y | Z in stratum j).
struct ConditionalProbs {
    std::vector<double> p;
    std::vector<std::size_t> counts;
};

ConditionalProbs conditional_probs(const StratifiedSample& sample, double y);

struct CsEstimate {
    double value;
    ConditionalProbs probs;
};

/// sum_j width_j P_j(y). Every stratum of positive width needs a point;
/// otherwise DegenerateSample.
CsEstimate cs_cdf(const StratifiedSample& sample, const StrataSpec& spec, double y);

/// The same estimator as a weighted cdf: each point of stratum j weighs width_j / N_j.
WeightedCdf cs_weighted_cdf(const StratifiedSample& sample, const StrataSpec& spec);

double cs_quantile(const StratifiedSample& sample, const StrataSpec& spec, double alpha,
                   QuantileRule rule = QuantileRule::at_least);

/// sum_j width_j^2 (P_j - P_j^2) / N_j.
double cs_variance(std::span<const double> p, const StrataSpec& spec, const AllocationPlan& plan);

/// q_j = width_j^2 (P_j - P_j^2).
std::vector<double> allocation_scores(std::span<const double> p, const StrataSpec& spec);

/// beta*_j = sqrt(q_j) / sum_l sqrt(q_l). Throws DegenerateSample if every q_j is zero.
std::vector<double> optimal_allocation(std::span<const double> p, const StrataSpec& spec);

/// {sum_j width_j sqrt(P_j - P_j^2)}^2, the reduced variance under beta*.
double ocs_variance(std::span<const double> p, const StrataSpec& spec);

/// sum_j width_j (P_j - P_j^2), the reduced variance under proportional allocation.
double proportional_variance(std::span<const double> p, const StrataSpec& spec);

/// Integer counts summing to `total`, as close as possible to shares * total
/// (largest remainder; ties go to the lower index). Shares must be
/// nonnegative with a positive sum; they are normalized first.
std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total);

struct AcsConfig {
    AcsConfig(StrataSpec spec_, std::size_t n_) : spec(std::move(spec_)), n(n_) {}

    StrataSpec spec;
    std::size_t n = 0;
    /// Pilot size: pilot_per_stratum points in each stratum when set (>0),
    /// else round(n^pilot_exponent) when set, else n/10 per stratum.
    std::size_t pilot_per_stratum = 0;
    std::optional<double> pilot_exponent;
    /// A priori pilot shares for the exponent-sized pilot; empty = even.
    std::vector<double> pilot_shares;
    /// Floor on the final count of every stratum.
    std::size_t min_per_stratum = 1;
    QuantileRule rule = QuantileRule::at_least;
    std::uint64_t max_draws = 0;

    /// Pilot counts implied by the fields above; throws if they do not fit n.
    AllocationPlan pilot_plan() const;
};

struct AcsResult {
    std::vector<double> beta_estimate;   // allocation estimated from the pilot
    std::vector<double> beta_effective;  // final counts / n
    std::vector<std::size_t> pilot_counts;
    std::vector<std::size_t> final_counts;
    double estimate = 0.0;                // F(y) or the alpha-quantile
    std::optional<double> pilot_quantile;
    std::uint64_t draws = 0;              // metamodel evaluations over both phases
    bool proportional_fallback = false;   // pilot gave q_j = 0 everywhere
    bool floor_applied = false;           // some stratum with beta estimate 0 was floored
    StratifiedSample sample;
};

/// Two-phase adaptive stratification for F(y).
AcsResult acs_cdf(const ModelPair& pair, const AcsConfig& config, double y, RngStream& stream);

/// Two-phase adaptive stratification for the alpha-quantile: the allocation
/// is optimized at the pilot quantile.
AcsResult acs_quantile(const ModelPair& pair, const AcsConfig& config, double alpha,
                       RngStream& stream);

/// Phase-two counts: targets from beta, pilot points kept, surplus of strata
/// already above target spread over the others in proportion to their deficits.
std::vector<std::size_t> phase_two_counts(std::span<const double> beta,
                                          std::span<const std::size_t> pilot, std::size_t n,
                                          std::size_t min_per_stratum, bool& floor_applied);

struct TwoStrataFactor {
    double k;            // sigma_ACS = sqrt(F(1-F)) K
    double ratio;        // K^2 = sigma^2_ACS / sigma^2_EE
    double k_expansion;  // 1 - rho^2 / (8 F (1-F)), second-order expansion of K
};

/// Two strata split at alpha, F = F(y), rho = indicator correlation.
/// Throws std::invalid_argument for an infeasible triple.
TwoStrataFactor two_strata_acs_factor(double alpha, double f, double rho);

enum class ControlBranch { z_below, z_at_or_above };

/// Indicator correlation under a monotone control Z = psi(Y).
double strong_control_rho(double alpha, double f, ControlBranch branch);

}  // namespace qvr
