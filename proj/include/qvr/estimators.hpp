#pragma once

#include "qvr/model.hpp"
#include "qvr/rng.hpp"
#include "qvr/sampling.hpp"
#include "qvr/weighted_cdf.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qvr {

/// i.i.d. records (x, y = f(x), z = f_r(x)) under the input law.
struct PairedSample {
    PointSet x;
    std::vector<double> y;
    std::vector<double> z;

    std::size_t size() const { return y.size(); }
    /// Throws std::invalid_argument if empty or the columns disagree in length.
    void check() const;
};

/// n fresh input draws with both models evaluated.
PairedSample draw_paired(const ModelPair& pair, RngStream& stream, std::size_t n);

WeightedCdf empirical_cdf(std::span<const double> y);

/*!
 * Control-variate weights for the indicator control 1{Z <= z_alpha}:
 * alpha/N0 below the metamodel quantile, (1-alpha)/(n-N0) above it.
 * Throws DegenerateSample when N0 is 0 or n.
 */
std::vector<double> cv_weights(std::span<const double> z, double z_alpha, double alpha);

struct CvCdf {
    WeightedCdf cdf;
    bool fallback = false;  // N0 in {0, n}: uniform weights were used instead
};

CvCdf cv_cdf(const PairedSample& sample, double z_alpha, double alpha);

/*!
 * Regression control-variate estimate of F(y) for a general control g(Z) with
 * known mean: F_EE(y) - C (mean g(Z_i) - g_mean), C the least-squares slope
 * of 1{Y <= y} on g(Z). Throws DegenerateSample if g(Z) is constant.
 */
double cv_cdf_general(const PairedSample& sample, const std::function<double(double)>& g,
                      double g_mean, double y);

/// Pearson correlation of 1{Y <= y} and 1{Z <= z_alpha} (population
/// normalization). Throws DegenerateSample if either column is constant.
double indicator_correlation(std::span<const double> y_values, std::span<const double> z_values,
                             double y, double z_alpha);
double indicator_correlation(const PairedSample& sample, double y, double z_alpha);

/// Post-stratified cdf: each point weighted width_j / n_j of its stratum.
/// Throws DegenerateSample when a stratum is empty.
WeightedCdf ps_weighted_cdf(const PairedSample& sample, const StrataSpec& spec);
double ps_cdf(const PairedSample& sample, const StrataSpec& spec, double y);

/// (1/n) sum_j width_j (P_j - P_j^2).
double ps_variance_estimate(std::span<const double> p_hat, const StrataSpec& spec, std::size_t n);

struct CorrelationReport {
    double rho;
    double rho_indicator;
    double y_alpha;
    double z_alpha;
    std::size_t samples;
};

/*!
 * Monte Carlo correlation of Y and Z and indicator correlation at the alpha
 * levels of both. Both levels are the ceil(alpha N)-th order statistics of
 * the same sample, so Y = Z gives exactly 1.
 */
CorrelationReport correlation_report(const ModelPair& pair, double alpha, std::size_t sample_count,
                                     RngStream& stream);

/// k-th smallest value (1-based) of a copy of v.
double order_statistic(std::vector<double> v, std::size_t k);

}  // namespace qvr
