#pragma once

#include "qvr/model.hpp"
#include "qvr/rng.hpp"
#include "qvr/weighted_cdf.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qvr {

enum class BiasedFamily {
    joint_gaussian,         // d-dimensional normal, full covariance
    componentwise_matched,  // each marginal keeps its family; means and variances matched
};

std::optional<BiasedFamily> parse_biased_family(std::string_view name);
std::string_view biased_family_name(BiasedFamily family);

/// First two moments selecting a member of a biased family. covariance is
/// d x d row-major; componentwise members only use its diagonal.
struct BiasedParams {
    BiasedFamily family = BiasedFamily::joint_gaussian;
    std::vector<double> mean;
    std::vector<double> covariance;

    std::size_t dimension() const { return mean.size(); }
    double cov(std::size_t i, std::size_t j) const { return covariance[i * mean.size() + j]; }
};

/*!
 * A concrete biased density. The original input law is needed to know which
 * marginals are lognormal for the componentwise family; a lognormal marginal
 * with matched mean m and variance v gets log-parameters
 * s^2 = log(1 + v/m^2), mu = log m - s^2/2.
 *
 * Throws std::invalid_argument if the covariance is not symmetric positive
 * definite or a lognormal component has a nonpositive mean.
 */
class BiasedDensity {
public:
    BiasedDensity(BiasedParams params, const InputDistribution& original);

    const BiasedParams& params() const { return params_; }
    std::size_t dimension() const { return params_.dimension(); }

    double density(std::span<const double> x) const;
    /// -inf outside the support.
    double log_density(std::span<const double> x) const;
    void draw(RngStream& stream, std::span<double> out) const;

    /// The marginal used for component i (componentwise family only).
    const Marginal& component(std::size_t i) const { return marginals_.at(i); }

private:
    BiasedParams params_;
    std::vector<Marginal> marginals_;  // componentwise family
    std::vector<double> chol_;         // lower factor, row-major (joint family)
    double log_norm_ = 0.0;            // joint family: log of the normalizing constant
};

double biased_density(const BiasedParams& params, const InputDistribution& original,
                      std::span<const double> x);

enum class TailEvent {
    upper,  // {f_r(X) > threshold}
    lower,  // {f_r(X) <= threshold}
};

std::optional<TailEvent> parse_tail_event(std::string_view name);
std::string_view tail_event_name(TailEvent tail);

inline bool in_event(double z, double threshold, TailEvent tail)
{
    return tail == TailEvent::upper ? z > threshold : z <= threshold;
}

struct MomentMatchOptions {
    BiasedFamily family = BiasedFamily::joint_gaussian;
    TailEvent tail = TailEvent::upper;
    std::size_t pilot = 10000;
    /// Pilot sampling density; nullptr means the original input law.
    const BiasedDensity* q0 = nullptr;
};

/*!
 * Self-normalized weighted mean and covariance (weights q_ori/q0) of pilot
 * inputs falling in the metamodel event. The covariance gets
 * 1e-8 trace(C)/d added on the diagonal before factorization.
 * Throws DegenerateSample if no pilot point hits the event and
 * std::invalid_argument for pilot < 1000.
 */
BiasedParams moment_match(const ModelPair& pair, double threshold, const MomentMatchOptions& options,
                          RngStream& stream);

/// Records drawn from a biased density with likelihood ratios q_ori/q.
struct WeightedSample {
    PointSet x;
    std::vector<double> y;
    std::vector<double> w;

    std::size_t size() const { return y.size(); }
};

/// n draws from `member` (or from the input law itself when member is null).
WeightedSample draw_weighted(const ModelPair& pair, const BiasedDensity* member, std::size_t n,
                             RngStream& stream);

enum class IsMode {
    raw,              // (1/n) sum 1{Y <= y} w
    self_normalized,  // sum 1{Y <= y} w / sum w
    complement,       // 1 - (1/n) sum 1{Y > y} w
};

std::optional<IsMode> parse_is_mode(std::string_view name);
std::string_view is_mode_name(IsMode mode);

double is_cdf(const WeightedSample& sample, double y, IsMode mode);

/// (1/n) [mean of (1{Y <= y} w)^2 - raw estimate^2].
double is_variance_estimate(const WeightedSample& sample, double y);

/// Generalized inverse of the IS cdf in the given mode.
double is_quantile(const WeightedSample& sample, double alpha, IsMode mode,
                   QuantileRule rule = QuantileRule::at_least);

struct CisConfig {
    BiasedFamily family = BiasedFamily::joint_gaussian;
    double alpha = 0.95;
    std::size_t n = 200;
    std::size_t pilot = 10000;
    TailEvent tail = TailEvent::upper;
    IsMode mode = IsMode::complement;
    QuantileRule rule = QuantileRule::at_least;
    /// Metamodel level that defines the conditioning event (z at alpha').
    double threshold = 0.0;
    /// Minimum share of the fitted member's mass that must land in the event.
    double min_event_mass = 0.1;
    std::size_t check_samples = 10000;
    /// Skip the fit and sample the input law itself (w = 1).
    bool use_original = false;
};

struct CisResult {
    double estimate = 0.0;
    std::optional<BiasedParams> params;
    double event_mass = 1.0;  // member mass on the event, by metamodel MC
    WeightedSample sample;
};

/*!
 * Controlled importance sampling for the alpha-quantile. Fits the member on
 * the metamodel event, checks that it actually concentrates there, then runs
 * n full-model evaluations. Throws NonConvergence when the member puts less
 * than min_event_mass on the event or its mean lies outside the event, the
 * symptom of an event made of several separated regions.
 */
CisResult cis_quantile(const ModelPair& pair, const CisConfig& config, RngStream& stream);

struct Moments {
    std::vector<double> mean;
    std::vector<double> covariance;  // row-major d x d, population normalization
    std::size_t hits = 0;
};

/// Plain Monte Carlo moments of X given the full-model event
/// {f(X) > threshold} (upper) or {f(X) <= threshold} (lower).
Moments true_optimal_moments(const ModelPair& pair, double threshold, TailEvent tail,
                             std::size_t sample_count, RngStream& stream);

}  // namespace qvr
