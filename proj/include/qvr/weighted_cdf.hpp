#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qvr {

/*!
 * How a step cdf is inverted at level alpha.
 *
 * strictly_greater: smallest support point with F > alpha, i.e. the
 *   ((floor(alpha n) + 1)-th order statistic for uniform weights.
 * at_least: smallest support point with F >= alpha, i.e. the ceil(alpha n)-th
 *   order statistic. The two differ only when alpha n is an integer.
 *
 * Cumulative sums are compared with a 1e-12 tolerance so that rounding in the
 * weights does not move the answer across a tie.
 */
enum class QuantileRule { strictly_greater, at_least };

inline constexpr double kTieTolerance = 1e-12;

std::optional<QuantileRule> parse_quantile_rule(std::string_view name);
std::string_view quantile_rule_name(QuantileRule rule);

/// Index of the first cumulative value passing alpha under `rule`, or the
/// last index if none does (the level sits above the total mass).
std::size_t invert_cumulative(std::span<const double> cumulative, double alpha, QuantileRule rule);

/// Running sum with Neumaier compensation.
std::vector<double> compensated_cumsum(std::span<const double> values);
double compensated_sum(std::span<const double> values);

/// Step cdf sum_{i: y_i <= y} w_i with nonnegative weights summing to one.
class WeightedCdf {
public:
    /// Sorts the points (stable, weights follow). Throws std::invalid_argument
    /// on empty input, negative or non-finite weights, or a total off 1 by
    /// more than 1e-12.
    WeightedCdf(std::vector<double> points, std::vector<double> weights);

    /// Divides the weights by their sum first.
    static WeightedCdf normalized(std::vector<double> points, std::vector<double> weights);
    static WeightedCdf uniform(std::vector<double> points);

    std::size_t size() const { return points_.size(); }
    const std::vector<double>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& cumulative() const { return cumulative_; }

    /// F(y); right-continuous.
    double operator()(double y) const;

    /// Generalized inverse; alpha must lie in (0, 1).
    double quantile(double alpha, QuantileRule rule = QuantileRule::at_least) const;

private:
    std::vector<double> points_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
};

}  // namespace qvr
