#include "qvr/weighted_cdf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qvr {

std::optional<QuantileRule> parse_quantile_rule(std::string_view name)
{
    if (name == "strictly_greater") return QuantileRule::strictly_greater;
    if (name == "at_least") return QuantileRule::at_least;
    return std::nullopt;
}

std::string_view quantile_rule_name(QuantileRule rule)
{
    return rule == QuantileRule::strictly_greater ? "strictly_greater" : "at_least";
}

std::size_t invert_cumulative(std::span<const double> cumulative, double alpha, QuantileRule rule)
{
    if (cumulative.empty()) throw std::invalid_argument("invert_cumulative: empty input");
    const auto first = cumulative.begin();
    const auto it =
        rule == QuantileRule::strictly_greater
            ? std::find_if(first, cumulative.end(), [&](double c) { return c > alpha + kTieTolerance; })
            : std::find_if(first, cumulative.end(), [&](double c) { return c >= alpha - kTieTolerance; });
    if (it == cumulative.end()) return cumulative.size() - 1;
    return static_cast<std::size_t>(it - first);
}

std::vector<double> compensated_cumsum(std::span<const double> values)
{
    std::vector<double> out(values.size());
    double sum = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        const double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v)) {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
        out[i] = sum + carry;
    }
    return out;
}

double compensated_sum(std::span<const double> values)
{
    if (values.empty()) return 0.0;
    return compensated_cumsum(values).back();
}

WeightedCdf::WeightedCdf(std::vector<double> points, std::vector<double> weights)
{
    if (points.empty()) throw std::invalid_argument("WeightedCdf: no points");
    if (points.size() != weights.size()) {
        throw std::invalid_argument("WeightedCdf: points and weights differ in length");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::isnan(points[i])) throw std::invalid_argument("WeightedCdf: NaN point");
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw std::invalid_argument("WeightedCdf: weights must be finite and nonnegative");
        }
    }
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
    points_.reserve(order.size());
    weights_.reserve(order.size());
    for (auto i : order) {
        points_.push_back(points[i]);
        weights_.push_back(weights[i]);
    }
    cumulative_ = compensated_cumsum(weights_);
    if (std::fabs(cumulative_.back() - 1.0) > kTieTolerance) {
        throw std::invalid_argument("WeightedCdf: weights do not sum to one");
    }
}

WeightedCdf WeightedCdf::normalized(std::vector<double> points, std::vector<double> weights)
{
    const double total = compensated_sum(weights);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::invalid_argument("WeightedCdf::normalized: weights must have a positive finite sum");
    }
    for (auto& w : weights) w /= total;
    return WeightedCdf(std::move(points), std::move(weights));
}

WeightedCdf WeightedCdf::uniform(std::vector<double> points)
{
    if (points.empty()) throw std::invalid_argument("WeightedCdf::uniform: no points");
    std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
    return WeightedCdf(std::move(points), std::move(w));
}

double WeightedCdf::operator()(double y) const
{
    const auto it = std::upper_bound(points_.begin(), points_.end(), y);
    if (it == points_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - points_.begin()) - 1];
}

double WeightedCdf::quantile(double alpha, QuantileRule rule) const
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("WeightedCdf::quantile: alpha must lie in (0, 1)");
    return points_[invert_cumulative(cumulative_, alpha, rule)];
}

}  // namespace qvr
