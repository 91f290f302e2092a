#include "qvr/estimators.hpp"

#include "qvr/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qvr {

void PairedSample::check() const
{
    if (y.empty()) throw std::invalid_argument("PairedSample: empty sample");
    if (z.size() != y.size() || (!x.empty() && x.size() != y.size())) {
        throw std::invalid_argument("PairedSample: columns differ in length");
    }
}

PairedSample draw_paired(const ModelPair& pair, RngStream& stream, std::size_t n)
{
    PairedSample s{pair.input().sample(stream, n), {}, {}};
    s.z = pair.meta().evaluate_batch(s.x);
    s.y = pair.full().evaluate_batch(s.x);
    return s;
}

WeightedCdf empirical_cdf(std::span<const double> y)
{
    if (y.empty()) throw std::invalid_argument("empirical_cdf: empty sample");
    return WeightedCdf::uniform(std::vector<double>(y.begin(), y.end()));
}

std::vector<double> cv_weights(std::span<const double> z, double z_alpha, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("cv_weights: alpha must lie in (0, 1)");
    const std::size_t n = z.size();
    const auto below = static_cast<std::size_t>(
        std::count_if(z.begin(), z.end(), [&](double v) { return v <= z_alpha; }));
    if (below == 0 || below == n) {
        throw DegenerateSample("cv_weights: every metamodel value falls on one side of z_alpha");
    }
    const double w_below = alpha / static_cast<double>(below);
    const double w_above = (1.0 - alpha) / static_cast<double>(n - below);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = z[i] <= z_alpha ? w_below : w_above;
    return w;
}

CvCdf cv_cdf(const PairedSample& sample, double z_alpha, double alpha)
{
    sample.check();
    try {
        return {WeightedCdf(sample.y, cv_weights(sample.z, z_alpha, alpha)), false};
    } catch (const DegenerateSample&) {
        return {empirical_cdf(sample.y), true};
    }
}

double cv_cdf_general(const PairedSample& sample, const std::function<double(double)>& g,
                      double g_mean, double y)
{
    sample.check();
    const std::size_t n = sample.size();
    std::vector<double> gz(n);
    std::vector<double> ind(n);
    for (std::size_t i = 0; i < n; ++i) {
        gz[i] = g(sample.z[i]);
        ind[i] = sample.y[i] <= y ? 1.0 : 0.0;
    }
    const double nn = static_cast<double>(n);
    const double g_bar = compensated_sum(gz) / nn;
    const double i_bar = compensated_sum(ind) / nn;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dg = gz[i] - g_bar;
        sxy += dg * (ind[i] - i_bar);
        sxx += dg * dg;
    }
    if (!(sxx > 0.0)) throw DegenerateSample("cv_cdf_general: control has zero sample variance");
    return i_bar - (sxy / sxx) * (g_bar - g_mean);
}

double indicator_correlation(std::span<const double> y_values, std::span<const double> z_values,
                             double y, double z_alpha)
{
    if (y_values.size() != z_values.size() || y_values.empty()) {
        throw std::invalid_argument("indicator_correlation: columns must be nonempty and equal in length");
    }
    // With 0/1 columns everything reduces to three counts.
    const double n = static_cast<double>(y_values.size());
    double a = 0.0;
    double b = 0.0;
    double ab = 0.0;
    for (std::size_t i = 0; i < y_values.size(); ++i) {
        const bool u = y_values[i] <= y;
        const bool v = z_values[i] <= z_alpha;
        a += u;
        b += v;
        ab += u && v;
    }
    const double pa = a / n;
    const double pb = b / n;
    const double var = pa * (1.0 - pa) * pb * (1.0 - pb);
    if (!(var > 0.0)) throw DegenerateSample("indicator_correlation: an indicator column is constant");
    return (ab / n - pa * pb) / std::sqrt(var);
}

double indicator_correlation(const PairedSample& sample, double y, double z_alpha)
{
    sample.check();
    return indicator_correlation(sample.y, sample.z, y, z_alpha);
}

WeightedCdf ps_weighted_cdf(const PairedSample& sample, const StrataSpec& spec)
{
    sample.check();
    const std::size_t n = sample.size();
    std::vector<std::size_t> stratum(n);
    std::vector<std::size_t> counts(spec.strata(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        stratum[i] = spec.locate(sample.z[i]);
        ++counts[stratum[i]];
    }
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0) {
            throw DegenerateSample("ps_cdf: stratum " + std::to_string(j) + " holds no sample point");
        }
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = spec.width(stratum[i]) / static_cast<double>(counts[stratum[i]]);
    }
    return WeightedCdf(sample.y, std::move(w));
}

double ps_cdf(const PairedSample& sample, const StrataSpec& spec, double y)
{
    sample.check();
    std::vector<std::size_t> below(spec.strata(), 0);
    std::vector<std::size_t> counts(spec.strata(), 0);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const auto j = spec.locate(sample.z[i]);
        ++counts[j];
        below[j] += sample.y[i] <= y;
    }
    double f = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0) {
            throw DegenerateSample("ps_cdf: stratum " + std::to_string(j) + " holds no sample point");
        }
        f += spec.width(j) * (static_cast<double>(below[j]) / static_cast<double>(counts[j]));
    }
    return f;
}

double ps_variance_estimate(std::span<const double> p_hat, const StrataSpec& spec, std::size_t n)
{
    if (p_hat.size() != spec.strata()) throw std::invalid_argument("ps_variance_estimate: one probability per stratum");
    if (n == 0) throw std::invalid_argument("ps_variance_estimate: n must be positive");
    double v = 0.0;
    for (std::size_t j = 0; j < p_hat.size(); ++j) {
        if (!(p_hat[j] >= 0.0 && p_hat[j] <= 1.0)) {
            throw std::invalid_argument("ps_variance_estimate: probabilities must lie in [0, 1]");
        }
        v += spec.width(j) * (p_hat[j] - p_hat[j] * p_hat[j]);
    }
    return v / static_cast<double>(n);
}

double order_statistic(std::vector<double> v, std::size_t k)
{
    if (k == 0 || k > v.size()) throw std::invalid_argument("order_statistic: rank out of range");
    const auto nth = v.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(v.begin(), nth, v.end());
    return *nth;
}

CorrelationReport correlation_report(const ModelPair& pair, double alpha, std::size_t sample_count,
                                     RngStream& stream)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("correlation_report: alpha must lie in (0, 1)");
    if (sample_count < 10000) throw std::invalid_argument("correlation_report: needs at least 1e4 samples");
    std::vector<double> y(sample_count);
    std::vector<double> z(sample_count);
    std::vector<double> x(pair.dimension());
    for (std::size_t i = 0; i < sample_count; ++i) {
        pair.input().draw(stream, x);
        z[i] = pair.meta().evaluate(x);
        y[i] = pair.full().evaluate(x);
    }
    const double n = static_cast<double>(sample_count);
    const double my = compensated_sum(y) / n;
    const double mz = compensated_sum(z) / n;
    double syy = 0.0;
    double szz = 0.0;
    double syz = 0.0;
    for (std::size_t i = 0; i < sample_count; ++i) {
        const double dy = y[i] - my;
        const double dz = z[i] - mz;
        syy += dy * dy;
        szz += dz * dz;
        syz += dy * dz;
    }
    if (!(syy > 0.0 && szz > 0.0)) throw DegenerateSample("correlation_report: constant output");

    const auto rank = static_cast<std::size_t>(std::ceil(alpha * n));
    CorrelationReport r{};
    r.samples = sample_count;
    r.rho = syz / std::sqrt(syy * szz);
    r.y_alpha = order_statistic(y, rank);
    r.z_alpha = order_statistic(z, rank);
    r.rho_indicator = indicator_correlation(y, z, r.y_alpha, r.z_alpha);
    return r;
}

}  // namespace qvr
