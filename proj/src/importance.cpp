#include "qvr/importance.hpp"

#include "qvr/error.hpp"
#include "qvr/normal.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qvr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_marginal(const Marginal& m, double x)
{
    if (m.family == Marginal::Family::normal) {
        const double u = (x - m.location) / m.scale;
        return -0.5 * (u * u + kLog2Pi) - std::log(m.scale);
    }
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    const double lx = std::log(x);
    const double u = (lx - m.location) / m.scale;
    return -0.5 * (u * u + kLog2Pi) - std::log(m.scale) - lx;
}

double log_original(const InputDistribution& dist, std::span<const double> x)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += log_marginal(dist.components()[i], x[i]);
    return s;
}

// Weighted moments of the rows selected by `keep`; weights self-normalized.
Moments weighted_moments(const PointSet& xs, std::span<const double> weights, std::span<const char> keep)
{
    const std::size_t d = xs.dim();
    Moments m{std::vector<double>(d, 0.0), std::vector<double>(d * d, 0.0), 0};
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!keep[i]) continue;
        ++m.hits;
        total += weights[i];
        for (std::size_t k = 0; k < d; ++k) m.mean[k] += weights[i] * xs[i][k];
    }
    if (m.hits == 0 || !(total > 0.0)) return m;
    for (auto& v : m.mean) v /= total;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!keep[i]) continue;
        auto row = xs[i];
        for (std::size_t a = 0; a < d; ++a) {
            const double da = row[a] - m.mean[a];
            for (std::size_t b = 0; b <= a; ++b) m.covariance[a * d + b] += weights[i] * da * (row[b] - m.mean[b]);
        }
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
            m.covariance[a * d + b] /= total;
            m.covariance[b * d + a] = m.covariance[a * d + b];
        }
    }
    return m;
}

}  // namespace

std::optional<BiasedFamily> parse_biased_family(std::string_view name)
{
    if (name == "joint_gaussian") return BiasedFamily::joint_gaussian;
    if (name == "componentwise_matched") return BiasedFamily::componentwise_matched;
    return std::nullopt;
}

std::string_view biased_family_name(BiasedFamily family)
{
    return family == BiasedFamily::joint_gaussian ? "joint_gaussian" : "componentwise_matched";
}

std::optional<TailEvent> parse_tail_event(std::string_view name)
{
    if (name == "upper") return TailEvent::upper;
    if (name == "lower") return TailEvent::lower;
    return std::nullopt;
}

std::string_view tail_event_name(TailEvent tail)
{
    return tail == TailEvent::upper ? "upper" : "lower";
}

std::optional<IsMode> parse_is_mode(std::string_view name)
{
    if (name == "raw") return IsMode::raw;
    if (name == "self_normalized") return IsMode::self_normalized;
    if (name == "complement") return IsMode::complement;
    return std::nullopt;
}

std::string_view is_mode_name(IsMode mode)
{
    switch (mode) {
    case IsMode::raw: return "raw";
    case IsMode::self_normalized: return "self_normalized";
    case IsMode::complement: return "complement";
    }
    return "unknown";
}

BiasedDensity::BiasedDensity(BiasedParams params, const InputDistribution& original)
    : params_(std::move(params))
{
    const std::size_t d = params_.dimension();
    if (d == 0 || d != original.dimension() || params_.covariance.size() != d * d) {
        throw std::invalid_argument("BiasedDensity: mean/covariance do not match the input dimension");
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double a = params_.cov(i, j);
            const double b = params_.cov(j, i);
            if (std::fabs(a - b) > 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)})) {
                throw std::invalid_argument("BiasedDensity: covariance is not symmetric");
            }
        }
    }

    if (params_.family == BiasedFamily::componentwise_matched) {
        for (std::size_t i = 0; i < d; ++i) {
            const double m = params_.mean[i];
            const double v = params_.cov(i, i);
            if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(m)) {
                throw std::invalid_argument("BiasedDensity: component variances must be positive and finite");
            }
            if (original.components()[i].family == Marginal::Family::lognormal) {
                if (!(m > 0.0)) throw std::invalid_argument("BiasedDensity: lognormal component needs a positive mean");
                const double s2 = std::log1p(v / (m * m));
                marginals_.push_back(Marginal::lognormal(std::log(m) - 0.5 * s2, std::sqrt(s2)));
            } else {
                marginals_.push_back(Marginal::normal(m, std::sqrt(v)));
            }
        }
        return;
    }

    Eigen::MatrixXd c(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = params_.cov(i, j);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("BiasedDensity: covariance is not positive definite");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    chol_.assign(d * d, 0.0);
    double log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diag = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        if (!(diag > 0.0)) throw std::invalid_argument("BiasedDensity: covariance is not positive definite");
        log_det += 2.0 * std::log(diag);
        for (std::size_t j = 0; j <= i; ++j) chol_[i * d + j] = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    log_norm_ = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
}

double BiasedDensity::log_density(std::span<const double> x) const
{
    const std::size_t d = dimension();
    if (x.size() != d) throw std::invalid_argument("BiasedDensity: dimension mismatch");
    if (params_.family == BiasedFamily::componentwise_matched) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += log_marginal(marginals_[i], x[i]);
        return s;
    }
    // Forward substitution L u = x - mean; the quadratic form is |u|^2.
    double quad = 0.0;
    std::vector<double> u(d);
    for (std::size_t i = 0; i < d; ++i) {
        double r = x[i] - params_.mean[i];
        for (std::size_t j = 0; j < i; ++j) r -= chol_[i * d + j] * u[j];
        u[i] = r / chol_[i * d + i];
        quad += u[i] * u[i];
    }
    return log_norm_ - 0.5 * quad;
}

double BiasedDensity::density(std::span<const double> x) const
{
    return std::exp(log_density(x));
}

void BiasedDensity::draw(RngStream& stream, std::span<double> out) const
{
    const std::size_t d = dimension();
    if (params_.family == BiasedFamily::componentwise_matched) {
        for (std::size_t i = 0; i < d; ++i) out[i] = marginals_[i].draw(stream);
        return;
    }
    std::vector<double> g(d);
    for (auto& v : g) v = stream.normal();
    for (std::size_t i = 0; i < d; ++i) {
        double s = params_.mean[i];
        for (std::size_t j = 0; j <= i; ++j) s += chol_[i * d + j] * g[j];
        out[i] = s;
    }
}

double biased_density(const BiasedParams& params, const InputDistribution& original, std::span<const double> x)
{
    return BiasedDensity(params, original).density(x);
}

BiasedParams moment_match(const ModelPair& pair, double threshold, const MomentMatchOptions& options,
                          RngStream& stream)
{
    if (options.pilot < 1000) throw std::invalid_argument("moment_match: pilot must be at least 1000");
    const std::size_t d = pair.dimension();
    PointSet xs(d);
    xs.reserve(options.pilot);
    std::vector<double> w(options.pilot, 1.0);
    std::vector<char> keep(options.pilot, 0);
    std::vector<double> x(d);
    for (std::size_t i = 0; i < options.pilot; ++i) {
        if (options.q0) {
            options.q0->draw(stream, x);
            w[i] = std::exp(log_original(pair.input(), x) - options.q0->log_density(x));
        } else {
            pair.input().draw(stream, x);
        }
        xs.push_back(x);
        keep[i] = in_event(pair.meta().evaluate(x), threshold, options.tail);
    }
    auto m = weighted_moments(xs, w, keep);
    if (m.hits == 0) {
        std::ostringstream msg;
        msg << "moment_match: no pilot point satisfies the " << tail_event_name(options.tail)
            << " event at threshold " << threshold;
        throw DegenerateSample(msg.str());
    }

    BiasedParams p{options.family, std::move(m.mean), std::move(m.covariance)};
    if (options.family == BiasedFamily::componentwise_matched) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
                if (a != b) p.covariance[a * d + b] = 0.0;
            }
        }
    }
    double trace = 0.0;
    for (std::size_t a = 0; a < d; ++a) trace += p.covariance[a * d + a];
    const double eps = 1e-8 * trace / static_cast<double>(d);
    for (std::size_t a = 0; a < d; ++a) p.covariance[a * d + a] += eps;
    try {
        BiasedDensity check(p, pair.input());
    } catch (const std::invalid_argument& e) {
        throw DegenerateSample(std::string("moment_match: fitted member is unusable: ") + e.what());
    }
    return p;
}

WeightedSample draw_weighted(const ModelPair& pair, const BiasedDensity* member, std::size_t n, RngStream& stream)
{
    const std::size_t d = pair.dimension();
    WeightedSample s{PointSet(d), {}, std::vector<double>(n, 1.0)};
    s.x.reserve(n);
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
        if (member) {
            member->draw(stream, x);
            s.w[i] = std::exp(log_original(pair.input(), x) - member->log_density(x));
        } else {
            pair.input().draw(stream, x);
        }
        s.x.push_back(x);
    }
    s.y = pair.full().evaluate_batch(s.x);
    return s;
}

double is_cdf(const WeightedSample& sample, double y, IsMode mode)
{
    if (sample.size() == 0) throw std::invalid_argument("is_cdf: empty sample");
    std::vector<double> below;
    std::vector<double> above;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        (sample.y[i] <= y ? below : above).push_back(sample.w[i]);
    }
    const double n = static_cast<double>(sample.size());
    switch (mode) {
    case IsMode::raw: return compensated_sum(below) / n;
    case IsMode::self_normalized: {
        const double b = compensated_sum(below);
        const double total = b + compensated_sum(above);
        if (!(total > 0.0)) throw DegenerateSample("is_cdf: all likelihood ratios are zero");
        return b / total;
    }
    case IsMode::complement: return 1.0 - compensated_sum(above) / n;
    }
    return 0.0;
}

double is_variance_estimate(const WeightedSample& sample, double y)
{
    if (sample.size() == 0) throw std::invalid_argument("is_variance_estimate: empty sample");
    std::vector<double> hits;
    std::vector<double> squares;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (sample.y[i] <= y) {
            hits.push_back(sample.w[i]);
            squares.push_back(sample.w[i] * sample.w[i]);
        }
    }
    const double n = static_cast<double>(sample.size());
    const double mean = compensated_sum(hits) / n;
    const double second = compensated_sum(squares) / n;
    return std::max(0.0, second - mean * mean) / n;
}

double is_quantile(const WeightedSample& sample, double alpha, IsMode mode, QuantileRule rule)
{
    if (sample.size() == 0) throw std::invalid_argument("is_quantile: empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("is_quantile: alpha must lie in (0, 1)");
    const std::size_t n = sample.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sample.y[a] < sample.y[b]; });
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = sample.w[order[i]];

    std::vector<double> cum(n);
    const double nn = static_cast<double>(n);
    if (mode == IsMode::complement) {
        // F at the i-th point is 1 - (mass strictly above it) / n.
        std::vector<double> reversed(w.rbegin(), w.rend());
        const auto tail = compensated_cumsum(reversed);
        for (std::size_t i = 0; i < n; ++i) {
            const double above = i + 1 < n ? tail[n - i - 2] : 0.0;
            cum[i] = 1.0 - above / nn;
        }
    } else {
        cum = compensated_cumsum(w);
        const double scale = mode == IsMode::raw ? nn : cum.back();
        if (!(scale > 0.0)) throw DegenerateSample("is_quantile: all likelihood ratios are zero");
        for (auto& c : cum) c /= scale;
    }
    return sample.y[order[invert_cumulative(cum, alpha, rule)]];
}

CisResult cis_quantile(const ModelPair& pair, const CisConfig& config, RngStream& stream)
{
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw std::invalid_argument("cis_quantile: alpha must lie in (0, 1)");
    if (config.n == 0) throw std::invalid_argument("cis_quantile: n must be positive");
    CisResult result;
    if (config.use_original) {
        auto draw_stream = stream.child(1);
        result.sample = draw_weighted(pair, nullptr, config.n, draw_stream);
        result.estimate = is_quantile(result.sample, config.alpha, config.mode, config.rule);
        return result;
    }

    auto pilot_stream = stream.child(0);
    MomentMatchOptions mm{config.family, config.tail, config.pilot, nullptr};
    const BiasedParams params = moment_match(pair, config.threshold, mm, pilot_stream);
    const BiasedDensity member(params, pair.input());

    auto check_stream = stream.child(2);
    std::vector<double> x(pair.dimension());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < config.check_samples; ++i) {
        member.draw(check_stream, x);
        hits += in_event(pair.meta().evaluate(x), config.threshold, config.tail);
    }
    result.event_mass = config.check_samples ? static_cast<double>(hits) / static_cast<double>(config.check_samples) : 1.0;
    const bool center_inside = in_event(pair.meta().evaluate(params.mean), config.threshold, config.tail);
    if (result.event_mass < config.min_event_mass || !center_inside) {
        std::ostringstream msg;
        msg << "biased density did not converge: member mass on the event is " << result.event_mass
            << (center_inside ? "" : " and its mean lies outside the event")
            << "; the event probably splits into separate regions";
        throw NonConvergence(msg.str());
    }

    auto draw_stream = stream.child(1);
    result.params = params;
    result.sample = draw_weighted(pair, &member, config.n, draw_stream);
    result.estimate = is_quantile(result.sample, config.alpha, config.mode, config.rule);
    return result;
}

Moments true_optimal_moments(const ModelPair& pair, double threshold, TailEvent tail,
                             std::size_t sample_count, RngStream& stream)
{
    if (sample_count < 1000000) throw std::invalid_argument("true_optimal_moments: needs at least 1e6 samples");
    const std::size_t d = pair.dimension();
    // Streaming sums; only points in the event are kept.
    PointSet kept(d);
    std::vector<double> x(d);
    for (std::size_t i = 0; i < sample_count; ++i) {
        pair.input().draw(stream, x);
        const double y = pair.full().evaluate(x);
        if (in_event(y, threshold, tail)) kept.push_back(x);
    }
    if (kept.empty()) throw DegenerateSample("true_optimal_moments: the event is empty");
    const std::vector<double> w(kept.size(), 1.0);
    const std::vector<char> keep(kept.size(), 1);
    return weighted_moments(kept, w, keep);
}

}  // namespace qvr
