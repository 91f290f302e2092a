#include "qvr/strata.hpp"

#include "qvr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qvr {

namespace {

void check_probs(std::span<const double> p, const StrataSpec& spec, const char* who)
{
    if (p.size() != spec.strata()) {
        throw std::invalid_argument(std::string(who) + ": one probability per stratum is required");
    }
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(who) + ": probabilities must lie in [0, 1]");
        }
    }
}

void require_nonempty(const StratifiedSample& sample, const StrataSpec& spec, const char* who)
{
    if (sample.strata.size() != spec.strata()) {
        throw std::invalid_argument(std::string(who) + ": sample and spec disagree on the stratum count");
    }
    for (std::size_t j = 0; j < sample.strata.size(); ++j) {
        if (!sample.strata[j].evaluated()) {
            throw std::invalid_argument(std::string(who) + ": sample has unevaluated points");
        }
        if (sample.strata[j].size() == 0 && spec.width(j) > 0.0) {
            throw DegenerateSample(std::string(who) + ": stratum " + std::to_string(j) + " is empty");
        }
    }
}

}  // namespace

ConditionalProbs conditional_probs(const StratifiedSample& sample, double y)
{
    ConditionalProbs out;
    out.p.resize(sample.strata.size(), 0.0);
    out.counts = sample.counts();
    for (std::size_t j = 0; j < sample.strata.size(); ++j) {
        const auto& ys = sample.strata[j].y;
        if (ys.empty()) continue;
        const auto below = std::count_if(ys.begin(), ys.end(), [&](double v) { return v <= y; });
        out.p[j] = static_cast<double>(below) / static_cast<double>(ys.size());
    }
    return out;
}

CsEstimate cs_cdf(const StratifiedSample& sample, const StrataSpec& spec, double y)
{
    require_nonempty(sample, spec, "cs_cdf");
    CsEstimate e{0.0, conditional_probs(sample, y)};
    for (std::size_t j = 0; j < spec.strata(); ++j) e.value += spec.width(j) * e.probs.p[j];
    return e;
}

WeightedCdf cs_weighted_cdf(const StratifiedSample& sample, const StrataSpec& spec)
{
    require_nonempty(sample, spec, "cs_weighted_cdf");
    std::vector<double> points;
    std::vector<double> weights;
    points.reserve(sample.total());
    weights.reserve(sample.total());
    for (std::size_t j = 0; j < spec.strata(); ++j) {
        const auto& s = sample.strata[j];
        const double w = spec.width(j) / static_cast<double>(s.size());
        points.insert(points.end(), s.y.begin(), s.y.end());
        weights.insert(weights.end(), s.size(), w);
    }
    return WeightedCdf(std::move(points), std::move(weights));
}

double cs_quantile(const StratifiedSample& sample, const StrataSpec& spec, double alpha, QuantileRule rule)
{
    return cs_weighted_cdf(sample, spec).quantile(alpha, rule);
}

double cs_variance(std::span<const double> p, const StrataSpec& spec, const AllocationPlan& plan)
{
    check_probs(p, spec, "cs_variance");
    plan.check(spec);
    double v = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double w = spec.width(j);
        if (plan.counts[j] == 0) throw std::invalid_argument("cs_variance: every stratum needs a point");
        v += w * w * (p[j] - p[j] * p[j]) / static_cast<double>(plan.counts[j]);
    }
    return v;
}

std::vector<double> allocation_scores(std::span<const double> p, const StrataSpec& spec)
{
    check_probs(p, spec, "allocation_scores");
    std::vector<double> q(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double w = spec.width(j);
        q[j] = w * w * (p[j] - p[j] * p[j]);
    }
    return q;
}

std::vector<double> optimal_allocation(std::span<const double> p, const StrataSpec& spec)
{
    auto beta = allocation_scores(p, spec);
    double total = 0.0;
    for (auto& b : beta) {
        b = std::sqrt(b);
        total += b;
    }
    if (!(total > 0.0)) {
        throw DegenerateSample("optimal_allocation: every stratum has P_j in {0, 1}; no allocation is defined");
    }
    for (auto& b : beta) b /= total;
    return beta;
}

double ocs_variance(std::span<const double> p, const StrataSpec& spec)
{
    check_probs(p, spec, "ocs_variance");
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += spec.width(j) * std::sqrt(p[j] - p[j] * p[j]);
    return s * s;
}

double proportional_variance(std::span<const double> p, const StrataSpec& spec)
{
    check_probs(p, spec, "proportional_variance");
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += spec.width(j) * (p[j] - p[j] * p[j]);
    return s;
}

std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total)
{
    if (shares.empty()) throw std::invalid_argument("largest_remainder: no shares");
    double sum = 0.0;
    for (double s : shares) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("largest_remainder: shares must be finite and nonnegative");
        }
        sum += s;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("largest_remainder: shares sum to zero");

    std::vector<std::size_t> counts(shares.size());
    std::vector<double> remainder(shares.size());
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < shares.size(); ++j) {
        const double target = shares[j] / sum * static_cast<double>(total);
        counts[j] = static_cast<std::size_t>(std::floor(target));
        remainder[j] = target - static_cast<double>(counts[j]);
        assigned += counts[j];
    }
    // Rounding in the division can push the floors past the total by one.
    while (assigned > total) {
        auto j = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        --counts[j];
        --assigned;
    }
    std::vector<std::size_t> order(shares.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        ++counts[order[k]];
        ++assigned;
    }
    return counts;
}

AllocationPlan AcsConfig::pilot_plan() const
{
    const std::size_t m = spec.strata();
    AllocationPlan plan;
    if (pilot_per_stratum > 0 || !pilot_exponent) {
        const std::size_t each = pilot_per_stratum > 0 ? pilot_per_stratum : n / 10;
        plan.counts.assign(m, each);
    } else {
        const double g = *pilot_exponent;
        if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("AcsConfig: pilot exponent must lie in (0, 1)");
        const auto pilot = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n), g)));
        if (pilot_shares.empty()) {
            plan.counts = largest_remainder(std::vector<double>(m, 1.0), pilot);
        } else {
            if (pilot_shares.size() != m) throw std::invalid_argument("AcsConfig: one pilot share per stratum");
            for (double s : pilot_shares) {
                if (!(s > 0.0)) throw std::invalid_argument("AcsConfig: pilot shares must be positive");
            }
            plan.counts = largest_remainder(pilot_shares, pilot);
        }
    }
    const std::size_t total = plan.total();
    if (total == 0 || total >= n) {
        throw std::invalid_argument("AcsConfig: the pilot must use between 1 and n-1 simulations (pilot " +
                                    std::to_string(total) + ", n " + std::to_string(n) + ")");
    }
    return plan;
}

std::vector<std::size_t> phase_two_counts(std::span<const double> beta,
                                          std::span<const std::size_t> pilot, std::size_t n,
                                          std::size_t min_per_stratum, bool& floor_applied)
{
    const std::size_t m = beta.size();
    if (pilot.size() != m) throw std::invalid_argument("phase_two_counts: length mismatch");
    const std::size_t used = std::accumulate(pilot.begin(), pilot.end(), std::size_t{0});
    if (used > n) throw std::invalid_argument("phase_two_counts: pilot exceeds the budget");
    if (min_per_stratum * m > n) throw std::invalid_argument("phase_two_counts: floor exceeds the budget");
    std::size_t need = n - used;

    auto target = largest_remainder(beta, n);
    floor_applied = false;
    std::vector<std::size_t> add(m, 0);
    // Floors come first and are met exactly.
    for (std::size_t j = 0; j < m; ++j) {
        if (target[j] < min_per_stratum) {
            if (beta[j] == 0.0) floor_applied = true;
            target[j] = min_per_stratum;
        }
        if (pilot[j] < min_per_stratum) {
            add[j] = min_per_stratum - pilot[j];
            need -= add[j];
        }
    }
    std::vector<double> deficit(m, 0.0);
    double total_deficit = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t have = pilot[j] + add[j];
        if (target[j] > have) deficit[j] = static_cast<double>(target[j] - have);
        total_deficit += deficit[j];
    }
    if (need > 0) {
        const auto extra = total_deficit > 0.0 ? largest_remainder(deficit, need)
                                                : largest_remainder(std::vector<double>(m, 1.0), need);
        for (std::size_t j = 0; j < m; ++j) add[j] += extra[j];
    }
    return add;
}

namespace {

struct Phases {
    AllocationPlan pilot;
    StratifiedSample sample;
    std::uint64_t draws = 0;
};

Phases run_pilot(const ModelPair& pair, const AcsConfig& config, RngStream& stream)
{
    Phases ph{config.pilot_plan(), {}, 0};
    auto r = sample_strata(pair, config.spec, ph.pilot, stream, config.max_draws);
    evaluate_full(pair, r.sample);
    ph.sample = std::move(r.sample);
    ph.draws = r.draws;
    return ph;
}

void run_phase_two(const ModelPair& pair, const AcsConfig& config, const std::vector<double>& p,
                   Phases& ph, AcsResult& result, RngStream& stream)
{
    const auto& spec = config.spec;
    try {
        result.beta_estimate = optimal_allocation(p, spec);
    } catch (const DegenerateSample&) {
        result.beta_estimate = spec.widths();
        result.proportional_fallback = true;
    }
    const auto add = phase_two_counts(result.beta_estimate, ph.pilot.counts, config.n,
                                      config.min_per_stratum, result.floor_applied);
    result.draws = ph.draws + extend_strata(pair, spec, ph.sample, AllocationPlan{add}, stream, config.max_draws);
    evaluate_full(pair, ph.sample);
    result.pilot_counts = ph.pilot.counts;
    result.final_counts = ph.sample.counts();
    result.beta_effective.resize(result.final_counts.size());
    for (std::size_t j = 0; j < result.final_counts.size(); ++j) {
        result.beta_effective[j] = static_cast<double>(result.final_counts[j]) / static_cast<double>(config.n);
    }
}

}  // namespace

AcsResult acs_cdf(const ModelPair& pair, const AcsConfig& config, double y, RngStream& stream)
{
    auto pilot_stream = stream.child(0);
    auto second_stream = stream.child(1);
    Phases ph = run_pilot(pair, config, pilot_stream);
    AcsResult result;
    require_nonempty(ph.sample, config.spec, "acs_cdf pilot");
    run_phase_two(pair, config, conditional_probs(ph.sample, y).p, ph, result, second_stream);
    result.estimate = cs_cdf(ph.sample, config.spec, y).value;
    result.sample = std::move(ph.sample);
    return result;
}

AcsResult acs_quantile(const ModelPair& pair, const AcsConfig& config, double alpha, RngStream& stream)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("acs_quantile: alpha must lie in (0, 1)");
    auto pilot_stream = stream.child(0);
    auto second_stream = stream.child(1);
    Phases ph = run_pilot(pair, config, pilot_stream);
    AcsResult result;
    const double pilot_q = cs_quantile(ph.sample, config.spec, alpha, config.rule);
    result.pilot_quantile = pilot_q;
    run_phase_two(pair, config, conditional_probs(ph.sample, pilot_q).p, ph, result, second_stream);
    result.estimate = cs_quantile(ph.sample, config.spec, alpha, config.rule);
    result.sample = std::move(ph.sample);
    return result;
}

TwoStrataFactor two_strata_acs_factor(double alpha, double f, double rho)
{
    if (!(alpha > 0.0 && alpha < 1.0) || !(f > 0.0 && f < 1.0)) {
        throw std::invalid_argument("two_strata_acs_factor: alpha and F must lie in (0, 1)");
    }
    if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("two_strata_acs_factor: rho must lie in [-1, 1]");
    const double a = alpha;
    const double brackets[4] = {
        1.0 + rho * std::sqrt((1 - a) * (1 - f) / (a * f)),
        1.0 - rho * std::sqrt((1 - a) * f / (a * (1 - f))),
        1.0 + rho * std::sqrt(a * f / ((1 - a) * (1 - f))),
        1.0 - rho * std::sqrt(a * (1 - f) / ((1 - a) * f)),
    };
    for (double b : brackets) {
        if (b < -1e-12) {
            throw std::invalid_argument("two_strata_acs_factor: (alpha, F, rho) is infeasible");
        }
    }
    auto root = [](double b) { return std::sqrt(std::max(b, 0.0)); };
    const double k = a * root(brackets[0]) * root(brackets[1]) + (1 - a) * root(brackets[2]) * root(brackets[3]);
    return {k, k * k, 1.0 - rho * rho / (8.0 * f * (1.0 - f))};
}

double strong_control_rho(double alpha, double f, ControlBranch branch)
{
    if (!(alpha > 0.0 && alpha < 1.0) || !(f > 0.0 && f < 1.0)) {
        throw std::invalid_argument("strong_control_rho: alpha and F must lie in (0, 1)");
    }
    const double r = alpha * (1.0 - f) / ((1.0 - alpha) * f);
    return std::sqrt(branch == ControlBranch::z_below ? r : 1.0 / r);
}

}  // namespace qvr
