#include "qvr/bench/replication.hpp"

#include "qvr/error.hpp"
#include "qvr/strata.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace qvr::bench {

std::size_t resolve_workers(std::size_t requested)
{
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

Prepared prepare(const Experiment& x)
{
    if (!x.pair) throw std::invalid_argument("prepare: experiment has no model");
    if (!(x.alpha > 0.0 && x.alpha < 1.0)) throw std::invalid_argument("prepare: alpha must lie in (0, 1)");
    if (x.n == 0) throw std::invalid_argument("prepare: n must be positive");
    Prepared p;
    p.experiment = &x;
    const auto& e = x.estimator;
    const QuantilePrecision precision =
        x.metamodel_precision ? *x.metamodel_precision
                              : (x.pair->has_closed_form_quantile() ? QuantilePrecision::closed_form()
                                                                    : QuantilePrecision::monte_carlo(kDefaultQuantileSamples));

    // All levels are read off one metamodel sample so they are mutually consistent.
    std::vector<double> levels{x.alpha};
    if (e.method == Method::cis) levels.push_back(e.level.value_or(x.alpha));
    levels.insert(levels.end(), e.cutpoints.begin(), e.cutpoints.end());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    RngStream stream(x.seed, {kQuantileStreamId});
    const auto z = metamodel_quantiles(*x.pair, levels, precision, stream);
    auto z_at = [&](double a) {
        return z[static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), a) - levels.begin())];
    };
    p.z_alpha = z_at(x.alpha);
    p.threshold = z_at(e.level.value_or(x.alpha));

    if (e.method == Method::ps || e.method == Method::cs || e.method == Method::acs) {
        if (e.cutpoints.empty()) throw ConfigError("estimator needs at least one cutpoint");
        std::vector<double> inner_z;
        for (double c : e.cutpoints) inner_z.push_back(z_at(c));
        p.strata = StrataSpec::from_inner(e.cutpoints, inner_z);
    }
    if (e.method == Method::cs) {
        AllocationPlan plan;
        plan.counts = e.allocation.empty() ? largest_remainder(p.strata->widths(), x.n) : e.allocation;
        plan.check(*p.strata);
        if (plan.total() != x.n) throw ConfigError("cs allocation must sum to n");
        for (auto c : plan.counts) {
            if (c == 0) throw ConfigError("cs allocation leaves a stratum empty; increase n or set the allocation");
        }
        p.plan = std::move(plan);
    }
    return p;
}

double estimate_paired(const Prepared& p, const PairedSample& sample)
{
    const auto& x = *p.experiment;
    switch (x.estimator.method) {
    case Method::ee: return empirical_cdf(sample.y).quantile(x.alpha, x.rule);
    case Method::cv: return cv_cdf(sample, p.z_alpha, x.alpha).cdf.quantile(x.alpha, x.rule);
    case Method::ps: return ps_weighted_cdf(sample, *p.strata).quantile(x.alpha, x.rule);
    default: throw std::invalid_argument("estimate_paired: not an i.i.d. estimator");
    }
}

double estimate_stratified(const Prepared& p, const StratifiedSample& sample)
{
    return cs_quantile(sample, *p.strata, p.experiment->alpha, p.experiment->rule);
}

double estimate_weighted(const Prepared& p, const WeightedSample& sample)
{
    const auto& x = *p.experiment;
    return is_quantile(sample, x.alpha, x.estimator.mode, x.rule);
}

RunResult run_single(const Prepared& p, RngStream stream)
{
    const auto& x = *p.experiment;
    const auto& e = x.estimator;
    const auto& pair = *x.pair;
    RunResult r;
    switch (e.method) {
    case Method::ee:
    case Method::ps:
        r.paired = draw_paired(pair, stream, x.n);
        r.estimate = estimate_paired(p, r.paired);
        break;
    case Method::cv: {
        r.paired = draw_paired(pair, stream, x.n);
        const auto cv = cv_cdf(r.paired, p.z_alpha, x.alpha);
        r.fallback = cv.fallback;
        r.estimate = cv.cdf.quantile(x.alpha, x.rule);
        break;
    }
    case Method::cs: {
        auto s = sample_strata(pair, *p.strata, *p.plan, stream, e.max_draws);
        evaluate_full(pair, s.sample);
        r.draws = s.draws;
        r.estimate = estimate_stratified(p, s.sample);
        r.stratified = std::move(s.sample);
        break;
    }
    case Method::acs: {
        AcsConfig config(*p.strata, x.n);
        config.pilot_per_stratum = e.pilot_per_stratum;
        config.pilot_exponent = e.pilot_exponent;
        config.pilot_shares = e.pilot_shares;
        config.min_per_stratum = e.min_per_stratum;
        config.rule = x.rule;
        config.max_draws = e.max_draws;
        auto a = acs_quantile(pair, config, x.alpha, stream);
        r.estimate = a.estimate;
        r.beta = a.beta_effective;
        r.beta_estimate = a.beta_estimate;
        r.draws = a.draws;
        r.fallback = a.floor_applied || a.proportional_fallback;
        r.stratified = std::move(a.sample);
        break;
    }
    case Method::cis: {
        CisConfig config;
        config.family = e.family;
        config.alpha = x.alpha;
        config.n = x.n;
        config.pilot = e.pilot;
        config.tail = e.tail;
        config.mode = e.mode;
        config.rule = x.rule;
        config.threshold = p.threshold;
        config.min_event_mass = e.min_event_mass;
        auto c = cis_quantile(pair, config, stream);
        r.estimate = c.estimate;
        r.weighted = std::move(c.sample);
        break;
    }
    }
    return r;
}

Summary summarize(std::span<const double> values)
{
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = compensated_sum(values) / n;
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - s.mean) * (values[i] - s.mean);
        s.std = std::sqrt(compensated_sum(sq) / (n - 1.0));
        s.sem = s.std / std::sqrt(n);
    }
    return s;
}

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double p)
{
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Histogram freedman_diaconis(std::span<const double> values)
{
    Histogram h;
    if (values.empty()) return h;
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double lo = v.front();
    const double hi = v.back();
    const double iqr = interpolated_quantile(v, 0.75) - interpolated_quantile(v, 0.25);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
    std::size_t bins = 1;
    if (width > 0.0 && hi > lo) bins = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil((hi - lo) / width)), 1, 1000);
    const double step = bins > 1 ? (hi - lo) / static_cast<double>(bins) : 0.0;
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lo + step * static_cast<double>(k);
    h.edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double x : v) {
        std::size_t k = step > 0.0 ? static_cast<std::size_t>((x - lo) / step) : 0;
        ++h.counts[std::min(k, bins - 1)];
    }
    return h;
}

void summarize_runs(ReplicationReport& report)
{
    std::vector<double> est;
    std::vector<double> draws;
    std::vector<std::vector<double>> beta;
    std::vector<std::vector<double>> beta_est;
    report.failures = 0;
    report.fallbacks = 0;
    for (const auto& run : report.runs) {
        if (run.failed) {
            ++report.failures;
            continue;
        }
        report.fallbacks += run.fallback;
        est.push_back(run.estimate);
        if (run.draws > 0) draws.push_back(static_cast<double>(run.draws));
        if (beta.size() < run.beta.size()) beta.resize(run.beta.size());
        for (std::size_t j = 0; j < run.beta.size(); ++j) beta[j].push_back(run.beta[j]);
        if (beta_est.size() < run.beta_estimate.size()) beta_est.resize(run.beta_estimate.size());
        for (std::size_t j = 0; j < run.beta_estimate.size(); ++j) beta_est[j].push_back(run.beta_estimate[j]);
    }
    report.estimate = summarize(est);
    report.beta.clear();
    for (const auto& b : beta) report.beta.push_back(summarize(b));
    report.beta_estimate.clear();
    for (const auto& b : beta_est) report.beta_estimate.push_back(summarize(b));
    report.draws = draws.empty() ? std::nullopt : std::optional<Summary>(summarize(draws));
    report.histogram = freedman_diaconis(est);
}

ReplicationReport run_replications(const Experiment& x, std::size_t workers)
{
    const Prepared prepared = prepare(x);
    ReplicationReport report;
    report.label = x.label();
    report.method = std::string(method_name(x.estimator.method));
    report.model = x.pair->name();
    report.alpha = x.alpha;
    report.n = x.n;
    report.seed = x.seed;
    report.runs.resize(x.replications);

    std::vector<std::exception_ptr> errors(x.replications);
    std::vector<char> fatal(x.replications, 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    const RngStream root(x.seed);

    auto work = [&] {
        for (std::size_t i = next++; i < x.replications && !abort; i = next++) {
            auto& run = report.runs[i];
            try {
                auto r = run_single(prepared, root.child(i));
                run.estimate = r.estimate;
                run.beta = std::move(r.beta);
                run.beta_estimate = std::move(r.beta_estimate);
                run.draws = r.draws;
                run.fallback = r.fallback;
            } catch (const DegenerateSample& e) {
                run.failed = true;
                run.error = e.what();
                errors[i] = std::current_exception();
            } catch (const QuotaError& e) {
                run.failed = true;
                run.error = e.what();
                errors[i] = std::current_exception();
            } catch (const NonConvergence& e) {
                run.failed = true;
                run.error = e.what();
                errors[i] = std::current_exception();
            } catch (...) {
                errors[i] = std::current_exception();
                fatal[i] = 1;
                abort = true;
            }
        }
    };

    const std::size_t threads = std::min(resolve_workers(workers), std::max<std::size_t>(x.replications, 1));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < x.replications; ++i) {
        if (fatal[i]) std::rethrow_exception(errors[i]);
    }
    summarize_runs(report);
    if (x.replications > 0 && report.failures == x.replications) std::rethrow_exception(errors.front());
    return report;
}

double ground_truth_quantile(const ModelPair& pair, double alpha, std::size_t sample_count, RngStream& stream)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ground_truth_quantile: alpha must lie in (0, 1)");
    if (sample_count < 1000000) throw std::invalid_argument("ground_truth_quantile: needs at least 1e6 samples");
    std::vector<double> y(sample_count);
    std::vector<double> x(pair.dimension());
    for (auto& v : y) {
        pair.input().draw(stream, x);
        v = pair.full().evaluate(x);
    }
    const auto rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(sample_count)));
    return order_statistic(std::move(y), rank);
}

}  // namespace qvr::bench
