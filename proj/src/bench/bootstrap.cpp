#include "qvr/bench/bootstrap.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace qvr::bench {

std::string_view scheme_name(BootstrapScheme scheme)
{
    switch (scheme) {
    case BootstrapScheme::iid: return "iid";
    case BootstrapScheme::within_strata: return "within_strata";
    case BootstrapScheme::weighted: return "weighted";
    }
    return "unknown";
}

namespace {

void check_resamples(std::size_t resamples)
{
    if (resamples < kMinResamples) {
        throw std::invalid_argument("bootstrap: needs at least " + std::to_string(kMinResamples) + " resamples");
    }
}

double sample_std(const std::vector<double>& values) { return summarize(values).std; }

}  // namespace

BootstrapReport bootstrap_iid(const PairedSample& sample, const std::function<double(const PairedSample&)>& estimator,
                              std::size_t resamples, RngStream& stream)
{
    check_resamples(resamples);
    sample.check();
    const std::size_t n = sample.size();
    BootstrapReport report{estimator(sample), 0.0, resamples, BootstrapScheme::iid};
    std::vector<double> values(resamples);
    PairedSample r{PointSet(sample.x.dim()), std::vector<double>(n), std::vector<double>(n)};
    for (auto& v : values) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = stream.below(n);
            r.y[i] = sample.y[k];
            r.z[i] = sample.z[k];
        }
        v = estimator(r);
    }
    report.std = sample_std(values);
    return report;
}

BootstrapReport bootstrap_within_strata(const StratifiedSample& sample,
                                        const std::function<double(const StratifiedSample&)>& estimator,
                                        std::size_t resamples, RngStream& stream)
{
    check_resamples(resamples);
    if (!sample.evaluated()) throw std::invalid_argument("bootstrap: every stratum must be evaluated");
    BootstrapReport report{estimator(sample), 0.0, resamples, BootstrapScheme::within_strata};
    std::vector<double> values(resamples);
    StratifiedSample r = sample;
    for (auto& s : r.strata) s.x.clear();
    for (auto& v : values) {
        for (std::size_t j = 0; j < sample.strata.size(); ++j) {
            const auto& src = sample.strata[j];
            auto& dst = r.strata[j];
            for (std::size_t i = 0; i < src.size(); ++i) {
                const auto k = stream.below(src.size());
                dst.z[i] = src.z[k];
                dst.y[i] = src.y[k];
            }
        }
        v = estimator(r);
    }
    report.std = sample_std(values);
    return report;
}

BootstrapReport bootstrap_weighted(const WeightedSample& sample,
                                   const std::function<double(const WeightedSample&)>& estimator,
                                   std::size_t resamples, RngStream& stream)
{
    check_resamples(resamples);
    const std::size_t n = sample.size();
    if (n == 0 || sample.w.size() != n) throw std::invalid_argument("bootstrap: malformed weighted sample");
    BootstrapReport report{estimator(sample), 0.0, resamples, BootstrapScheme::weighted};
    std::vector<double> values(resamples);
    WeightedSample r{PointSet(sample.x.dim()), std::vector<double>(n), std::vector<double>(n)};
    for (auto& v : values) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = stream.below(n);
            r.y[i] = sample.y[k];
            r.w[i] = sample.w[k];
        }
        v = estimator(r);
    }
    report.std = sample_std(values);
    return report;
}

BootstrapScheme scheme_for(Method method)
{
    switch (method) {
    case Method::cs:
    case Method::acs: return BootstrapScheme::within_strata;
    case Method::cis: return BootstrapScheme::weighted;
    default: return BootstrapScheme::iid;
    }
}

BootstrapReport bootstrap_std(const Prepared& prepared, const RunResult& run, std::size_t resamples,
                              RngStream& stream)
{
    const Method method = prepared.experiment->estimator.method;
    switch (scheme_for(method)) {
    case BootstrapScheme::iid:
        return bootstrap_iid(run.paired, [&](const PairedSample& s) { return estimate_paired(prepared, s); },
                             resamples, stream);
    case BootstrapScheme::within_strata: {
        if (!run.stratified) throw std::invalid_argument("bootstrap: run carries no stratified sample");
        // ACS resamples hold the final allocation fixed.
        return bootstrap_within_strata(
            *run.stratified, [&](const StratifiedSample& s) { return estimate_stratified(prepared, s); }, resamples,
            stream);
    }
    case BootstrapScheme::weighted:
        if (!run.weighted) throw std::invalid_argument("bootstrap: run carries no weighted sample");
        return bootstrap_weighted(*run.weighted, [&](const WeightedSample& s) { return estimate_weighted(prepared, s); },
                                  resamples, stream);
    }
    throw std::logic_error("bootstrap: unknown scheme");
}

}  // namespace qvr::bench
