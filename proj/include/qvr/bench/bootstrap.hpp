#pragma once

#include "qvr/bench/replication.hpp"
#include "qvr/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

namespace qvr::bench {

enum class BootstrapScheme { iid, within_strata, weighted };

std::string_view scheme_name(BootstrapScheme scheme);

struct BootstrapReport {
    double estimate = 0.0;  // estimator on the original sample
    double std = 0.0;       // sample std (n-1) of the resampled estimates
    std::size_t resamples = 0;
    BootstrapScheme scheme = BootstrapScheme::iid;
};

inline constexpr std::size_t kMinResamples = 100;

/// Stream path of the resampling draws in `qvr estimate`; disjoint from replication ids.
inline constexpr std::uint64_t kBootstrapStreamId = ~std::uint64_t{1};

/// Resamples (x, y, z) records with replacement; x is not carried into resamples.
BootstrapReport bootstrap_iid(const PairedSample& sample, const std::function<double(const PairedSample&)>& estimator,
                              std::size_t resamples, RngStream& stream);

/// Resamples inside every stratum, keeping each stratum's count.
BootstrapReport bootstrap_within_strata(const StratifiedSample& sample,
                                        const std::function<double(const StratifiedSample&)>& estimator,
                                        std::size_t resamples, RngStream& stream);

/// Resamples (y, w) pairs of an importance sample.
BootstrapReport bootstrap_weighted(const WeightedSample& sample,
                                   const std::function<double(const WeightedSample&)>& estimator,
                                   std::size_t resamples, RngStream& stream);

/// Scheme chosen by the estimator: iid for ee/cv/ps, within_strata for cs/acs, weighted for cis.
BootstrapScheme scheme_for(Method method);

BootstrapReport bootstrap_std(const Prepared& prepared, const RunResult& run, std::size_t resamples,
                              RngStream& stream);

}  // namespace qvr::bench
