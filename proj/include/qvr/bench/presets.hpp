#pragma once

#include "qvr/bench/config.hpp"
#include "qvr/bench/report.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qvr::bench {

/*!
 * Built-in experiment sets on the toy models:
 *   fig1    Toy1D, n=200:  ee, cv, cs on the 4-strata grid (0.5, 0.9, 0.95), n/4 per stratum
 *   table1  Toy1D, n=2000: ee, cv, acs-2 (0.95), acs-3 (0.85, 0.95)
 *   table2  Toy1D, n=200:  ee, cv, acs-3
 *   fig2    Toy2D, n=200:  ee, cv, cs on the fig1 grid, cis (componentwise family)
 * Every estimator of a preset shares the master seed, so replication r of ee
 * and cv sees the same draws.
 */
struct PresetOptions {
    std::optional<std::size_t> replications;  // default 10^4 (Toy1D) or 5000 (Toy2D)
    std::uint64_t seed = 1;
    std::size_t workers = 0;
};

const std::vector<std::string>& preset_names();

/// Throws ConfigError for an unknown name.
std::vector<Experiment> preset_experiments(std::string_view name, const PresetOptions& options = {});

ReportSet run_preset(std::string_view name, const PresetOptions& options = {});

}  // namespace qvr::bench
