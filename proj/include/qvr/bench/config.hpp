#pragma once

#include "qvr/importance.hpp"
#include "qvr/model.hpp"
#include "qvr/sampling.hpp"
#include "qvr/weighted_cdf.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qvr::bench {

enum class Method { ee, cv, ps, cs, acs, cis };

std::optional<Method> parse_method(std::string_view name);
std::string_view method_name(Method method);

enum class ReportFormat { csv, json };

struct EstimatorSpec {
    Method method = Method::ee;
    std::string label;              // display name in reports; defaults to the method
    std::vector<double> cutpoints;  // inner cutpoints (ps, cs, acs)

    // cs
    std::vector<std::size_t> allocation;  // empty = proportional
    // acs
    std::size_t pilot_per_stratum = 0;
    std::optional<double> pilot_exponent;
    std::vector<double> pilot_shares;
    std::size_t min_per_stratum = 1;
    // cs, acs
    std::uint64_t max_draws = 0;
    // cis
    BiasedFamily family = BiasedFamily::joint_gaussian;
    std::size_t pilot = 10000;
    TailEvent tail = TailEvent::upper;
    std::optional<double> level;  // alpha' of the conditioning event; defaults to alpha
    IsMode mode = IsMode::complement;
    double min_event_mass = 0.1;
};

struct Experiment {
    std::shared_ptr<const ModelPair> pair;
    EstimatorSpec estimator;
    double alpha = 0.95;
    std::size_t n = 200;
    std::size_t replications = 1;
    std::uint64_t seed = 1;
    std::size_t workers = 0;  // 0 = hardware concurrency
    QuantileRule rule = QuantileRule::at_least;
    /// Unset = closed form when the model has one, else Monte Carlo with
    /// kDefaultQuantileSamples draws.
    std::optional<QuantilePrecision> metamodel_precision;
    std::size_t bootstrap_resamples = 0;
    std::optional<std::string> output_path;
    ReportFormat format = ReportFormat::csv;

    std::string label() const;
};

inline constexpr std::size_t kDefaultQuantileSamples = 10'000'000;

/// Validates against the shipped schema, then builds the experiment.
/// Throws ConfigError for anything the schema or the cross-field checks reject.
Experiment parse_experiment(const nlohmann::json& document);
Experiment load_experiment(const std::string& path);

/// Reads and parses a JSON file; ConfigError on I/O or syntax errors.
nlohmann::json read_json_file(const std::string& path);

}  // namespace qvr::bench
