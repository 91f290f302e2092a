#pragma once

#include <json.hpp>

#include <string>
#include <string_view>

namespace qvr::bench {

enum class DiagKind { variance, allocation, cost };

/// Throws ConfigError for an unknown name.
DiagKind parse_diag_kind(std::string_view name);

/*!
 * Closed-form diagnostics for a stratification given as a JSON document
 * (docs/diag.schema.json):
 *   variance    EE, PS, CS (given or proportional allocation) and OCS variances
 *               of the cdf estimate, plus the two-strata ACS factor when asked
 *   allocation  scores q_j, optimal shares beta*_j and, with n, integer counts
 *   cost        expected metamodel draws of per-stratum rejection and its bound
 * Throws ConfigError when the document lacks what the diagnostic needs.
 */
nlohmann::json run_diag(DiagKind kind, const nlohmann::json& document);

}  // namespace qvr::bench
