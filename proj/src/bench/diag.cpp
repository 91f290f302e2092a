#include "qvr/bench/diag.hpp"

#include "qvr/bench/schema.hpp"
#include "qvr/bench/schemas.hpp"
#include "qvr/error.hpp"
#include "qvr/sampling.hpp"
#include "qvr/strata.hpp"

#include <vector>

namespace qvr::bench {

using nlohmann::json;

DiagKind parse_diag_kind(std::string_view name)
{
    if (name == "variance") return DiagKind::variance;
    if (name == "allocation") return DiagKind::allocation;
    if (name == "cost") return DiagKind::cost;
    throw ConfigError("unknown diagnostic '" + std::string(name) + "'");
}

namespace {

const SchemaValidator& diag_validator()
{
    static const SchemaValidator v(json::parse(schemas::diag));
    return v;
}

// Only the stratum widths matter here, so the metamodel levels are placeholders.
StrataSpec widths_only(const std::vector<double>& cutpoints)
{
    std::vector<double> z(cutpoints.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<double>(i);
    for (std::size_t i = 1; i < cutpoints.size(); ++i) {
        if (!(cutpoints[i] > cutpoints[i - 1])) throw ConfigError("cutpoints must be strictly increasing");
    }
    return StrataSpec::from_inner(cutpoints, z);
}

std::vector<double> probabilities(const json& doc, const StrataSpec& spec)
{
    if (!doc.contains("probabilities")) throw ConfigError("this diagnostic needs 'probabilities'");
    auto p = doc["probabilities"].get<std::vector<double>>();
    if (p.size() != spec.strata()) throw ConfigError("'probabilities' needs one value per stratum");
    return p;
}

std::size_t budget(const json& doc)
{
    if (doc.contains("n")) return doc["n"].get<std::size_t>();
    if (doc.contains("allocation")) {
        std::size_t total = 0;
        for (const auto& c : doc["allocation"]) total += c.get<std::size_t>();
        return total;
    }
    throw ConfigError("this diagnostic needs 'n' or 'allocation'");
}

AllocationPlan plan_for(const json& doc, const StrataSpec& spec)
{
    AllocationPlan plan;
    if (doc.contains("allocation")) {
        plan.counts = doc["allocation"].get<std::vector<std::size_t>>();
        if (plan.counts.size() != spec.strata()) throw ConfigError("'allocation' needs one count per stratum");
        if (doc.contains("n") && plan.total() != budget(doc)) throw ConfigError("'allocation' must sum to n");
    } else {
        plan.counts = largest_remainder(spec.widths(), budget(doc));
    }
    for (auto c : plan.counts) {
        if (c == 0) throw ConfigError("every stratum needs at least one point");
    }
    return plan;
}

json two_strata(const json& t)
{
    const double alpha = t["alpha"].get<double>();
    const double f = t["f"].get<double>();
    const double rho = t["rho_indicator"].get<double>();
    json out = {{"alpha", alpha}, {"f", f}, {"rho_indicator", rho}};
    try {
        const auto k = two_strata_acs_factor(alpha, f, rho);
        out["k"] = k.k;
        out["k_squared"] = k.ratio;
        out["k_expansion"] = k.k_expansion;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("two_strata: ") + e.what());
    }
    out["strong_control_rho"] = {
        {"z_below", strong_control_rho(alpha, f, ControlBranch::z_below)},
        {"z_at_or_above", strong_control_rho(alpha, f, ControlBranch::z_at_or_above)},
    };
    return out;
}

json variance(const json& doc, const StrataSpec& spec)
{
    const auto p = probabilities(doc, spec);
    const std::size_t n = budget(doc);
    const auto plan = plan_for(doc, spec);
    const auto w = spec.widths();
    double f = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) f += w[j] * p[j];
    const double nn = static_cast<double>(n);
    json out = {
        {"f", f},
        {"n", n},
        {"allocation", plan.counts},
        {"ee", f * (1.0 - f) / nn},
        {"ps", proportional_variance(p, spec) / nn},
        {"cs", cs_variance(p, spec, plan)},
        {"ocs", ocs_variance(p, spec) / nn},
    };
    if (doc.contains("two_strata")) out["two_strata"] = two_strata(doc["two_strata"]);
    return out;
}

json allocation(const json& doc, const StrataSpec& spec)
{
    const auto p = probabilities(doc, spec);
    json out = {{"scores", allocation_scores(p, spec)}};
    try {
        const auto beta = optimal_allocation(p, spec);
        out["beta"] = beta;
        if (doc.contains("n")) out["counts"] = largest_remainder(beta, budget(doc));
    } catch (const DegenerateSample&) {
        out["beta"] = nullptr;
    }
    return out;
}

json cost(const json& doc, const StrataSpec& spec)
{
    const auto plan = plan_for(doc, spec);
    const auto c = expected_rejection_cost(spec, plan);
    return {{"allocation", plan.counts}, {"expected_draws", c.expected}, {"bound", c.bound}};
}

}  // namespace

json run_diag(DiagKind kind, const json& document)
{
    diag_validator().validate(document);
    const auto spec = widths_only(document["cutpoints"].get<std::vector<double>>());
    json out;
    switch (kind) {
    case DiagKind::variance: out = variance(document, spec); break;
    case DiagKind::allocation: out = allocation(document, spec); break;
    case DiagKind::cost: out = cost(document, spec); break;
    }
    out["widths"] = spec.widths();
    return out;
}

}  // namespace qvr::bench
