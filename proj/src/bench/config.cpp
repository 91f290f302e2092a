#include "qvr/bench/config.hpp"

#include "qvr/bench/schema.hpp"
#include "qvr/bench/schemas.hpp"
#include "qvr/error.hpp"
#include "qvr/subprocess_model.hpp"

#include <fstream>
#include <sstream>

namespace qvr::bench {

using nlohmann::json;

std::optional<Method> parse_method(std::string_view name)
{
    if (name == "ee") return Method::ee;
    if (name == "cv") return Method::cv;
    if (name == "ps") return Method::ps;
    if (name == "cs") return Method::cs;
    if (name == "acs") return Method::acs;
    if (name == "cis") return Method::cis;
    return std::nullopt;
}

std::string_view method_name(Method method)
{
    switch (method) {
    case Method::ee: return "ee";
    case Method::cv: return "cv";
    case Method::ps: return "ps";
    case Method::cs: return "cs";
    case Method::acs: return "acs";
    case Method::cis: return "cis";
    }
    return "unknown";
}

std::string Experiment::label() const
{
    return estimator.label.empty() ? std::string(method_name(estimator.method)) : estimator.label;
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

namespace {

const SchemaValidator& experiment_validator()
{
    static const SchemaValidator v(json::parse(schemas::experiment));
    return v;
}

std::shared_ptr<const Evaluator> builtin_meta(const std::string& name)
{
    const auto model = parse_builtin(name);
    return make_builtin(*model).meta_shared();
}

std::shared_ptr<const ModelPair> build_model(const json& m)
{
    if (m.contains("builtin")) {
        return std::make_shared<const ModelPair>(make_builtin(*parse_builtin(m["builtin"].get<std::string>())));
    }
    std::vector<Marginal> marginals;
    for (const auto& c : m["input"]) {
        const double loc = c["location"].get<double>();
        const double scale = c["scale"].get<double>();
        marginals.push_back(c["family"] == "normal" ? Marginal::normal(loc, scale) : Marginal::lognormal(loc, scale));
    }
    InputDistribution input = [&] {
        try {
            return InputDistribution(std::move(marginals));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("model.input: ") + e.what());
        }
    }();
    const std::size_t d = input.dimension();

    std::shared_ptr<const Evaluator> meta;
    const auto& mm = m["metamodel"];
    if (mm.contains("builtin")) {
        meta = builtin_meta(mm["builtin"].get<std::string>());
    } else {
        const auto& lin = mm["linear"];
        meta = std::make_shared<LinearEvaluator>(lin.value("intercept", 0.0),
                                                 lin["coefficients"].get<std::vector<double>>());
    }
    if (meta->dimension() != d) {
        throw ConfigError("model: metamodel dimension " + std::to_string(meta->dimension()) +
                          " does not match the " + std::to_string(d) + " input components");
    }

    const auto& sp = m["subprocess"];
    SubprocessOptions opts;
    opts.command = sp["command"].get<std::string>();
    opts.dimension = d;
    opts.batch_size = sp.value("batch_size", opts.batch_size);
    opts.timeout_seconds = sp.value("timeout_seconds", opts.timeout_seconds);
    opts.workers = sp.value("workers", opts.workers);
    auto full = std::make_shared<SubprocessModel>(std::move(opts));
    return std::make_shared<const ModelPair>("subprocess", std::move(full), std::move(meta), std::move(input));
}

std::vector<double> inner_cutpoints(const json& e)
{
    auto cuts = e["cutpoints"].get<std::vector<double>>();
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (!(cuts[i] > cuts[i - 1])) throw ConfigError("estimator.cutpoints must be strictly increasing");
    }
    return cuts;
}

EstimatorSpec build_estimator(const json& e)
{
    EstimatorSpec s;
    s.method = *parse_method(e["method"].get<std::string>());
    if (e.contains("cutpoints")) s.cutpoints = inner_cutpoints(e);
    if (e.contains("allocation")) {
        s.allocation = e["allocation"].get<std::vector<std::size_t>>();
        if (s.allocation.size() != s.cutpoints.size() + 1) {
            throw ConfigError("estimator.allocation needs one count per stratum (" +
                              std::to_string(s.cutpoints.size() + 1) + ")");
        }
    }
    s.pilot_per_stratum = e.value("pilot_per_stratum", s.pilot_per_stratum);
    if (e.contains("pilot_exponent")) s.pilot_exponent = e["pilot_exponent"].get<double>();
    if (e.contains("pilot_shares")) {
        s.pilot_shares = e["pilot_shares"].get<std::vector<double>>();
        if (s.pilot_shares.size() != s.cutpoints.size() + 1) {
            throw ConfigError("estimator.pilot_shares needs one share per stratum");
        }
    }
    s.min_per_stratum = e.value("min_per_stratum", s.min_per_stratum);
    s.max_draws = e.value("max_draws", s.max_draws);
    if (e.contains("family")) s.family = *parse_biased_family(e["family"].get<std::string>());
    s.pilot = e.value("pilot", s.pilot);
    if (e.contains("tail")) s.tail = *parse_tail_event(e["tail"].get<std::string>());
    if (e.contains("level")) s.level = e["level"].get<double>();
    if (e.contains("mode")) s.mode = *parse_is_mode(e["mode"].get<std::string>());
    s.min_event_mass = e.value("min_event_mass", s.min_event_mass);
    return s;
}

}  // namespace

Experiment parse_experiment(const json& doc)
{
    experiment_validator().validate(doc);

    Experiment x;
    x.alpha = doc["alpha"].get<double>();
    x.n = doc["n"].get<std::size_t>();
    x.replications = doc.value("replications", x.replications);
    x.seed = doc.value("seed", x.seed);
    x.workers = doc.value("workers", x.workers);
    if (doc.contains("quantile_rule")) x.rule = *parse_quantile_rule(doc["quantile_rule"].get<std::string>());
    if (doc.contains("metamodel_quantiles")) {
        const auto& mq = doc["metamodel_quantiles"];
        const auto method = mq["method"].get<std::string>();
        if (method == "closed_form") {
            x.metamodel_precision = QuantilePrecision::closed_form();
        } else if (method == "monte_carlo") {
            x.metamodel_precision = QuantilePrecision::monte_carlo(mq.value("samples", kDefaultQuantileSamples));
        }
    }
    if (doc.contains("bootstrap")) x.bootstrap_resamples = doc["bootstrap"]["resamples"].get<std::size_t>();
    if (doc.contains("output")) {
        x.output_path = doc["output"]["path"].get<std::string>();
        x.format = doc["output"].value("format", "csv") == "json" ? ReportFormat::json : ReportFormat::csv;
    }
    x.estimator = build_estimator(doc["estimator"]);
    const auto& e = x.estimator;
    if (e.method == Method::cs && !e.allocation.empty()) {
        std::size_t total = 0;
        for (auto c : e.allocation) total += c;
        if (total != x.n) throw ConfigError("estimator.allocation must sum to n = " + std::to_string(x.n));
    }
    if (e.method == Method::acs) {
        const std::size_t m = e.cutpoints.size() + 1;
        if (e.min_per_stratum * m > x.n) throw ConfigError("estimator.min_per_stratum leaves no room within n");
    }
    if (x.metamodel_precision && x.metamodel_precision->kind == QuantilePrecision::Kind::closed_form &&
        doc["model"].contains("subprocess")) {
        throw ConfigError("metamodel_quantiles: closed_form is only available for builtin models");
    }
    x.pair = build_model(doc["model"]);
    if (x.metamodel_precision && x.metamodel_precision->kind == QuantilePrecision::Kind::closed_form &&
        !x.pair->has_closed_form_quantile()) {
        throw ConfigError("metamodel_quantiles: model '" + x.pair->name() + "' has no closed form");
    }
    return x;
}

Experiment load_experiment(const std::string& path)
{
    return parse_experiment(read_json_file(path));
}

}  // namespace qvr::bench
