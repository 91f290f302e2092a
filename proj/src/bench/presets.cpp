#include "qvr/bench/presets.hpp"

#include "qvr/error.hpp"

#include <memory>

namespace qvr::bench {

namespace {

const std::vector<double> kFourStrata = {0.5, 0.9, 0.95};

EstimatorSpec plain(Method method)
{
    EstimatorSpec e;
    e.method = method;
    return e;
}

EstimatorSpec cs(std::size_t n)
{
    EstimatorSpec e = plain(Method::cs);
    e.cutpoints = kFourStrata;
    e.allocation.assign(kFourStrata.size() + 1, n / (kFourStrata.size() + 1));
    return e;
}

EstimatorSpec acs(std::vector<double> cutpoints)
{
    EstimatorSpec e = plain(Method::acs);
    e.label = "acs-" + std::to_string(cutpoints.size() + 1);
    e.cutpoints = std::move(cutpoints);
    return e;
}

EstimatorSpec cis()
{
    EstimatorSpec e = plain(Method::cis);
    e.family = BiasedFamily::componentwise_matched;
    return e;
}

}  // namespace

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names = {"fig1", "fig2", "table1", "table2"};
    return names;
}

std::vector<Experiment> preset_experiments(std::string_view name, const PresetOptions& options)
{
    BuiltinModel model = BuiltinModel::toy1d;
    std::size_t n = 200;
    std::size_t reps = 10000;
    std::vector<EstimatorSpec> estimators;
    if (name == "fig1") {
        estimators = {plain(Method::ee), plain(Method::cv), cs(n)};
    } else if (name == "table1") {
        n = 2000;
        estimators = {plain(Method::ee), plain(Method::cv), acs({0.95}), acs({0.85, 0.95})};
    } else if (name == "table2") {
        estimators = {plain(Method::ee), plain(Method::cv), acs({0.85, 0.95})};
    } else if (name == "fig2") {
        model = BuiltinModel::toy2d;
        reps = 5000;
        estimators = {plain(Method::ee), plain(Method::cv), cs(n), cis()};
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }

    const auto pair = std::make_shared<const ModelPair>(make_builtin(model));
    std::vector<Experiment> out;
    for (auto& e : estimators) {
        Experiment x;
        x.pair = pair;
        x.estimator = std::move(e);
        x.alpha = 0.95;
        x.n = n;
        x.replications = options.replications.value_or(reps);
        x.seed = options.seed;
        x.workers = options.workers;
        out.push_back(std::move(x));
    }
    return out;
}

ReportSet run_preset(std::string_view name, const PresetOptions& options)
{
    ReportSet set;
    set.title = std::string(name);
    for (const auto& x : preset_experiments(name, options)) set.reports.push_back(run_replications(x, x.workers));
    return set;
}

}  // namespace qvr::bench
