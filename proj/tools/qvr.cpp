#include "qvr/bench/bootstrap.hpp"
#include "qvr/bench/config.hpp"
#include "qvr/bench/diag.hpp"
#include "qvr/bench/presets.hpp"
#include "qvr/bench/replication.hpp"
#include "qvr/bench/report.hpp"
#include "qvr/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace qvr;
using namespace qvr::bench;
using nlohmann::json;

namespace {

enum Exit { ok = 0, failure = 1, config = 2, estimator = 3, model = 4 };

int run_truth(const std::string& model_name, double alpha, std::size_t samples, std::uint64_t seed, bool correlation)
{
    const auto model = parse_builtin(model_name);
    if (!model) throw ConfigError("unknown model '" + model_name + "' (toy1d, toy2d, identity1d)");
    const ModelPair pair = make_builtin(*model);
    RngStream stream(seed);
    json out = {{"model", model_name}, {"alpha", alpha}, {"samples", samples}, {"seed", seed}};
    if (correlation) {
        const auto c = correlation_report(pair, alpha, samples, stream);
        out["quantile"] = c.y_alpha;
        out["metamodel_quantile"] = c.z_alpha;
        out["rho"] = c.rho;
        out["rho_indicator"] = c.rho_indicator;
    } else {
        out["quantile"] = ground_truth_quantile(pair, alpha, samples, stream);
    }
    std::cout << out.dump(2) << '\n';
    return ok;
}

void emit(const ReportSet& set, ReportFormat format, const std::optional<std::string>& path)
{
    if (path) {
        emit_report(set, format, *path);
    } else if (format == ReportFormat::json) {
        write_json(set, std::cout);
    } else {
        write_csv(set, std::cout);
    }
}

int run_estimate(const std::string& path, std::size_t resamples)
{
    const Experiment x = load_experiment(path);
    if (x.replications > 1) {
        ReportSet set{x.label(), {run_replications(x, x.workers)}};
        emit(set, x.format, x.output_path);
        return ok;
    }
    const Prepared prepared = prepare(x);
    const RunResult run = run_single(prepared, RngStream(x.seed).child(0));
    const std::size_t b = x.bootstrap_resamples > 0 ? x.bootstrap_resamples : resamples;
    RngStream stream(x.seed, {kBootstrapStreamId});
    const auto boot = bootstrap_std(prepared, run, b, stream);
    json out = {
        {"label", x.label()},
        {"model", x.pair->name()},
        {"alpha", x.alpha},
        {"n", x.n},
        {"seed", x.seed},
        {"estimate", run.estimate},
        {"bootstrap", {{"std", boot.std}, {"resamples", boot.resamples}, {"scheme", scheme_name(boot.scheme)}}},
    };
    if (!run.beta.empty()) out["beta"] = run.beta;
    if (!run.beta_estimate.empty()) out["beta_estimate"] = run.beta_estimate;
    if (run.draws > 0) out["draws"] = run.draws;
    if (run.fallback) out["fallback"] = true;
    const auto text = out.dump(2) + "\n";
    if (x.output_path) {
        std::ofstream file(*x.output_path, std::ios::binary);
        if (!(file << text)) throw std::runtime_error("cannot write " + *x.output_path);
    } else {
        std::cout << text;
    }
    return ok;
}

int run_bench(const std::string& preset, const PresetOptions& options, const std::optional<std::string>& out,
          const std::string& format, const std::optional<std::string>& hist)
{
    const ReportSet set = run_preset(preset, options);
    emit(set, format == "json" ? ReportFormat::json : ReportFormat::csv, out);
    if (hist) emit_histograms(set, *hist);
    return ok;
}

int run_diag_cmd(const std::string& kind, const std::string& path)
{
    std::cout << run_diag(parse_diag_kind(kind), read_json_file(path)).dump(2) << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quantile estimation with metamodel-based variance reduction"};
    app.require_subcommand(1);

    auto* truth_cmd = app.add_subcommand("truth", "Reference quantile of a builtin model by plain Monte Carlo");
    std::string model_name;
    double alpha = 0.95;
    std::size_t samples = 10'000'000;
    std::uint64_t seed = 1;
    bool correlation = false;
    truth_cmd->add_option("--model", model_name, "toy1d, toy2d or identity1d")->required();
    truth_cmd->add_option("--alpha", alpha, "Quantile level")->check(CLI::Range(0.0, 1.0));
    truth_cmd->add_option("--samples", samples, "Monte Carlo sample size (>= 1e6)");
    truth_cmd->add_option("--seed", seed, "Master seed");
    truth_cmd->add_flag("--correlation", correlation, "Also report rho and the indicator correlation");

    auto* estimate_cmd = app.add_subcommand("estimate", "Run an experiment file");
    std::string config_path;
    std::size_t resamples = 500;
    estimate_cmd->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    estimate_cmd->add_option("--resamples", resamples, "Bootstrap resamples when the file sets none");

    auto* bench_cmd = app.add_subcommand("bench", "Reproduce a builtin experiment set");
    std::string preset;
    PresetOptions options;
    std::optional<std::size_t> reps;
    std::optional<std::string> out;
    std::optional<std::string> hist;
    std::string format = "csv";
    bench_cmd->add_option("--preset", preset, "fig1, fig2, table1 or table2")
        ->required()
        ->check(CLI::IsMember(preset_names()));
    bench_cmd->add_option("--reps", reps, "Replications per estimator");
    bench_cmd->add_option("--seed", options.seed, "Master seed");
    bench_cmd->add_option("--workers", options.workers, "Worker threads (0 = all cores)");
    bench_cmd->add_option("--out", out, "Report path (default stdout)");
    bench_cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    bench_cmd->add_option("--hist", hist, "Histogram CSV path");

    auto* diag_cmd = app.add_subcommand("diag", "Closed-form stratification diagnostics");
    std::string kind;
    std::string diag_path;
    diag_cmd->add_option("kind", kind, "variance, allocation or cost")
        ->required()
        ->check(CLI::IsMember({"variance", "allocation", "cost"}));
    diag_cmd->add_option("--config", diag_path, "Diagnostics JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config;
    }

    try {
        if (*truth_cmd) return run_truth(model_name, alpha, samples, seed, correlation);
        if (*estimate_cmd) return run_estimate(config_path, resamples);
        if (*bench_cmd) {
            options.replications = reps;
            return run_bench(preset, options, out, format, hist);
        }
        if (*diag_cmd) return run_diag_cmd(kind, diag_path);
    } catch (const ConfigError& e) {
        std::cerr << "qvr: config error: " << e.what() << '\n';
        return config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "qvr: invalid argument: " << e.what() << '\n';
        return config;
    } catch (const NonConvergence& e) {
        std::cerr << "qvr: estimator did not converge: " << e.what() << '\n';
        return estimator;
    } catch (const DegenerateSample& e) {
        std::cerr << "qvr: degenerate sample: " << e.what() << '\n';
        return estimator;
    } catch (const QuotaError& e) {
        std::cerr << "qvr: stratum quota not met: " << e.what() << '\n';
        return estimator;
    } catch (const ModelError& e) {
        std::cerr << "qvr: model failure: " << e.what() << '\n';
        return model;
    } catch (const std::exception& e) {
        std::cerr << "qvr: " << e.what() << '\n';
        return failure;
    }
    return failure;
}
