#include "qvr/bench/bootstrap.hpp"
#include "qvr/bench/config.hpp"
#include "qvr/bench/diag.hpp"
#include "qvr/bench/presets.hpp"
#include "qvr/bench/replication.hpp"
#include "qvr/bench/report.hpp"
#include "qvr/bench/schema.hpp"
#include "qvr/error.hpp"
#include "qvr/normal.hpp"

#include "support.hpp"

#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qvr;
using namespace qvr::bench;
using nlohmann::json;

namespace {

json builtin_doc(const std::string& model, json estimator, std::size_t n = 200, std::size_t reps = 1)
{
    return {{"model", {{"builtin", model}}}, {"estimator", std::move(estimator)}, {"alpha", 0.95},
            {"n", n},
            {"replications", reps}};
}

const json kCs = {{"method", "cs"}, {"cutpoints", {0.5, 0.9, 0.95}}};

std::string csv(const ReportSet& set)
{
    std::ostringstream s;
    write_csv(set, s);
    return s.str();
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "qvr_test_bench";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("schema validator")
{
    const SchemaValidator v(json::parse(R"({
        "type": "object", "required": ["a"], "additionalProperties": false,
        "properties": {
            "a": {"type": "integer", "minimum": 1},
            "b": {"enum": ["x", "y"]},
            "c": {"type": "array", "items": {"type": "number", "exclusiveMaximum": 1}, "maxItems": 2},
            "d": {"oneOf": [{"type": "string"}, {"type": "number"}]}
        }})"));
    CHECK(v.errors(json{{"a", 3}}).empty());
    CHECK(v.errors(json{{"a", 3}, {"b", "x"}, {"c", {0.5}}, {"d", "s"}}).empty());
    CHECK(v.errors(json{{"a", 0}}).size() == 1);
    CHECK(v.errors(json{{"a", 1.5}}).size() == 1);
    CHECK(v.errors(json{{"b", "x"}}).size() == 1);
    CHECK(v.errors(json{{"a", 1}, {"zz", 1}}).size() == 1);
    CHECK(v.errors(json{{"a", 1}, {"b", "q"}}).size() == 1);
    CHECK(v.errors(json{{"a", 1}, {"c", {0.5, 1.0}}}).size() == 1);
    CHECK(v.errors(json{{"a", 1}, {"c", {0.1, 0.2, 0.3}}}).size() == 1);
    CHECK_FALSE(v.errors(json{{"a", 1}, {"d", true}}).empty());
    CHECK_THROWS_AS(v.validate(json{{"a", 1}, {"zz", 1}}), ConfigError);
    CHECK_THROWS_AS(SchemaValidator(json{{"pattern", "x"}}), std::invalid_argument);
}

TEST_CASE("experiment configs")
{
    SUBCASE("valid builtin")
    {
        const auto x = parse_experiment(builtin_doc("toy1d", kCs, 200, 7));
        CHECK(x.n == 200);
        CHECK(x.replications == 7);
        CHECK(x.estimator.method == Method::cs);
        CHECK(x.estimator.cutpoints == std::vector<double>{0.5, 0.9, 0.95});
        CHECK(x.seed == 1);
        CHECK(x.label() == "cs");
    }
    SUBCASE("unknown keys anywhere are rejected")
    {
        auto doc = builtin_doc("toy1d", {{"method", "ee"}});
        doc["colour"] = "red";
        CHECK_THROWS_AS(parse_experiment(doc), ConfigError);
        CHECK_THROWS_AS(parse_experiment(builtin_doc("toy1d", {{"method", "ee"}, {"cutpoints", {0.5}}})), ConfigError);
        auto model = builtin_doc("toy1d", {{"method", "ee"}});
        model["model"]["extra"] = 1;
        CHECK_THROWS_AS(parse_experiment(model), ConfigError);
    }
    SUBCASE("field and cross-field errors")
    {
        auto bad_alpha = builtin_doc("toy1d", {{"method", "ee"}});
        bad_alpha["alpha"] = 1.0;
        CHECK_THROWS_AS(parse_experiment(bad_alpha), ConfigError);
        CHECK_THROWS_AS(parse_experiment(builtin_doc("nope", {{"method", "ee"}})), ConfigError);
        CHECK_THROWS_AS(parse_experiment(builtin_doc("toy1d", {{"method", "cs"}, {"cutpoints", {0.9, 0.5}}})), ConfigError);
        CHECK_THROWS_AS(parse_experiment(builtin_doc("toy1d", {{"method", "cs"}, {"cutpoints", {0.5}}, {"allocation", {100, 50}}})),
                        ConfigError);
        CHECK_THROWS_AS(parse_experiment(builtin_doc("toy1d", {{"method", "cs"}, {"cutpoints", {0.5}}, {"allocation", {200}}})),
                        ConfigError);
        CHECK_THROWS_AS(parse_experiment(builtin_doc("toy1d", {{"method", "acs"}, {"cutpoints", {0.5}}, {"min_per_stratum", 150}})),
                        ConfigError);
        auto closed = builtin_doc("toy2d", {{"method", "cv"}});
        closed["metamodel_quantiles"] = {{"method", "closed_form"}};
        CHECK_THROWS_AS(parse_experiment(closed), ConfigError);
        CHECK_THROWS_AS(load_experiment("/nonexistent/config.json"), ConfigError);
    }
    SUBCASE("subprocess metamodel dimension must match the input")
    {
        json doc = builtin_doc("toy1d", {{"method", "ee"}});
        doc["model"] = {{"subprocess", {{"command", QVR_FAKE_SIMULATOR " ok"}}},
                        {"metamodel", {{"linear", {{"coefficients", {1.0, 2.0}}}}}},
                        {"input", {{{"family", "normal"}, {"location", 0}, {"scale", 1}}}}};
        CHECK_THROWS_AS(parse_experiment(doc), ConfigError);
    }
}

TEST_CASE("external simulator through a config")
{
    json doc = builtin_doc("toy1d", {{"method", "cv"}}, 300, 4);
    doc["model"] = {{"subprocess", {{"command", QVR_FAKE_SIMULATOR " ok"}, {"batch_size", 64}}},
                    {"metamodel", {{"linear", {{"coefficients", {1.0, 0.0}}}}}},
                    {"input",
                     {{{"family", "normal"}, {"location", 0}, {"scale", 1}},
                      {{"family", "normal"}, {"location", 0}, {"scale", 1}}}}};
    doc["metamodel_quantiles"] = {{"method", "monte_carlo"}, {"samples", 100000}};
    const auto x = parse_experiment(doc);
    const auto report = run_replications(x, 2);
    CHECK(report.failures == 0);
    CHECK(report.runs.size() == 4);
    // y = x1^2 + x2^2 is chi-square with 2 degrees of freedom: y_0.95 = -2 log 0.05.
    CHECK(std::fabs(report.estimate.mean + 2 * std::log(0.05)) < 1.5);

    json broken = doc;
    broken["model"]["subprocess"]["command"] = QVR_FAKE_SIMULATOR " error";
    CHECK_THROWS_AS(run_replications(parse_experiment(broken), 1), ModelError);
}

TEST_CASE("replications")
{
    SUBCASE("worker count does not change the report")
    {
        for (const auto& est : {json{{"method", "cv"}}, kCs,
                                json{{"method", "acs"}, {"cutpoints", {0.85, 0.95}}},
                                json{{"method", "ps"}, {"cutpoints", {0.95}}}}) {
            const auto x = parse_experiment(builtin_doc("toy1d", est, 200, 40));
            const auto a = run_replications(x, 1);
            const auto b = run_replications(x, 3);
            REQUIRE(a.runs.size() == b.runs.size());
            for (std::size_t r = 0; r < a.runs.size(); ++r) {
                CHECK(a.runs[r].estimate == b.runs[r].estimate);
                CHECK(a.runs[r].beta == b.runs[r].beta);
                CHECK(a.runs[r].draws == b.runs[r].draws);
            }
            CHECK(csv({"t", {a}}) == csv({"t", {b}}));
        }
    }
    SUBCASE("summaries match the stored estimates")
    {
        const auto report = run_replications(parse_experiment(builtin_doc("toy1d", {{"method", "acs"}, {"cutpoints", {0.85, 0.95}}}, 200, 50)), 2);
        std::vector<double> est;
        std::vector<double> beta2;
        for (const auto& r : report.runs) {
            est.push_back(r.estimate);
            beta2.push_back(r.beta[1]);
        }
        CHECK(std::fabs(report.estimate.mean - test::mean(est)) < 1e-12);
        CHECK(std::fabs(report.estimate.std - test::stddev(est)) < 1e-12);
        CHECK(std::fabs(report.beta[1].mean - test::mean(beta2)) < 1e-12);
        CHECK(std::fabs(report.beta[1].std - test::stddev(beta2)) < 1e-12);
        CHECK(report.estimate.sem == doctest::Approx(report.estimate.std / std::sqrt(50.0)));
        std::size_t total = 0;
        for (auto c : report.histogram.counts) total += c;
        CHECK(total == 50);
    }
    SUBCASE("every replication failing rethrows")
    {
        auto doc = builtin_doc("toy1d", {{"method", "cis"}}, 200, 3);
        CHECK_THROWS_AS(run_replications(parse_experiment(doc), 1), NonConvergence);
    }
    SUBCASE("summary helpers")
    {
        const auto s = summarize(std::vector<double>{1, 2, 3, 4});
        CHECK(s.mean == 2.5);
        CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3)));
        const auto one = summarize(std::vector<double>{7});
        CHECK(one.std == 0.0);
        const auto h = freedman_diaconis(std::vector<double>(10, 3.0));
        CHECK(h.counts == std::vector<std::size_t>{10});
        test::Gen gen(1);
        std::vector<double> v(5000);
        for (auto& x : v) x = gen.normal();
        const auto g = freedman_diaconis(v);
        std::size_t total = 0;
        for (auto c : g.counts) total += c;
        CHECK(total == v.size());
        CHECK(g.edges.size() == g.counts.size() + 1);
        CHECK(g.edges.front() <= *std::min_element(v.begin(), v.end()));
        CHECK(g.edges.back() >= *std::max_element(v.begin(), v.end()));
        v.push_back(1e9);  // one outlier would ask for ~10^10 bins
        CHECK(freedman_diaconis(v).counts.size() <= 1000);
    }
}

TEST_CASE("ground truth")
{
    const auto pair = make_builtin(BuiltinModel::identity1d);
    RngStream s(1);
    CHECK(std::fabs(ground_truth_quantile(pair, 0.95, 2'000'000, s) - 1.6449) < 0.002);
    CHECK_THROWS_AS(ground_truth_quantile(pair, 0.95, 1000, s), std::invalid_argument);
}

TEST_CASE("bootstrap")
{
    SUBCASE("constant sample")
    {
        PairedSample p{PointSet(1), std::vector<double>(50, 2.0), std::vector<double>(50, 1.0)};
        RngStream s(1);
        const auto r = bootstrap_iid(
            p, [](const PairedSample& q) { return empirical_cdf(q.y).quantile(0.95); }, 200, s);
        CHECK(r.std == 0.0);
        CHECK(r.estimate == 2.0);
        CHECK(r.resamples == 200);
        CHECK_THROWS_AS(bootstrap_iid(p, [](const PairedSample&) { return 0.0; }, 99, s), std::invalid_argument);
    }
    SUBCASE("empirical quantile of normal draws")
    {
        // One bootstrap std of a quantile carries O(n^-1/4) relative noise, so
        // the ratio is averaged over independent data sets.
        const std::size_t n = 1000;
        const double asymptotic = std::sqrt(0.95 * 0.05) / (normal::pdf(normal::quantile(0.95)) * std::sqrt(double(n)));
        std::vector<double> ratio;
        for (std::uint64_t k = 0; k < 20; ++k) {
            PairedSample p{PointSet(1), {}, {}};
            RngStream d(2, {k});
            for (std::size_t i = 0; i < n; ++i) {
                p.y.push_back(d.normal());
                p.z.push_back(0.0);
            }
            RngStream s(3, {k});
            const auto r = bootstrap_iid(
                p, [](const PairedSample& q) { return empirical_cdf(q.y).quantile(0.95); }, 1000, s);
            ratio.push_back(r.std / asymptotic);
        }
        MESSAGE("bootstrap / asymptotic: mean " << test::mean(ratio) << " spread " << test::stddev(ratio));
        CHECK(std::fabs(test::mean(ratio) - 1.0) < 0.20);
    }
    SUBCASE("controlled stratification against replications")
    {
        auto doc = builtin_doc("toy1d", kCs, 200, 2000);
        doc["estimator"]["allocation"] = {50, 50, 50, 50};
        const auto x = parse_experiment(doc);
        const auto reps = run_replications(x, 0);
        const auto prepared = prepare(x);
        const auto run = run_single(prepared, RngStream(x.seed, {12345}));
        RngStream s(4);
        const auto r = bootstrap_std(prepared, run, 500, s);
        CHECK(r.scheme == BootstrapScheme::within_strata);
        MESSAGE("bootstrap " << r.std << " replications " << reps.estimate.std);
        CHECK(std::fabs(r.std / reps.estimate.std - 1.0) < 0.25);
    }
    SUBCASE("schemes follow the design")
    {
        CHECK(scheme_for(Method::ee) == BootstrapScheme::iid);
        CHECK(scheme_for(Method::ps) == BootstrapScheme::iid);
        CHECK(scheme_for(Method::acs) == BootstrapScheme::within_strata);
        CHECK(scheme_for(Method::cis) == BootstrapScheme::weighted);
        StratifiedSample strat(2, 1);
        strat.strata[0].z = {0, 0, 0};
        strat.strata[0].y = {1, 2, 3};
        strat.strata[1].z = {1};
        strat.strata[1].y = {9};
        RngStream s(5);
        bootstrap_within_strata(
            strat,
            [](const StratifiedSample& q) {
                CHECK(q.counts() == std::vector<std::size_t>{3, 1});
                CHECK(q.strata[1].y[0] == 9.0);
                return 0.0;
            },
            100, s);
    }
}

TEST_CASE("reports")
{
    ReportSet empty{"empty", {}};
    CHECK(csv(empty) == "method,quantity,mean,std\n");

    const auto table = run_preset("table1", PresetOptions{20, 1, 0});
    const auto text = csv(table);
    CHECK(text == csv(table));
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "method,quantity,mean,std");
    std::vector<std::string> quantities;
    while (std::getline(lines, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 3);
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        quantities.push_back(line.substr(0, b));
    }
    const std::vector<std::string> expected{"ee,quantile",          "cv,quantile",          "acs-2,quantile",
                                            "acs-2,beta_1",         "acs-2,beta_2",         "acs-2,beta_estimate_1",
                                            "acs-2,beta_estimate_2", "acs-2,draws",          "acs-3,quantile",
                                            "acs-3,beta_1",         "acs-3,beta_2",         "acs-3,beta_3",
                                            "acs-3,beta_estimate_1", "acs-3,beta_estimate_2", "acs-3,beta_estimate_3",
                                            "acs-3,draws"};
    CHECK(quantities == expected);

    const auto path = scratch("table1.json");
    emit_report(table, ReportFormat::json, path.string());
    const auto first = read_file(path);
    emit_report(table, ReportFormat::json, path.string());
    CHECK(read_file(path) == first);
    const auto doc = json::parse(first);
    CHECK(doc["reports"].size() == 4);
    CHECK(doc["reports"][0]["estimates"].size() == 20);
    CHECK(doc["reports"][0]["quantile"]["mean"].get<double>() == table.reports[0].estimate.mean);
    CHECK(first.find("\"alpha\"") < first.find("\"beta\""));

    CHECK_THROWS_AS(emit_report(table, ReportFormat::csv, "/nonexistent/dir/out.csv"), std::runtime_error);

    ReplicationReport failed;
    failed.label = "x";
    failed.runs.resize(2);
    failed.runs[0].estimate = 1.0;
    failed.runs[1].failed = true;
    summarize_runs(failed);
    CHECK(failed.failures == 1);
    CHECK(to_json({"f", {failed}})["reports"][0]["estimates"][1].is_null());
}

TEST_CASE("real formatting round-trips")
{
    test::Gen gen(6);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::ldexp(gen.uniform(-1, 1), static_cast<int>(gen.integer(0, 200)) - 100);
        const auto s = format_real(v);
        double back = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        CHECK(back == v);
    }
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(3.0) == "3");
    CHECK(format_real(std::nan("")) == "nan");
}

TEST_CASE("diagnostics")
{
    const json doc = {{"cutpoints", {0.5, 0.9, 0.95}}, {"probabilities", {1.0, 0.98, 0.6, 0.2}}, {"n", 200}};
    const auto v = run_diag(DiagKind::variance, doc);
    const double f = 0.5 + 0.4 * 0.98 + 0.05 * 0.6 + 0.05 * 0.2;
    CHECK(v["f"].get<double>() == doctest::Approx(f));
    CHECK(v["ee"].get<double>() == doctest::Approx(f * (1 - f) / 200));
    CHECK(v["allocation"] == json{100, 80, 10, 10});
    CHECK(v["cs"].get<double>() == doctest::Approx(v["ps"].get<double>()).epsilon(1e-12));
    CHECK(v["ocs"].get<double>() <= v["ps"].get<double>());
    CHECK(v["widths"].size() == 4);

    const auto a = run_diag(DiagKind::allocation, doc);
    double sum = 0;
    for (const auto& b : a["beta"]) sum += b.get<double>();
    CHECK(sum == doctest::Approx(1.0));
    CHECK(a["beta"][0].get<double>() == 0.0);
    CHECK(a["counts"].size() == 4);

    const json degenerate = {{"cutpoints", {0.5}}, {"probabilities", {1.0, 0.0}}};
    CHECK(run_diag(DiagKind::allocation, degenerate)["beta"].is_null());

    const json even = {{"cutpoints", {0.5, 0.9, 0.95}}, {"allocation", {50, 50, 50, 50}}};
    const auto c = run_diag(DiagKind::cost, even);
    CHECK(c["expected_draws"].get<double>() == doctest::Approx(200 * (0.25 / 0.5 + 0.25 / 0.4 + 0.25 / 0.05 * 2)));
    CHECK(c["bound"].get<double>() == doctest::Approx(200 / 0.05));

    json two = {{"cutpoints", {0.5}},
                {"probabilities", {0.9, 0.1}},
                {"n", 100},
                {"two_strata", {{"alpha", 0.5}, {"f", 0.5}, {"rho_indicator", 0.1}}}};
    const auto t = run_diag(DiagKind::variance, two)["two_strata"];
    CHECK(t["k_squared"].get<double>() == doctest::Approx(0.99));
    CHECK(t["strong_control_rho"]["z_below"].get<double>() == doctest::Approx(1.0));

    CHECK_THROWS_AS(run_diag(DiagKind::variance, json{{"cutpoints", {0.5}}}), ConfigError);
    CHECK_THROWS_AS(run_diag(DiagKind::allocation, json{{"cutpoints", {0.5}}, {"probabilities", {0.1, 0.2}}, {"x", 1}}),
                    ConfigError);
    CHECK_THROWS_AS(parse_diag_kind("nope"), ConfigError);
}

TEST_CASE("presets")
{
    CHECK(preset_names() == std::vector<std::string>{"fig1", "fig2", "table1", "table2"});
    CHECK_THROWS_AS(preset_experiments("fig3"), ConfigError);
    const auto fig1 = preset_experiments("fig1");
    REQUIRE(fig1.size() == 3);
    CHECK(fig1[0].replications == 10000);
    CHECK(fig1[2].estimator.allocation == std::vector<std::size_t>{50, 50, 50, 50});
    const auto fig2 = preset_experiments("fig2", PresetOptions{7, 3, 1});
    REQUIRE(fig2.size() == 4);
    CHECK(fig2[0].replications == 7);
    CHECK(fig2[3].seed == 3);
    CHECK(fig2[3].estimator.method == Method::cis);
    const auto t1 = preset_experiments("table1");
    CHECK(t1[2].label() == "acs-2");
    CHECK(t1[3].n == 2000);
}

TEST_CASE("empirical quantile spread shrinks as the inverse square root")
{
    std::vector<double> ns{200, 2000, 20000};
    std::vector<double> stds;
    for (double n : ns) {
        auto x = parse_experiment(builtin_doc("toy1d", {{"method", "ee"}}, static_cast<std::size_t>(n), 1000));
        stds.push_back(run_replications(x, 0).estimate.std);
    }
    const double slope = test::loglog_slope(ns, stds);
    MESSAGE("std " << stds[0] << " " << stds[1] << " " << stds[2] << " slope " << slope);
    CHECK(std::fabs(slope + 0.5) < 0.1);
}
