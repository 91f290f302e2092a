#include "qvr/error.hpp"
#include "qvr/importance.hpp"
#include "qvr/normal.hpp"
#include "qvr/sampling.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace qvr;

namespace {

const ModelPair& identity1d()
{
    static const ModelPair pair = make_builtin(BuiltinModel::identity1d);
    return pair;
}

const ModelPair& toy1d()
{
    static const ModelPair pair = make_builtin(BuiltinModel::toy1d);
    return pair;
}

const ModelPair& toy2d()
{
    static const ModelPair pair = make_builtin(BuiltinModel::toy2d);
    return pair;
}

BiasedParams gaussian(std::vector<double> mean, std::vector<double> cov,
                      BiasedFamily family = BiasedFamily::joint_gaussian)
{
    return BiasedParams{family, std::move(mean), std::move(cov)};
}

// Truncated standard normal on (-inf, 0].
const double kHalfMean = -normal::kInvSqrt2Pi / 0.5;
const double kHalfVar = 1.0 - kHalfMean * kHalfMean;

MomentMatchOptions lower_tail(std::size_t pilot)
{
    MomentMatchOptions o;
    o.tail = TailEvent::lower;
    o.pilot = pilot;
    return o;
}

}  // namespace

TEST_CASE("biased densities")
{
    const auto std2 = InputDistribution::standard_normal(2);
    const double origin[2] = {0.0, 0.0};
    CHECK(biased_density(gaussian({0, 0}, {1, 0, 0, 1}), std2, origin) ==
          doctest::Approx(1.0 / (2 * 3.14159265358979323846)).epsilon(1e-14));

    const auto std1 = InputDistribution::standard_normal(1);
    const double one[1] = {1.0};
    CHECK(biased_density(gaussian({1}, {1}, BiasedFamily::componentwise_matched), std1, one) ==
          doctest::Approx(0.398942280401433).epsilon(1e-14));

    SUBCASE("correlated joint member against the closed form")
    {
        const double r = 0.6;
        const BiasedDensity q(gaussian({1, -1}, {4, 2 * 3 * r, 2 * 3 * r, 9}), std2);
        const double x[2] = {0.3, 0.4};
        const double u = (x[0] - 1) / 2;
        const double v = (x[1] + 1) / 3;
        const double expected = std::exp(-(u * u - 2 * r * u * v + v * v) / (2 * (1 - r * r))) /
                                (2 * 3.14159265358979323846 * 6 * std::sqrt(1 - r * r));
        CHECK(q.density(x) == doctest::Approx(expected).epsilon(1e-13));
        CHECK(q.log_density(x) == doctest::Approx(std::log(expected)).epsilon(1e-13));
    }
    SUBCASE("lognormal component keeps its first two moments")
    {
        const InputDistribution ln({Marginal::lognormal(0.2, 0.5), Marginal::normal(0, 1)});
        const double m = 1.7;
        const double v = 0.9;
        const BiasedDensity q(gaussian({m, 0.5}, {v, 0, 0, 2}, BiasedFamily::componentwise_matched), ln);
        const auto& c = q.component(0);
        CHECK(c.family == Marginal::Family::lognormal);
        const double s2 = c.scale * c.scale;
        const double mean = std::exp(c.location + s2 / 2);
        const double var = (std::exp(s2) - 1) * std::exp(2 * c.location + s2);
        CHECK(std::fabs(mean - m) < 1e-10);
        CHECK(std::fabs(var - v) < 1e-10);
        CHECK(q.component(1).family == Marginal::Family::normal);
        CHECK(q.component(1).scale == doctest::Approx(std::sqrt(2.0)));
        const double outside[2] = {-0.1, 0.0};
        CHECK(q.density(outside) == 0.0);
        CHECK(std::isinf(q.log_density(outside)));

        RngStream s(4);
        std::vector<double> draws;
        double point[2];
        for (int i = 0; i < 200000; ++i) {
            q.draw(s, point);
            draws.push_back(point[0]);
        }
        CHECK(test::mean(draws) == doctest::Approx(m).epsilon(0.01));
        CHECK(test::variance(draws) == doctest::Approx(v).epsilon(0.03));
    }
    SUBCASE("invalid members")
    {
        CHECK_THROWS_AS(BiasedDensity(gaussian({0, 0}, {1, 2, 2, 1}), std2), std::invalid_argument);
        CHECK_THROWS_AS(BiasedDensity(gaussian({0, 0}, {1, 0.5, 0.2, 1}), std2), std::invalid_argument);
        const InputDistribution ln({Marginal::lognormal(0, 1)});
        CHECK_THROWS_AS(BiasedDensity(gaussian({-1}, {1}, BiasedFamily::componentwise_matched), ln),
                        std::invalid_argument);
    }
}

TEST_CASE("moment matching on a half line")
{
    const auto& pair = identity1d();
    RngStream s(1);
    const auto p = moment_match(pair, 0.0, lower_tail(1'000'000), s);
    MESSAGE("lambda " << p.mean[0] << " C " << p.covariance[0]);
    CHECK(std::fabs(p.mean[0] - (-0.798)) < 0.003);
    CHECK(std::fabs(p.covariance[0] - 0.363) < 0.005);
    CHECK(std::fabs(p.mean[0] - kHalfMean) < 0.003);
    CHECK(std::fabs(p.covariance[0] - kHalfVar) < 0.005);

    SUBCASE("event always true gives the input moments")
    {
        RngStream t(2);
        const std::size_t n = 100000;
        const auto q = moment_match(pair, std::numeric_limits<double>::infinity(), lower_tail(n), t);
        CHECK(std::fabs(q.mean[0]) < 3 / std::sqrt(double(n)));
        CHECK(q.covariance[0] == doctest::Approx(1.0).epsilon(0.02));
    }
    SUBCASE("upper tail mirrors the lower one")
    {
        RngStream t(3);
        MomentMatchOptions o;
        o.pilot = 1'000'000;
        const auto q = moment_match(pair, 0.0, o, t);
        CHECK(std::fabs(q.mean[0] + kHalfMean) < 0.003);
    }
    SUBCASE("weighted pilot from another density")
    {
        const BiasedDensity q0(gaussian({-1}, {2.25}), pair.input());
        auto o = lower_tail(1'000'000);
        o.q0 = &q0;
        RngStream t(4);
        const auto q = moment_match(pair, 0.0, o, t);
        CHECK(std::fabs(q.mean[0] - kHalfMean) < 0.005);
        CHECK(std::fabs(q.covariance[0] - kHalfVar) < 0.008);
    }
    SUBCASE("preconditions")
    {
        RngStream t(5);
        CHECK_THROWS_AS(moment_match(pair, 0.0, lower_tail(999), t), std::invalid_argument);
        CHECK_THROWS_AS(moment_match(pair, -50.0, lower_tail(1000), t), DegenerateSample);
    }
}

TEST_CASE("moment matching error decays as the inverse square root")
{
    const auto& pair = identity1d();
    std::vector<double> sizes{1e3, 1e4, 1e5};
    std::vector<double> rmse;
    for (double n : sizes) {
        double acc = 0.0;
        constexpr int reps = 40;
        for (int r = 0; r < reps; ++r) {
            RngStream s(7, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)});
            const auto p = moment_match(pair, 0.0, lower_tail(static_cast<std::size_t>(n)), s);
            const double dm = p.mean[0] - kHalfMean;
            const double dc = p.covariance[0] - kHalfVar;
            acc += dm * dm + dc * dc;
        }
        rmse.push_back(std::sqrt(acc / reps));
    }
    const double slope = test::loglog_slope(sizes, rmse);
    MESSAGE("moment-match error slope " << slope);
    CHECK(std::fabs(slope + 0.5) < 0.15);
}

TEST_CASE("true optimal moments")
{
    const auto& pair = identity1d();
    RngStream s(8);
    const auto m = true_optimal_moments(pair, 0.0, TailEvent::lower, 1'000'000, s);
    CHECK(std::fabs(m.mean[0] - kHalfMean) < 0.003);
    CHECK(std::fabs(m.covariance[0] - kHalfVar) < 0.005);
    const auto all = true_optimal_moments(pair, std::numeric_limits<double>::infinity(), TailEvent::lower, 1'000'000, s);
    CHECK(std::fabs(all.mean[0]) < 0.003);
    CHECK(std::fabs(all.covariance[0] - 1.0) < 0.005);
    CHECK(all.hits == 1'000'000);
    CHECK_THROWS_AS(true_optimal_moments(pair, -50.0, TailEvent::lower, 1'000'000, s), DegenerateSample);
}

TEST_CASE("metamodel moments against full-model moments on Toy2D")
{
    const auto& pair = toy2d();
    RngStream q(9);
    const double z95 =
        metamodel_quantiles(pair, std::vector<double>{0.95}, QuantilePrecision::monte_carlo(1'000'000), q)[0];
    const double y95 = 2.752;  // full-model 0.95-quantile, 10^7-sample estimate

    RngStream s(10);
    const auto truth = true_optimal_moments(pair, y95, TailEvent::upper, 2'000'000, s);
    MomentMatchOptions o;
    o.pilot = 100000;
    const auto fit = moment_match(pair, z95, o, s);
    MESSAGE("lambda* (" << truth.mean[0] << ", " << truth.mean[1] << ")  lambda_r (" << fit.mean[0] << ", "
                        << fit.mean[1] << ")");
    MESSAGE("C* diag (" << truth.covariance[0] << ", " << truth.covariance[3] << ")  C_r diag (" << fit.covariance[0]
                        << ", " << fit.covariance[3] << ")");
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::fabs(truth.mean[i] - fit.mean[i]) < 0.1);
}

TEST_CASE("importance-sampled cdf")
{
    const auto& pair = identity1d();
    const double y95 = normal::quantile(0.95);

    SUBCASE("unit weights give the empirical cdf")
    {
        RngStream s(11);
        const auto w = draw_weighted(pair, nullptr, 500, s);
        for (double v : w.w) CHECK(v == 1.0);
        for (double y : {-1.0, 0.0, 0.7, 2.0}) {
            double count = 0;
            for (double v : w.y) count += v <= y;
            CHECK(is_cdf(w, y, IsMode::raw) == doctest::Approx(count / 500).epsilon(1e-14));
            CHECK(is_cdf(w, y, IsMode::self_normalized) == doctest::Approx(count / 500).epsilon(1e-14));
            CHECK(is_cdf(w, y, IsMode::complement) == doctest::Approx(count / 500).epsilon(1e-14));
            const double f = count / 500;
            CHECK(is_variance_estimate(w, y) == doctest::Approx(f * (1 - f) / 500).epsilon(1e-12));
        }
    }
    SUBCASE("raw mode is unbiased for full-support members")
    {
        const std::vector<BiasedParams> members{gaussian({1}, {1}), gaussian({-1}, {1}), gaussian({0.5}, {2.25})};
        for (std::size_t k = 0; k < members.size(); ++k) {
            const BiasedDensity q(members[k], pair.input());
            std::vector<double> est(10000);
            std::vector<double> wmean(est.size());
            for (std::size_t r = 0; r < est.size(); ++r) {
                RngStream s(12, {k, r});
                const auto w = draw_weighted(pair, &q, 1000, s);
                est[r] = is_cdf(w, y95, IsMode::raw);
                wmean[r] = test::mean(w.w);
            }
            const double se = test::stddev(est) / 100;
            MESSAGE("member " << k << ": mean " << test::mean(est) << " se " << se);
            CHECK(std::fabs(test::mean(est) - 0.95) < 3 * se);
            if (k == 0) CHECK(std::fabs(test::mean(est) - 0.95) < 0.002);
            CHECK(std::fabs(test::mean(wmean) - 1.0) < 3 * test::stddev(wmean) / 100);
        }
    }
    SUBCASE("self-normalized mode is a proper cdf")
    {
        const BiasedDensity q(gaussian({1}, {1}), pair.input());
        test::Gen gen(13);
        for (int trial = 0; trial < 50; ++trial) {
            RngStream s(14, {static_cast<std::uint64_t>(trial)});
            const auto w = draw_weighted(pair, &q, gen.integer(1, 300), s);
            CHECK(is_cdf(w, std::numeric_limits<double>::infinity(), IsMode::self_normalized) == 1.0);
            CHECK(is_cdf(w, -std::numeric_limits<double>::infinity(), IsMode::self_normalized) == 0.0);
            for (double v : w.w) CHECK(v > 0.0);
            double prev = 0.0;
            for (double y = -4; y <= 4; y += 0.05) {
                const double f = is_cdf(w, y, IsMode::self_normalized);
                CHECK(f >= prev);
                prev = f;
            }
        }
    }
    SUBCASE("variance estimate against replications")
    {
        const BiasedDensity q(gaussian({-1}, {1}), pair.input());
        std::vector<double> est(10000);
        std::vector<double> var(est.size());
        for (std::size_t r = 0; r < est.size(); ++r) {
            RngStream s(15, {r});
            const auto w = draw_weighted(pair, &q, 500, s);
            est[r] = is_cdf(w, 0.0, IsMode::raw);
            var[r] = is_variance_estimate(w, 0.0);
        }
        MESSAGE("replication variance " << test::variance(est) << " mean estimate " << test::mean(var));
        CHECK(std::fabs(test::mean(var) / test::variance(est) - 1.0) < 0.10);
    }
}

TEST_CASE("importance-sampled quantile")
{
    test::Gen gen(16);
    for (int trial = 0; trial < 200; ++trial) {
        WeightedSample w;
        const std::size_t n = gen.integer(1, 40);
        for (std::size_t i = 0; i < n; ++i) {
            w.x.push_back(std::vector<double>{0.0});
            w.y.push_back(gen.normal());
            w.w.push_back(gen.uniform(0.1, 3.0));
        }
        const double alpha = gen.uniform(0.01, 0.99);
        for (auto mode : {IsMode::self_normalized, IsMode::complement}) {
            const double q = is_quantile(w, alpha, mode);
            CHECK(is_cdf(w, q, mode) > alpha - 1e-12);
        }
    }
}

TEST_CASE("controlled importance sampling")
{
    SUBCASE("original density reproduces the empirical quantile")
    {
        const auto& pair = toy2d();
        CisConfig c;
        c.use_original = true;
        c.n = 200;
        RngStream s(17);
        const auto r = cis_quantile(pair, c, s);
        auto y = r.sample.y;
        std::sort(y.begin(), y.end());
        CHECK(r.estimate == y[189]);
        CHECK_FALSE(r.params);
    }
    SUBCASE("Toy2D fit concentrates on the event")
    {
        const auto& pair = toy2d();
        RngStream q(18);
        CisConfig c;
        c.family = BiasedFamily::componentwise_matched;
        c.threshold =
            metamodel_quantiles(pair, std::vector<double>{0.95}, QuantilePrecision::monte_carlo(1'000'000), q)[0];
        RngStream s(19);
        const auto r = cis_quantile(pair, c, s);
        CHECK(r.event_mass > 0.1);
        CHECK(r.sample.size() == 200);
        CHECK(std::fabs(r.estimate - 2.75) < 1.0);
    }
    SUBCASE("Toy1D event is not captured by one member")
    {
        const auto& pair = toy1d();
        RngStream q(20);
        for (auto family : {BiasedFamily::joint_gaussian, BiasedFamily::componentwise_matched}) {
            CisConfig c;
            c.family = family;
            c.threshold = metamodel_quantiles(pair, std::vector<double>{0.95}, QuantilePrecision::closed_form(), q)[0];
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                RngStream s(21, {seed});
                CHECK_THROWS_AS(cis_quantile(pair, c, s), NonConvergence);
            }
        }
    }
}
