#include "qvr/model.hpp"
#include "qvr/normal.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

using namespace qvr;

namespace {

long double toy1d_oracle(long double x) { return 0.95L * x * x * (1 + 0.5L * cosl(10 * x) + 0.5L * cosl(20 * x)); }

long double toy2d_oracle(long double a, long double b)
{
    return 0.95L * fabsl(a) * a * (1 + 0.5L * cosl(10 * a) + 0.5L * cosl(20 * a)) +
           0.7L * b * (1 + 0.4L * cosl(b) + 0.3L * cosl(14 * b));
}

double normal_pdf_oracle(double x, double m, double s)
{
    const double u = (x - m) / s;
    return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * std::numbers::pi));
}

double lognormal_pdf_oracle(double x, double mu, double s)
{
    if (x <= 0) return 0.0;
    return normal_pdf_oracle(std::log(x), mu, s) / x;
}

}  // namespace

TEST_CASE("toy1d pair values")
{
    const auto pair = make_builtin(BuiltinModel::toy1d);
    const double zero[] = {0.0};
    CHECK(evaluate_pair(pair, zero).z == 0.0);
    CHECK(evaluate_pair(pair, zero).y == 0.0);
    const double one[] = {1.0};
    const auto v = evaluate_pair(pair, one);
    CHECK(v.z == 1.0);
    CHECK(v.y == doctest::Approx(static_cast<double>(toy1d_oracle(1.0L))).epsilon(1e-14));
}

TEST_CASE("toy2d pair values")
{
    const auto pair = make_builtin(BuiltinModel::toy2d);
    const double zero[] = {0.0, 0.0};
    CHECK(evaluate_pair(pair, zero).z == 0.0);
    CHECK(evaluate_pair(pair, zero).y == 0.0);
    test::Gen gen(31);
    for (int i = 0; i < 200; ++i) {
        const double x[] = {gen.normal(), gen.normal()};
        const auto v = evaluate_pair(pair, x);
        CHECK(v.z == doctest::Approx(std::fabs(x[0]) * x[0] + x[1]).epsilon(1e-14));
        CHECK(v.y == doctest::Approx(static_cast<double>(toy2d_oracle(x[0], x[1]))).epsilon(1e-12));
    }
}

TEST_CASE("identity pair and dimension checks")
{
    const auto pair = make_builtin(BuiltinModel::identity1d);
    const double x[] = {-0.3};
    CHECK(evaluate_pair(pair, x).y == -0.3);
    CHECK(evaluate_pair(pair, x).z == -0.3);
    const double two[] = {1.0, 2.0};
    CHECK_THROWS_AS(evaluate_pair(pair, two), std::invalid_argument);
    CHECK(parse_builtin("toy2d") == BuiltinModel::toy2d);
    CHECK_FALSE(parse_builtin("toy3d"));
    for (auto m : {BuiltinModel::toy1d, BuiltinModel::toy2d, BuiltinModel::identity1d}) {
        CHECK(parse_builtin(builtin_name(m)) == m);
    }
}

TEST_CASE("closed-form metamodel quantiles")
{
    const auto toy1d = make_builtin(BuiltinModel::toy1d);
    REQUIRE(toy1d.has_closed_form_quantile());
    CHECK(toy1d.closed_form_quantile(0.95) == doctest::Approx(3.841458820694124).epsilon(1e-13));
    CHECK(toy1d.closed_form_quantile(0.5) == doctest::Approx(0.45493642311957283).epsilon(1e-13));
    CHECK_FALSE(make_builtin(BuiltinModel::toy2d).has_closed_form_quantile());
    CHECK_THROWS_AS(make_builtin(BuiltinModel::toy2d).closed_form_quantile(0.5), std::invalid_argument);
}

TEST_CASE("evaluation is pure")
{
    test::Gen gen(32);
    const auto pair = make_builtin(BuiltinModel::toy2d);
    for (int i = 0; i < 1000; ++i) {
        const double x[] = {gen.normal() * 3, gen.normal() * 3};
        const auto a = evaluate_pair(pair, x);
        const auto b = evaluate_pair(pair, x);
        CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }
}

TEST_CASE("input densities")
{
    const auto n1 = InputDistribution::standard_normal(1);
    const double zero[] = {0.0};
    CHECK(density(n1, zero) == doctest::Approx(0.3989422804).epsilon(1e-10));
    const auto n2 = InputDistribution::standard_normal(2);
    const double zero2[] = {0.0, 0.0};
    CHECK(density(n2, zero2) == doctest::Approx(0.15915494).epsilon(1e-8));
    const InputDistribution ln({Marginal::lognormal(0.0, 1.0)});
    const double neg[] = {-1.0};
    CHECK(density(ln, neg) == 0.0);
    const double at_zero[] = {0.0};
    CHECK(density(ln, at_zero) == 0.0);
}

TEST_CASE("joint density factorizes")
{
    test::Gen gen(33);
    const std::vector<Marginal> ms = {Marginal::normal(1.0, 2.0), Marginal::lognormal(0.5, 0.3),
                                      Marginal::normal(-1.0, 0.5)};
    const InputDistribution dist(ms);
    for (int i = 0; i < 1000; ++i) {
        const double x[] = {gen.normal() * 3, std::exp(gen.normal()), gen.normal() - 1};
        const double expected =
            normal_pdf_oracle(x[0], 1.0, 2.0) * lognormal_pdf_oracle(x[1], 0.5, 0.3) * normal_pdf_oracle(x[2], -1.0, 0.5);
        CHECK(density(dist, x) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("input validation")
{
    CHECK_THROWS_AS(InputDistribution({}), std::invalid_argument);
    CHECK_THROWS_AS(InputDistribution({Marginal::normal(0.0, 0.0)}), std::invalid_argument);
    CHECK_THROWS_AS(InputDistribution({Marginal::lognormal(0.0, -1.0)}), std::invalid_argument);
    CHECK_THROWS_AS(InputDistribution({Marginal::normal(0.0, NAN)}), std::invalid_argument);
}

TEST_CASE("marginal moments")
{
    CHECK(Marginal::normal(1.5, 2.0).mean() == 1.5);
    CHECK(Marginal::normal(1.5, 2.0).variance() == 4.0);
    const auto ln = Marginal::lognormal(0.2, 0.5);
    CHECK(ln.mean() == doctest::Approx(std::exp(0.2 + 0.125)).epsilon(1e-14));
    CHECK(ln.variance() == doctest::Approx((std::exp(0.25) - 1) * std::exp(0.4 + 0.25)).epsilon(1e-13));
}

TEST_CASE("sampling the input")
{
    const auto n1 = InputDistribution::standard_normal(1);
    RngStream s(5);
    CHECK(sample_input(n1, s, 0).empty());

    const auto xs = sample_input(n1, s, 1'000'000);
    std::vector<double> v(xs.flat().begin(), xs.flat().end());
    CHECK(std::fabs(test::mean(v)) < 0.004);
    CHECK(std::fabs(test::variance(v) - 1.0) < 0.01);

    const InputDistribution ln({Marginal::lognormal(0.0, 1.0)});
    const auto ls = sample_input(ln, s, 1'000'000);
    std::vector<double> w(ls.flat().begin(), ls.flat().end());
    const double se = std::sqrt((std::numbers::e - 1.0) * std::numbers::e / 1e6);
    CHECK(std::fabs(test::mean(w) - std::exp(0.5)) < 3.0 * se);
}

TEST_CASE("sampling is reproducible")
{
    const auto n2 = InputDistribution::standard_normal(2);
    RngStream a(8, {1});
    RngStream b(8, {1});
    const auto xa = sample_input(n2, a, 1000);
    const auto xb = sample_input(n2, b, 1000);
    CHECK(std::equal(xa.flat().begin(), xa.flat().end(), xb.flat().begin()));
}

TEST_CASE("draws agree with each marginal cdf")
{
    for (const auto& m : {Marginal::normal(1.0, 2.0), Marginal::lognormal(0.5, 0.3)}) {
        RngStream s(6, {static_cast<std::uint64_t>(m.family)});
        std::vector<double> v(1'000'000);
        for (auto& x : v) x = m.draw(s);
        CHECK(test::ks_distance(v, [&](double x) { return m.cdf(x); }) < 0.002);
        // The density integrates to the cdf.
        const double a = m.family == Marginal::Family::normal ? -1.0 : 1.0;
        const double b = a + 1.0;
        double integral = 0.0;
        const int steps = 2000;
        for (int i = 0; i < steps; ++i) {
            const double x0 = a + (b - a) * i / steps;
            const double x1 = a + (b - a) * (i + 1) / steps;
            integral += (x1 - x0) / 6.0 * (m.density(x0) + 4 * m.density(0.5 * (x0 + x1)) + m.density(x1));
        }
        CHECK(integral == doctest::Approx(m.cdf(b) - m.cdf(a)).epsilon(1e-10));
    }
}

TEST_CASE("linear metamodel")
{
    const LinearEvaluator lin(1.0, {2.0, -1.0});
    const double x[] = {0.5, 3.0};
    CHECK(lin.dimension() == 2);
    CHECK(lin.evaluate(x) == -1.0);
    CHECK_THROWS_AS(LinearEvaluator(0.0, {}), std::invalid_argument);
}

TEST_CASE("point sets")
{
    PointSet ps(2);
    const double a[] = {1, 2};
    ps.push_back(a);
    CHECK(ps.size() == 1);
    CHECK(ps[0][1] == 2);
    const double bad[] = {1, 2, 3};
    CHECK_THROWS_AS(ps.push_back(bad), std::invalid_argument);
    CHECK_THROWS_AS(PointSet(0), std::invalid_argument);
}
