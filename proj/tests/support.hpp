#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace qvr::test {

// Hand-rolled generators for property tests. Independent of the library RNG
// so a broken RngStream cannot mask itself.
struct Gen {
    std::mt19937_64 engine;

    explicit Gen(std::uint64_t seed) : engine(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0)
    {
        return std::uniform_real_distribution<double>(lo, hi)(engine);
    }

    std::size_t integer(std::size_t lo, std::size_t hi)
    {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine);
    }

    double normal() { return std::normal_distribution<double>()(engine); }

    /// m-1 distinct sorted inner cutpoints in (0,1), no stratum narrower than min_width.
    std::vector<double> inner_cutpoints(std::size_t m, double min_width = 1e-3)
    {
        for (;;) {
            std::vector<double> c(m - 1);
            for (auto& v : c) v = uniform();
            std::sort(c.begin(), c.end());
            double prev = 0.0;
            bool ok = true;
            for (double v : c) {
                ok = ok && v - prev >= min_width;
                prev = v;
            }
            if (ok && 1.0 - prev >= min_width) return c;
        }
    }

    /// Point of the open simplex.
    std::vector<double> simplex(std::size_t m)
    {
        std::vector<double> s(m);
        for (auto& v : s) v = -std::log(uniform(1e-12, 1.0));
        const double t = std::accumulate(s.begin(), s.end(), 0.0);
        for (auto& v : s) v /= t;
        return s;
    }

    std::vector<double> probabilities(std::size_t m)
    {
        std::vector<double> p(m);
        for (auto& v : p) v = uniform();
        return p;
    }
};

inline double mean(const std::vector<double>& v)
{
    long double s = 0;
    for (double x : v) s += x;
    return static_cast<double>(s / v.size());
}

inline double variance(const std::vector<double>& v)
{
    const double m = mean(v);
    long double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return static_cast<double>(s / (v.size() - 1));
}

inline double stddev(const std::vector<double>& v) { return std::sqrt(variance(v)); }

/// sup |F_n - F| over a sample.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf)
{
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, std::fabs(f - i / n), std::fabs((i + 1) / n - f)});
    }
    return d;
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const double mx = mean(lx);
    const double my = mean(ly);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

/// Inverse of a monotone cdf by bisection.
inline double invert(const std::function<double(double)>& cdf, double p, double lo, double hi)
{
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qvr::test

namespace qvr::test {

/// E[h(X)] for X ~ N(0,1) by the composite midpoint rule on [-12, 12]; h may jump.
inline double normal_expect(const std::function<double(double)>& h, int steps = 2'000'000)
{
    const double a = -12.0;
    const double dx = 24.0 / steps;
    long double s = 0;
    for (int i = 0; i < steps; ++i) {
        const double x = a + (i + 0.5) * dx;
        s += h(x) * std::exp(-0.5 * x * x);
    }
    return static_cast<double>(s * dx / std::sqrt(2.0 * 3.14159265358979323846));
}

inline double toy1d_f(double x) { return 0.95 * x * x * (1 + 0.5 * std::cos(10 * x) + 0.5 * std::cos(20 * x)); }

/// P(Y <= y) for Toy1D by quadrature.
inline double toy1d_cdf(double y)
{
    return normal_expect([y](double x) { return toy1d_f(x) <= y ? 1.0 : 0.0; });
}

}  // namespace qvr::test
