#include "qvr/sampling.hpp"

#include "qvr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qvr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_probabilities(std::span<const double> p, const char* who)
{
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0 && p[i] < 1.0)) {
            throw std::invalid_argument(std::string(who) + ": probabilities must lie in (0, 1)");
        }
        if (i > 0 && !(p[i] > p[i - 1])) {
            throw std::invalid_argument(std::string(who) + ": probabilities must be strictly increasing");
        }
    }
}

}  // namespace

StrataSpec::StrataSpec(std::vector<double> cutpoints, std::vector<double> z_values)
    : cutpoints_(std::move(cutpoints)), z_values_(std::move(z_values))
{
    if (cutpoints_.size() < 2 || cutpoints_.size() != z_values_.size()) {
        throw std::invalid_argument("StrataSpec: need m+1 >= 2 cutpoints and as many z values");
    }
    if (cutpoints_.front() != 0.0 || cutpoints_.back() != 1.0) {
        throw std::invalid_argument("StrataSpec: cutpoints must start at 0 and end at 1");
    }
    if (z_values_.front() != -kInf || z_values_.back() != kInf) {
        throw std::invalid_argument("StrataSpec: z values must start at -inf and end at +inf");
    }
    for (std::size_t j = 1; j < cutpoints_.size(); ++j) {
        if (!(cutpoints_[j] > cutpoints_[j - 1])) {
            throw std::invalid_argument("StrataSpec: cutpoints must be strictly increasing");
        }
        if (!(z_values_[j] > z_values_[j - 1])) {
            throw std::invalid_argument("StrataSpec: z values must be strictly increasing");
        }
    }
}

StrataSpec StrataSpec::from_inner(std::span<const double> inner_cutpoints,
                                  std::span<const double> inner_z)
{
    std::vector<double> cuts{0.0};
    cuts.insert(cuts.end(), inner_cutpoints.begin(), inner_cutpoints.end());
    cuts.push_back(1.0);
    std::vector<double> z{-kInf};
    z.insert(z.end(), inner_z.begin(), inner_z.end());
    z.push_back(kInf);
    return StrataSpec(std::move(cuts), std::move(z));
}

std::vector<double> StrataSpec::widths() const
{
    std::vector<double> w(strata());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = width(j);
    return w;
}

std::size_t StrataSpec::locate(double z) const
{
    if (std::isnan(z)) throw DegenerateSample("StrataSpec::locate: metamodel returned NaN");
    // First boundary >= z closes the stratum (z_{j}, z_{j+1}].
    const auto it = std::lower_bound(z_values_.begin() + 1, z_values_.end(), z);
    return static_cast<std::size_t>(it - z_values_.begin()) - 1;
}

std::size_t AllocationPlan::total() const
{
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

void AllocationPlan::check(const StrataSpec& spec) const
{
    if (counts.size() != spec.strata()) {
        throw std::invalid_argument("AllocationPlan: " + std::to_string(counts.size()) +
                                    " counts for " + std::to_string(spec.strata()) + " strata");
    }
}

StratifiedSample::StratifiedSample(std::size_t m, std::size_t dim)
{
    strata.reserve(m);
    for (std::size_t j = 0; j < m; ++j) strata.push_back(Stratum{PointSet(dim), {}, {}});
}

std::size_t StratifiedSample::total() const
{
    std::size_t n = 0;
    for (const auto& s : strata) n += s.size();
    return n;
}

std::vector<std::size_t> StratifiedSample::counts() const
{
    std::vector<std::size_t> c;
    c.reserve(strata.size());
    for (const auto& s : strata) c.push_back(s.size());
    return c;
}

bool StratifiedSample::evaluated() const
{
    return std::all_of(strata.begin(), strata.end(), [](const Stratum& s) { return s.evaluated(); });
}

std::vector<double> sample_metamodel(const ModelPair& pair, RngStream& stream, std::size_t count)
{
    std::vector<double> z(count);
    std::vector<double> x(pair.dimension());
    for (auto& v : z) {
        pair.input().draw(stream, x);
        v = pair.meta().evaluate(x);
    }
    return z;
}

std::vector<double> metamodel_quantiles(const ModelPair& pair, std::span<const double> probabilities,
                                        QuantilePrecision precision, RngStream& stream)
{
    check_probabilities(probabilities, "metamodel_quantiles");
    std::vector<double> out(probabilities.size());
    if (precision.kind == QuantilePrecision::Kind::closed_form) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pair.closed_form_quantile(probabilities[i]);
    } else {
        if (precision.samples < 100000) {
            throw std::invalid_argument("metamodel_quantiles: Monte Carlo needs at least 1e5 samples");
        }
        auto z = sample_metamodel(pair, stream, precision.samples);
        const double n = static_cast<double>(z.size());
        // Probabilities are increasing, so each selection narrows the range
        // left for the next one.
        auto first = z.begin();
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto rank = static_cast<std::size_t>(std::ceil(probabilities[i] * n));
            const auto nth = z.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(rank, 1) - 1);
            std::nth_element(first, nth, z.end());
            out[i] = *nth;
            first = nth;
        }
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out[i] > out[i - 1])) {
            throw DegenerateSample("metamodel_quantiles: metamodel quantiles are not strictly increasing");
        }
    }
    return out;
}

StrataSpec make_strata(const ModelPair& pair, std::span<const double> inner_cutpoints,
                       QuantilePrecision precision, RngStream& stream)
{
    const auto z = metamodel_quantiles(pair, inner_cutpoints, precision, stream);
    return StrataSpec::from_inner(inner_cutpoints, z);
}

std::uint64_t extend_strata(const ModelPair& pair, const StrataSpec& spec,
                            StratifiedSample& sample, const AllocationPlan& extra,
                            RngStream& stream, std::uint64_t max_draws)
{
    extra.check(spec);
    if (sample.strata.size() != spec.strata()) {
        throw std::invalid_argument("extend_strata: sample and spec disagree on the stratum count");
    }
    const std::size_t wanted = extra.total();
    if (max_draws == 0) max_draws = 1000 * static_cast<std::uint64_t>(wanted);
    if (max_draws < wanted) throw std::invalid_argument("extend_strata: max_draws below the plan total");

    std::vector<std::size_t> open = extra.counts;
    std::size_t remaining = wanted;
    std::uint64_t draws = 0;
    std::vector<double> x(pair.dimension());
    while (remaining > 0) {
        if (draws == max_draws) {
            std::string detail;
            for (std::size_t j = 0; j < open.size(); ++j) {
                if (open[j] > 0) detail += " stratum " + std::to_string(j) + " short by " + std::to_string(open[j]) + ";";
            }
            throw QuotaError("rejection sampling stopped after " + std::to_string(draws) +
                             " draws:" + detail);
        }
        pair.input().draw(stream, x);
        const double z = pair.meta().evaluate(x);
        ++draws;
        const std::size_t j = spec.locate(z);
        if (open[j] == 0) continue;
        sample.strata[j].x.push_back(x);
        sample.strata[j].z.push_back(z);
        --open[j];
        --remaining;
    }
    return draws;
}

RejectionResult sample_strata(const ModelPair& pair, const StrataSpec& spec,
                              const AllocationPlan& plan, RngStream& stream,
                              std::uint64_t max_draws)
{
    RejectionResult result{StratifiedSample(spec.strata(), pair.dimension()), 0};
    result.draws = extend_strata(pair, spec, result.sample, plan, stream, max_draws);
    return result;
}

std::size_t evaluate_full(const ModelPair& pair, StratifiedSample& sample)
{
    std::size_t calls = 0;
    for (auto& s : sample.strata) {
        if (s.evaluated()) continue;
        PointSet pending(s.x.dim());
        for (std::size_t i = s.y.size(); i < s.size(); ++i) pending.push_back(s.x[i]);
        const auto y = pair.full().evaluate_batch(pending);
        s.y.insert(s.y.end(), y.begin(), y.end());
        calls += y.size();
    }
    return calls;
}

RejectionCost expected_rejection_cost(const StrataSpec& spec, const AllocationPlan& plan)
{
    plan.check(spec);
    const double n = static_cast<double>(plan.total());
    double expected = 0.0;
    double min_width = 1.0;
    for (std::size_t j = 0; j < spec.strata(); ++j) {
        expected += static_cast<double>(plan.counts[j]) / spec.width(j);
        min_width = std::min(min_width, spec.width(j));
    }
    return {expected, n / min_width};
}

}  // namespace qvr
