#pragma once

#include "qvr/model.hpp"
#include "qvr/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qvr {

/*!
 * Strata on the metamodel output: stratum j (0-based) is the interval
 * (z[j], z[j+1]] with nominal probability cut[j+1] - cut[j].
 *
 * Both arrays have m+1 entries; the cutpoints start at 0 and end at 1, the z
 * values start at -inf and end at +inf.
 */
class StrataSpec {
public:
    StrataSpec(std::vector<double> cutpoints, std::vector<double> z_values);

    /// Convenience for inner values only: (0, a_1..a_{m-1}, 1) and (-inf, z_1.., +inf).
    static StrataSpec from_inner(std::span<const double> inner_cutpoints,
                                 std::span<const double> inner_z);

    std::size_t strata() const { return cutpoints_.size() - 1; }
    const std::vector<double>& cutpoints() const { return cutpoints_; }
    const std::vector<double>& z_values() const { return z_values_; }
    double width(std::size_t j) const { return cutpoints_[j + 1] - cutpoints_[j]; }
    std::vector<double> widths() const;

    /// Index of the stratum holding z.
    std::size_t locate(double z) const;

private:
    std::vector<double> cutpoints_;
    std::vector<double> z_values_;
};

struct AllocationPlan {
    std::vector<std::size_t> counts;

    std::size_t total() const;
    /// Throws std::invalid_argument when the plan does not fit the spec.
    void check(const StrataSpec& spec) const;
};

/// Points routed to one stratum. y may lag behind x/z until evaluated.
struct Stratum {
    PointSet x;
    std::vector<double> z;
    std::vector<double> y;

    std::size_t size() const { return z.size(); }
    bool evaluated() const { return y.size() == z.size(); }
};

struct StratifiedSample {
    std::vector<Stratum> strata;

    StratifiedSample() = default;
    StratifiedSample(std::size_t m, std::size_t dim);

    std::size_t total() const;
    std::vector<std::size_t> counts() const;
    bool evaluated() const;
};

struct QuantilePrecision {
    enum class Kind { closed_form, monte_carlo };

    Kind kind = Kind::closed_form;
    std::size_t samples = 0;

    static QuantilePrecision closed_form() { return {Kind::closed_form, 0}; }
    static QuantilePrecision monte_carlo(std::size_t samples) { return {Kind::monte_carlo, samples}; }
};

/*!
 * Metamodel quantiles at the given probabilities (strictly increasing, all in
 * (0,1)). The Monte Carlo path takes the ceil(a N)-th order statistic of N
 * metamodel draws; it needs N >= 1e5.
 */
std::vector<double> metamodel_quantiles(const ModelPair& pair, std::span<const double> probabilities,
                                        QuantilePrecision precision, RngStream& stream);

/// Metamodel values of `count` fresh input draws.
std::vector<double> sample_metamodel(const ModelPair& pair, RngStream& stream, std::size_t count);

/// Strata for the given inner cutpoints, z values from metamodel_quantiles.
StrataSpec make_strata(const ModelPair& pair, std::span<const double> inner_cutpoints,
                       QuantilePrecision precision, RngStream& stream);

struct RejectionResult {
    StratifiedSample sample;
    std::uint64_t draws = 0;  // metamodel evaluations, N_r
};

/*!
 * Pooled rejection: every input draw is routed to its stratum and kept while
 * that stratum's quota is open. max_draws = 0 means 1000 x plan total.
 * Throws QuotaError if the quotas are still open after max_draws draws.
 */
RejectionResult sample_strata(const ModelPair& pair, const StrataSpec& spec,
                              const AllocationPlan& plan, RngStream& stream,
                              std::uint64_t max_draws = 0);

/// Same as sample_strata but appends `extra` points to an existing sample.
std::uint64_t extend_strata(const ModelPair& pair, const StrataSpec& spec,
                            StratifiedSample& sample, const AllocationPlan& extra,
                            RngStream& stream, std::uint64_t max_draws = 0);

/// Fills in f for every point still missing it; returns the number of f calls.
std::size_t evaluate_full(const ModelPair& pair, StratifiedSample& sample);

struct RejectionCost {
    double expected;  // n * sum_j beta_j / width_j, per-stratum rejection
    double bound;     // n / min_j width_j
};

RejectionCost expected_rejection_cost(const StrataSpec& spec, const AllocationPlan& plan);

}  // namespace qvr
