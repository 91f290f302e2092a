#pragma once

#include "qvr/rng.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qvr {

/// Row-major set of d-dimensional points.
class PointSet {
public:
    explicit PointSet(std::size_t dim = 1);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return data_.size() / dim_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> operator[](std::size_t i) const
    {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    void push_back(std::span<const double> x);
    void append(const PointSet& other);
    void reserve(std::size_t n) { data_.reserve(n * dim_); }
    void clear() { data_.clear(); }

    std::span<const double> flat() const { return data_; }

private:
    std::size_t dim_;
    std::vector<double> data_;
};

/// Univariate marginal: normal(mean, stddev) or lognormal(log-mean, log-stddev),
/// the lognormal being parameterized by its underlying normal.
struct Marginal {
    enum class Family { normal, lognormal };

    Family family = Family::normal;
    double location = 0.0;
    double scale = 1.0;

    static Marginal normal(double mean, double stddev);
    static Marginal lognormal(double log_mean, double log_stddev);

    /// Zero outside the support, never an error.
    double density(double x) const;
    double cdf(double x) const;
    double draw(RngStream& stream) const;
    double mean() const;
    double variance() const;
};

/// Independent product of marginals.
class InputDistribution {
public:
    /// Validates every marginal (positive scale, unit mass on a quadrature grid).
    explicit InputDistribution(std::vector<Marginal> components);

    static InputDistribution standard_normal(std::size_t dim);

    std::size_t dimension() const { return components_.size(); }
    const std::vector<Marginal>& components() const { return components_; }

    double density(std::span<const double> x) const;
    void draw(RngStream& stream, std::span<double> out) const;
    PointSet sample(RngStream& stream, std::size_t count) const;

private:
    std::vector<Marginal> components_;
};

/// Deterministic model from R^d to R.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    virtual std::size_t dimension() const = 0;
    virtual double evaluate(std::span<const double> x) const = 0;

    /// Default loops over evaluate(); external simulators override to batch.
    virtual std::vector<double> evaluate_batch(const PointSet& xs) const;
};

/// Wraps a plain function.
class FunctionEvaluator final : public Evaluator {
public:
    using Fn = double (*)(std::span<const double>);

    FunctionEvaluator(std::size_t dim, Fn fn) : dim_(dim), fn_(fn) {}

    std::size_t dimension() const override { return dim_; }
    double evaluate(std::span<const double> x) const override { return fn_(x); }

private:
    std::size_t dim_;
    Fn fn_;
};

/// c + sum_i a_i x_i, the usual shape of a regression metamodel.
class LinearEvaluator final : public Evaluator {
public:
    LinearEvaluator(double intercept, std::vector<double> coefficients);

    std::size_t dimension() const override { return coefficients_.size(); }
    double evaluate(std::span<const double> x) const override;

private:
    double intercept_;
    std::vector<double> coefficients_;
};

struct CostHint {
    double input_generation = 0.0;  // T_X
    double metamodel_call = 0.0;    // T_fr
};

struct PairValue {
    double z;  // metamodel output
    double y;  // full-model output
};

/*!
 * The expensive model f, its metamodel f_r and the input law, which is what
 * every estimator consumes.
 *
 * metamodel_quantile, when set, gives the exact alpha-quantile of
 * Z = f_r(X); otherwise metamodel quantiles are estimated by Monte Carlo.
 */
class ModelPair {
public:
    ModelPair(std::string name, std::shared_ptr<const Evaluator> full,
              std::shared_ptr<const Evaluator> meta, InputDistribution input,
              std::function<double(double)> metamodel_quantile = {},
              std::optional<CostHint> cost_hint = std::nullopt);

    const std::string& name() const { return name_; }
    std::size_t dimension() const { return input_.dimension(); }
    const Evaluator& full() const { return *full_; }
    const Evaluator& meta() const { return *meta_; }
    std::shared_ptr<const Evaluator> full_shared() const { return full_; }
    std::shared_ptr<const Evaluator> meta_shared() const { return meta_; }
    const InputDistribution& input() const { return input_; }
    const std::optional<CostHint>& cost_hint() const { return cost_hint_; }

    bool has_closed_form_quantile() const { return static_cast<bool>(metamodel_quantile_); }
    double closed_form_quantile(double alpha) const;

private:
    std::string name_;
    std::shared_ptr<const Evaluator> full_;
    std::shared_ptr<const Evaluator> meta_;
    InputDistribution input_;
    std::function<double(double)> metamodel_quantile_;
    std::optional<CostHint> cost_hint_;
};

/// (f_r(x), f(x)). Throws std::invalid_argument on a dimension mismatch.
PairValue evaluate_pair(const ModelPair& pair, std::span<const double> x);

/// Joint density of the input law at x.
double density(const InputDistribution& dist, std::span<const double> x);

/// count i.i.d. draws of the input.
PointSet sample_input(const InputDistribution& dist, RngStream& stream, std::size_t count);

enum class BuiltinModel { toy1d, toy2d, identity1d };

std::optional<BuiltinModel> parse_builtin(std::string_view name);
std::string_view builtin_name(BuiltinModel model);
ModelPair make_builtin(BuiltinModel model);

namespace toy {
double toy1d_full(std::span<const double> x);
double toy1d_meta(std::span<const double> x);
double toy2d_full(std::span<const double> x);
double toy2d_meta(std::span<const double> x);
}  // namespace toy

}  // namespace qvr
