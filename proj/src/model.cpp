#include "qvr/model.hpp"

#include "qvr/normal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qvr {

PointSet::PointSet(std::size_t dim) : dim_(dim)
{
    if (dim_ == 0) throw std::invalid_argument("PointSet: dimension must be positive");
}

void PointSet::push_back(std::span<const double> x)
{
    if (x.size() != dim_) throw std::invalid_argument("PointSet::push_back: dimension mismatch");
    data_.insert(data_.end(), x.begin(), x.end());
}

void PointSet::append(const PointSet& other)
{
    if (other.dim_ != dim_) throw std::invalid_argument("PointSet::append: dimension mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

Marginal Marginal::normal(double mean, double stddev)
{
    return {Family::normal, mean, stddev};
}

Marginal Marginal::lognormal(double log_mean, double log_stddev)
{
    return {Family::lognormal, log_mean, log_stddev};
}

double Marginal::density(double x) const
{
    if (family == Family::normal) {
        return normal::pdf((x - location) / scale) / scale;
    }
    if (!(x > 0.0)) return 0.0;
    return normal::pdf((std::log(x) - location) / scale) / (scale * x);
}

double Marginal::cdf(double x) const
{
    if (family == Family::normal) return normal::cdf((x - location) / scale);
    if (!(x > 0.0)) return 0.0;
    return normal::cdf((std::log(x) - location) / scale);
}

double Marginal::draw(RngStream& stream) const
{
    const double g = location + scale * stream.normal();
    return family == Family::normal ? g : std::exp(g);
}

double Marginal::mean() const
{
    return family == Family::normal ? location : std::exp(location + 0.5 * scale * scale);
}

double Marginal::variance() const
{
    if (family == Family::normal) return scale * scale;
    const double s2 = scale * scale;
    return std::expm1(s2) * std::exp(2.0 * location + s2);
}

namespace {

// Composite Simpson over +-12 scale units of the underlying normal; for the
// lognormal the integral is taken in log space (dx = x du).
double marginal_mass(const Marginal& m)
{
    constexpr int kIntervals = 4000;
    const double lo = m.location - 12.0 * m.scale;
    const double hi = m.location + 12.0 * m.scale;
    const double h = (hi - lo) / kIntervals;
    auto integrand = [&](double u) {
        if (m.family == Marginal::Family::normal) return m.density(u);
        const double x = std::exp(u);
        return m.density(x) * x;
    };
    double sum = integrand(lo) + integrand(hi);
    for (int i = 1; i < kIntervals; ++i) {
        sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(lo + i * h);
    }
    return sum * h / 3.0;
}

}  // namespace

InputDistribution::InputDistribution(std::vector<Marginal> components)
    : components_(std::move(components))
{
    if (components_.empty()) {
        throw std::invalid_argument("InputDistribution: at least one component is required");
    }
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& m = components_[i];
        if (!(m.scale > 0.0) || !std::isfinite(m.scale) || !std::isfinite(m.location)) {
            throw std::invalid_argument("InputDistribution: component " + std::to_string(i) +
                                        " needs a finite location and a positive scale");
        }
        if (std::fabs(marginal_mass(m) - 1.0) > 1e-6) {
            throw std::invalid_argument("InputDistribution: component " + std::to_string(i) +
                                        " density does not integrate to one");
        }
    }
}

InputDistribution InputDistribution::standard_normal(std::size_t dim)
{
    return InputDistribution(std::vector<Marginal>(dim, Marginal::normal(0.0, 1.0)));
}

double InputDistribution::density(std::span<const double> x) const
{
    if (x.size() != components_.size()) {
        throw std::invalid_argument("InputDistribution::density: dimension mismatch");
    }
    double p = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) p *= components_[i].density(x[i]);
    return p;
}

void InputDistribution::draw(RngStream& stream, std::span<double> out) const
{
    for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].draw(stream);
}

PointSet InputDistribution::sample(RngStream& stream, std::size_t count) const
{
    PointSet points(dimension());
    points.reserve(count);
    std::vector<double> x(dimension());
    for (std::size_t k = 0; k < count; ++k) {
        draw(stream, x);
        points.push_back(x);
    }
    return points;
}

std::vector<double> Evaluator::evaluate_batch(const PointSet& xs) const
{
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = evaluate(xs[i]);
    return out;
}

LinearEvaluator::LinearEvaluator(double intercept, std::vector<double> coefficients)
    : intercept_(intercept), coefficients_(std::move(coefficients))
{
    if (coefficients_.empty()) {
        throw std::invalid_argument("LinearEvaluator: at least one coefficient is required");
    }
}

double LinearEvaluator::evaluate(std::span<const double> x) const
{
    double v = intercept_;
    for (std::size_t i = 0; i < coefficients_.size(); ++i) v += coefficients_[i] * x[i];
    return v;
}

ModelPair::ModelPair(std::string name, std::shared_ptr<const Evaluator> full,
                     std::shared_ptr<const Evaluator> meta, InputDistribution input,
                     std::function<double(double)> metamodel_quantile,
                     std::optional<CostHint> cost_hint)
    : name_(std::move(name)),
      full_(std::move(full)),
      meta_(std::move(meta)),
      input_(std::move(input)),
      metamodel_quantile_(std::move(metamodel_quantile)),
      cost_hint_(cost_hint)
{
    if (!full_ || !meta_) throw std::invalid_argument("ModelPair: both evaluators are required");
    if (full_->dimension() != input_.dimension() || meta_->dimension() != input_.dimension()) {
        throw std::invalid_argument("ModelPair: evaluator and input dimensions differ");
    }
}

double ModelPair::closed_form_quantile(double alpha) const
{
    if (!metamodel_quantile_) {
        throw std::invalid_argument("model '" + name_ + "' has no closed-form metamodel quantile");
    }
    return metamodel_quantile_(alpha);
}

PairValue evaluate_pair(const ModelPair& pair, std::span<const double> x)
{
    if (x.size() != pair.dimension()) {
        throw std::invalid_argument("evaluate_pair: expected a point of dimension " +
                                    std::to_string(pair.dimension()));
    }
    return {pair.meta().evaluate(x), pair.full().evaluate(x)};
}

double density(const InputDistribution& dist, std::span<const double> x)
{
    return dist.density(x);
}

PointSet sample_input(const InputDistribution& dist, RngStream& stream, std::size_t count)
{
    return dist.sample(stream, count);
}

namespace toy {

namespace {
inline double wiggle1d(double x) { return 1.0 + 0.5 * std::cos(10.0 * x) + 0.5 * std::cos(20.0 * x); }
}  // namespace

double toy1d_full(std::span<const double> x) { return 0.95 * x[0] * x[0] * wiggle1d(x[0]); }

double toy1d_meta(std::span<const double> x) { return x[0] * x[0]; }

double toy2d_full(std::span<const double> x)
{
    const double a = x[0];
    const double b = x[1];
    return 0.95 * std::fabs(a) * a * wiggle1d(a) +
           0.7 * b * (1.0 + 0.4 * std::cos(b) + 0.3 * std::cos(14.0 * b));
}

double toy2d_meta(std::span<const double> x) { return std::fabs(x[0]) * x[0] + x[1]; }

}  // namespace toy

namespace {
double identity(std::span<const double> x) { return x[0]; }
}  // namespace

std::optional<BuiltinModel> parse_builtin(std::string_view name)
{
    if (name == "toy1d") return BuiltinModel::toy1d;
    if (name == "toy2d") return BuiltinModel::toy2d;
    if (name == "identity1d") return BuiltinModel::identity1d;
    return std::nullopt;
}

std::string_view builtin_name(BuiltinModel model)
{
    switch (model) {
    case BuiltinModel::toy1d: return "toy1d";
    case BuiltinModel::toy2d: return "toy2d";
    case BuiltinModel::identity1d: return "identity1d";
    }
    return "unknown";
}

ModelPair make_builtin(BuiltinModel model)
{
    switch (model) {
    case BuiltinModel::toy1d:
        // Z = X^2 with X ~ N(0,1): P(Z <= z) = 2 Phi(sqrt z) - 1.
        return ModelPair("toy1d", std::make_shared<FunctionEvaluator>(1, &toy::toy1d_full),
                         std::make_shared<FunctionEvaluator>(1, &toy::toy1d_meta),
                         InputDistribution::standard_normal(1), [](double alpha) {
                             const double r = normal::quantile(0.5 * (1.0 + alpha));
                             return r * r;
                         });
    case BuiltinModel::toy2d:
        return ModelPair("toy2d", std::make_shared<FunctionEvaluator>(2, &toy::toy2d_full),
                         std::make_shared<FunctionEvaluator>(2, &toy::toy2d_meta),
                         InputDistribution::standard_normal(2));
    case BuiltinModel::identity1d: {
        auto id = std::make_shared<FunctionEvaluator>(1, &identity);
        return ModelPair("identity1d", id, id, InputDistribution::standard_normal(1),
                         [](double alpha) { return normal::quantile(alpha); });
    }
    }
    throw std::invalid_argument("unknown builtin model");
}

}  // namespace qvr
