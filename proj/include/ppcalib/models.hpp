#ifndef PPCALIB_MODELS_HPP
#define PPCALIB_MODELS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ppcalib/core.hpp"

namespace ppcalib {

/// Monomial x^px * y^py in the window coordinates.
struct Monomial {
  int px = 0;
  int py = 0;

  double operator()(Point u) const;
  bool is_constant() const { return px == 0 && py == 0; }
  /// "1", "x", "y", "x^2", "x*y", "x^2*y", ...
  std::string name() const;
  /// Accepts the names produced by name() plus u1/u2 as aliases for x/y.
  static Monomial parse(std::string_view text);

  friend bool operator==(const Monomial&, const Monomial&) = default;
};

std::vector<Monomial> parse_basis(std::string_view comma_separated);

/// lambda(u) = exp(theta . B(u)). The basis must contain the constant term.
/// An intercept of -infinity encodes the identically-zero intensity.
class LogLinearIntensity {
 public:
  LogLinearIntensity(std::vector<Monomial> basis, std::vector<double> theta);

  static LogLinearIntensity constant(double value);

  const std::vector<Monomial>& basis() const { return basis_; }
  const std::vector<double>& theta() const { return theta_; }
  std::size_t intercept_index() const { return intercept_; }
  bool is_constant() const { return basis_.size() == 1; }

  double log_value(Point u) const;
  double operator()(Point u) const;

  friend bool operator==(const LogLinearIntensity&, const LogLinearIntensity&) = default;

 private:
  std::vector<Monomial> basis_;
  std::vector<double> theta_;
  std::size_t intercept_ = 0;
};

struct PoissonModel {
  LogLinearIntensity intensity;
  friend bool operator==(const PoissonModel&, const PoissonModel&) = default;
};

/// Strauss process: density proportional to gamma^{pairs within r} * prod b(x_i).
struct StraussModel {
  LogLinearIntensity activity;
  double gamma = 1.0;
  double r = 0.0;
  friend bool operator==(const StraussModel&, const StraussModel&) = default;
};

/// Geyer saturation process: density proportional to beta^n * gamma^{s(phi)}
/// where s sums per-point neighbour counts capped at alpha.
struct GeyerModel {
  double beta = 1.0;
  double gamma = 1.0;
  double r = 0.0;
  double alpha = 0.0;
  friend bool operator==(const GeyerModel&, const GeyerModel&) = default;
};

using ModelSpec = std::variant<PoissonModel, StraussModel, GeyerModel>;

enum class Family { poisson, strauss, geyer };

Family family_of(const ModelSpec& model);
std::string_view family_name(Family f);
Family parse_family(std::string_view name);
bool is_gibbs(const ModelSpec& model);

/// Throws std::invalid_argument naming the offending parameter.
void validate(const ModelSpec& model);

/// Poisson intensity lambda(u). Throws for Gibbs models.
double intensity_at(const ModelSpec& model, Point u);
/// First-order (trend) term: Poisson intensity, Strauss activity b(u), Geyer beta.
double activity_at(const ModelSpec& model, Point u);

/// Tensor-product Gauss-Legendre rule on [-1, 1].
class GaussLegendre {
 public:
  explicit GaussLegendre(std::size_t n);

  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  /// Integral of f over the rectangle, using n x n nodes on each of
  /// panels x panels sub-rectangles.
  template <class Fn>
  double integrate(const Window& region, Fn&& f, std::size_t panels = 1) const {
    const double pw = region.width() / static_cast<double>(panels);
    const double ph = region.height() / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t py = 0; py < panels; ++py) {
      const double yc = region.y_min() + (static_cast<double>(py) + 0.5) * ph;
      for (std::size_t px = 0; px < panels; ++px) {
        const double xc = region.x_min() + (static_cast<double>(px) + 0.5) * pw;
        double panel = 0.0;
        for (std::size_t j = 0; j < nodes_.size(); ++j) {
          const double y = yc + 0.5 * ph * nodes_[j];
          double row = 0.0;
          for (std::size_t i = 0; i < nodes_.size(); ++i) {
            row += weights_[i] * f(Point{xc + 0.5 * pw * nodes_[i], y});
          }
          panel += weights_[j] * row;
        }
        total += panel * 0.25 * pw * ph;
      }
    }
    return total;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

struct QuadratureOptions {
  std::size_t nodes = 16;
  std::size_t panels = 1;
};

/// Lambda(region) = integral of the Poisson intensity over the region.
double integrate_intensity(const ModelSpec& model, const Window& region, QuadratureOptions opt = {});
double integrate_intensity(const LogLinearIntensity& intensity, const Window& region,
                           QuadratureOptions opt = {});

/// Log density with respect to the unit-rate Poisson process. Exact for
/// Poisson models; for Gibbs models the normalising constant is omitted, so
/// values are comparable only for a fixed parameter. Returns -infinity for
/// configurations of zero density.
double log_density(const ModelSpec& model, const PointPattern& pattern,
                   QuadratureOptions opt = {});

/// Exponent e such that the conditional intensity equals activity(u) * gamma^e.
/// Strauss: number of points of phi within r of u. Geyer: s(phi + u) - s(phi).
/// Points of phi coinciding with u count as neighbours. Zero for Poisson.
double interaction_exponent(const ModelSpec& model, Point u, const PointPattern& pattern);

/// Papangelou conditional intensity lambda(u; phi). If u is a point of phi it
/// is removed first.
double papangelou(const ModelSpec& model, Point u, const PointPattern& pattern);
double log_papangelou(const ModelSpec& model, Point u, const PointPattern& pattern);

/// Mutable configuration with incremental conditional intensities, used by the
/// MCMC sampler and the pseudolikelihood fit. Keeps a bucket index and, for
/// Geyer models, per-point neighbour counts.
class GibbsState {
 public:
  GibbsState(ModelSpec model, Window window, std::span<const Point> initial = {});
  GibbsState(const GibbsState&) = delete;
  GibbsState& operator=(const GibbsState&) = delete;

  std::size_t size() const { return points_.size(); }
  std::span<const Point> points() const { return points_; }
  const Window& window() const { return window_; }
  const ModelSpec& model() const { return model_; }
  PointPattern pattern() const { return PointPattern(window_, points_); }

  /// Interaction exponent for adding u to the current configuration.
  double birth_exponent(Point u) const;
  /// Interaction exponent of point i relative to the rest of the configuration.
  double death_exponent(std::size_t i) const;
  /// log lambda(u; phi).
  double log_birth_intensity(Point u) const;
  /// log lambda(x_i; phi \ x_i).
  double log_death_intensity(std::size_t i) const;

  void add(Point u);
  /// Removes point i; the last point takes its slot.
  void remove(std::size_t i);

 private:
  double log_activity(Point u) const {
    return trend_ != nullptr ? trend_->log_value(u) : log_beta_;
  }

  ModelSpec model_;
  Window window_;
  std::vector<Point> points_;
  BucketGrid index_;
  std::vector<std::uint32_t> nbr_count_;  // Geyer only
  const LogLinearIntensity* trend_ = nullptr;  // points into model_
  double log_beta_ = 0.0;
  double log_gamma_ = 0.0;
  bool interacting_ = false;
  double radius_;
  double alpha_;
  bool geyer_;
};

}  // namespace ppcalib

#endif  // PPCALIB_MODELS_HPP
