#include "ppcalib/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ppcalib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// exponent * log(gamma), with 0 * log(0) = 0.
double interaction_term(double exponent, double log_gamma) {
  return exponent == 0.0 ? 0.0 : exponent * log_gamma;
}

}  // namespace

double Monomial::operator()(Point u) const {
  double v = 1.0;
  for (int i = 0; i < px; ++i) v *= u.x;
  for (int i = 0; i < py; ++i) v *= u.y;
  return v;
}

std::string Monomial::name() const {
  if (is_constant()) return "1";
  auto factor = [](char var, int p) {
    std::string s(1, var);
    if (p > 1) s += "^" + std::to_string(p);
    return s;
  };
  std::string out;
  if (px > 0) out = factor('x', px);
  if (py > 0) out += (out.empty() ? "" : "*") + factor('y', py);
  return out;
}

Monomial Monomial::parse(std::string_view text) {
  const std::string t = trim(text);
  if (t == "1") return {};
  Monomial m;
  std::size_t pos = 0;
  auto fail = [&]() -> Monomial {
    throw std::invalid_argument("cannot parse basis term '" + t + "'");
  };
  while (pos < t.size()) {
    int* target = nullptr;
    if (t.compare(pos, 2, "u1") == 0) {
      target = &m.px;
      pos += 2;
    } else if (t.compare(pos, 2, "u2") == 0) {
      target = &m.py;
      pos += 2;
    } else if (t[pos] == 'x') {
      target = &m.px;
      ++pos;
    } else if (t[pos] == 'y') {
      target = &m.py;
      ++pos;
    } else {
      return fail();
    }
    int power = 1;
    if (pos < t.size() && t[pos] == '^') {
      ++pos;
      std::size_t used = 0;
      try {
        power = std::stoi(t.substr(pos), &used);
      } catch (const std::exception&) {
        return fail();
      }
      if (power < 1) return fail();
      pos += used;
    }
    *target += power;
    if (pos < t.size()) {
      if (t[pos] != '*') return fail();
      ++pos;
      if (pos == t.size()) return fail();
    }
  }
  return m;
}

std::vector<Monomial> parse_basis(std::string_view comma_separated) {
  std::vector<Monomial> out;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    const auto end = comma_separated.find(',', start);
    const auto piece = comma_separated.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    out.push_back(Monomial::parse(piece));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

LogLinearIntensity::LogLinearIntensity(std::vector<Monomial> basis, std::vector<double> theta)
    : basis_(std::move(basis)), theta_(std::move(theta)) {
  if (basis_.size() != theta_.size()) {
    throw std::invalid_argument("theta has " + std::to_string(theta_.size()) + " entries but basis has " +
                                std::to_string(basis_.size()) + " terms");
  }
  const auto it = std::find_if(basis_.begin(), basis_.end(), [](const Monomial& m) { return m.is_constant(); });
  if (it == basis_.end()) throw std::invalid_argument("basis must include the constant term");
  intercept_ = static_cast<std::size_t>(it - basis_.begin());
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (basis_[i] == basis_[j]) throw std::invalid_argument("duplicate basis term " + basis_[i].name());
    }
    if (std::isnan(theta_[i]) || (i != intercept_ && !std::isfinite(theta_[i])) ||
        (i == intercept_ && theta_[i] == std::numeric_limits<double>::infinity())) {
      throw std::invalid_argument("theta[" + std::to_string(i) + "] is not a valid coefficient");
    }
  }
}

LogLinearIntensity LogLinearIntensity::constant(double value) {
  if (value < 0.0) throw std::invalid_argument("intensity must be nonnegative");
  return LogLinearIntensity({Monomial{}}, {value == 0.0 ? kNegInf : std::log(value)});
}

double LogLinearIntensity::log_value(Point u) const {
  const double c = theta_[intercept_];
  if (c == kNegInf) return kNegInf;
  double eta = 0.0;
  for (std::size_t i = 0; i < basis_.size(); ++i) eta += theta_[i] * basis_[i](u);
  return eta;
}

double LogLinearIntensity::operator()(Point u) const { return std::exp(log_value(u)); }

Family family_of(const ModelSpec& model) {
  return std::visit(Overloaded{[](const PoissonModel&) { return Family::poisson; },
                               [](const StraussModel&) { return Family::strauss; },
                               [](const GeyerModel&) { return Family::geyer; }},
                    model);
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::poisson:
      return "poisson";
    case Family::strauss:
      return "strauss";
    case Family::geyer:
      return "geyer";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "poisson") return Family::poisson;
  if (name == "strauss") return Family::strauss;
  if (name == "geyer") return Family::geyer;
  throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
}

bool is_gibbs(const ModelSpec& model) { return family_of(model) != Family::poisson; }

void validate(const ModelSpec& model) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  std::visit(Overloaded{[](const PoissonModel&) {},
                        [&](const StraussModel& m) {
                          require(m.gamma >= 0.0 && m.gamma <= 1.0, "gamma: Strauss interaction must lie in [0, 1]");
                          require(m.r > 0.0 && std::isfinite(m.r), "r: interaction radius must be positive");
                        },
                        [&](const GeyerModel& m) {
                          require(m.beta > 0.0 && std::isfinite(m.beta), "beta: activity must be positive");
                          require(m.gamma > 0.0 && std::isfinite(m.gamma), "gamma: Geyer interaction must be positive");
                          require(m.r > 0.0 && std::isfinite(m.r), "r: interaction radius must be positive");
                          require(m.alpha >= 0.0 && std::isfinite(m.alpha), "alpha: saturation must be nonnegative");
                        }},
             model);
}

double intensity_at(const ModelSpec& model, Point u) {
  const auto* p = std::get_if<PoissonModel>(&model);
  if (p == nullptr) throw std::invalid_argument("intensity_at requires a Poisson model");
  return p->intensity(u);
}

double activity_at(const ModelSpec& model, Point u) {
  return std::visit(Overloaded{[&](const PoissonModel& m) { return m.intensity(u); },
                               [&](const StraussModel& m) { return m.activity(u); },
                               [](const GeyerModel& m) { return m.beta; }},
                    model);
}

GaussLegendre::GaussLegendre(std::size_t n) : nodes_(n), weights_(n) {
  if (n == 0) throw std::invalid_argument("Gauss-Legendre rule needs at least one node");
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const auto kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      dp = nd * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes_[i] = x;
    weights_[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

namespace {

const GaussLegendre& cached_rule(std::size_t n) {
  static const GaussLegendre rule16(16);
  if (n == 16) return rule16;
  thread_local std::vector<std::pair<std::size_t, GaussLegendre>> cache;
  for (const auto& [k, r] : cache) {
    if (k == n) return r;
  }
  cache.emplace_back(n, GaussLegendre(n));
  return cache.back().second;
}

}  // namespace

double integrate_intensity(const LogLinearIntensity& intensity, const Window& region, QuadratureOptions opt) {
  if (intensity.theta()[intensity.intercept_index()] == kNegInf) return 0.0;
  if (intensity.is_constant()) return std::exp(intensity.theta()[0]) * region.area();
  return cached_rule(opt.nodes).integrate(region, [&](Point u) { return intensity(u); }, opt.panels);
}

double integrate_intensity(const ModelSpec& model, const Window& region, QuadratureOptions opt) {
  const auto* p = std::get_if<PoissonModel>(&model);
  if (p == nullptr) throw std::invalid_argument("integrate_intensity requires a Poisson model");
  return integrate_intensity(p->intensity, region, opt);
}

double log_density(const ModelSpec& model, const PointPattern& pattern, QuadratureOptions opt) {
  return std::visit(
      Overloaded{
          [&](const PoissonModel& m) {
            double v = pattern.window().area() - integrate_intensity(m.intensity, pattern.window(), opt);
            for (const auto& p : pattern.points()) v += m.intensity.log_value(p);
            return v;
          },
          [&](const StraussModel& m) {
            double v = interaction_term(static_cast<double>(pair_count(pattern, m.r)), std::log(m.gamma));
            for (const auto& p : pattern.points()) v += m.activity.log_value(p);
            return v;
          },
          [&](const GeyerModel& m) {
            return static_cast<double>(pattern.size()) * std::log(m.beta) +
                   interaction_term(saturation_statistic(pattern, m.r, m.alpha), std::log(m.gamma));
          }},
      model);
}

double interaction_exponent(const ModelSpec& model, Point u, const PointPattern& pattern) {
  return std::visit(
      Overloaded{[](const PoissonModel&) { return 0.0; },
                 [&](const StraussModel& m) {
                   const NeighborIndex index(pattern.window(), pattern.points(), m.r);
                   return static_cast<double>(index.count_within(u));
                 },
                 [&](const GeyerModel& m) {
                   return saturation_statistic(pattern.with_point(u), m.r, m.alpha) -
                          saturation_statistic(pattern, m.r, m.alpha);
                 }},
      model);
}

double log_papangelou(const ModelSpec& model, Point u, const PointPattern& pattern) {
  const auto pts = pattern.points();
  const auto it = std::find(pts.begin(), pts.end(), u);
  if (it != pts.end()) {
    return log_papangelou(model, u, pattern.without_point(static_cast<std::size_t>(it - pts.begin())));
  }
  const double e = interaction_exponent(model, u, pattern);
  return std::visit(Overloaded{[&](const PoissonModel& m) { return m.intensity.log_value(u); },
                               [&](const StraussModel& m) {
                                 return m.activity.log_value(u) + interaction_term(e, std::log(m.gamma));
                               },
                               [&](const GeyerModel& m) {
                                 return std::log(m.beta) + interaction_term(e, std::log(m.gamma));
                               }},
                    model);
}

double papangelou(const ModelSpec& model, Point u, const PointPattern& pattern) {
  return std::exp(log_papangelou(model, u, pattern));
}

namespace {

double model_radius(const ModelSpec& model, const Window& w) {
  return std::visit(Overloaded{[&](const PoissonModel&) { return std::max(w.width(), w.height()); },
                               [](const StraussModel& m) { return m.r; },
                               [](const GeyerModel& m) { return m.r; }},
                    model);
}

}  // namespace

GibbsState::GibbsState(ModelSpec model, Window window, std::span<const Point> initial)
    : model_(std::move(model)),
      window_(window),
      index_(window, model_radius(model_, window)),
      radius_(model_radius(model_, window)),
      alpha_(0.0),
      geyer_(family_of(model_) == Family::geyer) {
  validate(model_);
  if (auto* p = std::get_if<PoissonModel>(&model_)) {
    trend_ = &p->intensity;
  } else if (auto* st = std::get_if<StraussModel>(&model_)) {
    trend_ = &st->activity;
    log_gamma_ = std::log(st->gamma);
    interacting_ = true;
  } else {
    const auto& g = std::get<GeyerModel>(model_);
    log_beta_ = std::log(g.beta);
    log_gamma_ = std::log(g.gamma);
    alpha_ = g.alpha;
    interacting_ = true;
  }
  points_.reserve(initial.size());
  for (const auto& p : initial) add(p);
}

double GibbsState::birth_exponent(Point u) const {
  if (!interacting_) return 0.0;
  if (!geyer_) {
    double t = 0.0;
    index_.for_each_within(u, points_, [&](std::uint32_t) { t += 1.0; });
    return t;
  }
  // s(phi + u) - s(phi): u's own capped count plus the change in each
  // neighbour's capped count.
  double own = 0.0;
  double delta = 0.0;
  index_.for_each_within(u, points_, [&](std::uint32_t j) {
    own += 1.0;
    const double c = nbr_count_[j];
    delta += std::min(alpha_, c + 1.0) - std::min(alpha_, c);
  });
  return std::min(alpha_, own) + delta;
}

double GibbsState::death_exponent(std::size_t i) const {
  if (!interacting_) return 0.0;
  const Point u = points_[i];
  if (!geyer_) {
    double t = 0.0;
    index_.for_each_within(u, points_, [&](std::uint32_t j) {
      if (j != i) t += 1.0;
    });
    return t;
  }
  double delta = 0.0;
  index_.for_each_within(u, points_, [&](std::uint32_t j) {
    if (j == i) return;
    const double c = nbr_count_[j];
    delta += std::min(alpha_, c) - std::min(alpha_, c - 1.0);
  });
  return std::min(alpha_, static_cast<double>(nbr_count_[i])) + delta;
}

double GibbsState::log_birth_intensity(Point u) const {
  return log_activity(u) + interaction_term(birth_exponent(u), log_gamma_);
}

double GibbsState::log_death_intensity(std::size_t i) const {
  return log_activity(points_[i]) + interaction_term(death_exponent(i), log_gamma_);
}

void GibbsState::add(Point u) {
  if (!window_.contains(u)) throw std::invalid_argument("point outside window");
  const auto id = static_cast<std::uint32_t>(points_.size());
  if (geyer_) {
    std::uint32_t own = 0;
    index_.for_each_within(u, points_, [&](std::uint32_t j) {
      ++own;
      ++nbr_count_[j];
    });
    nbr_count_.push_back(own);
  }
  points_.push_back(u);
  index_.insert(id, u);
}

void GibbsState::remove(std::size_t i) {
  if (i >= points_.size()) throw std::out_of_range("point index out of range");
  const Point u = points_[i];
  const auto id = static_cast<std::uint32_t>(i);
  index_.erase(id, u);
  if (geyer_) {
    index_.for_each_within(u, points_, [&](std::uint32_t j) { --nbr_count_[j]; });
  }
  const auto last = static_cast<std::uint32_t>(points_.size() - 1);
  if (id != last) {
    index_.relabel(last, id, points_[last]);
    points_[i] = points_[last];
    if (geyer_) nbr_count_[i] = nbr_count_[last];
  }
  points_.pop_back();
  if (geyer_) nbr_count_.pop_back();
}

}  // namespace ppcalib
