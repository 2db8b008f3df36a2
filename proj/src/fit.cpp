#include "ppcalib/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <stdexcept>

namespace ppcalib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Objective of the form  L(eta) = eta . s - sum_q w_q exp(x_q . eta),
// shared by the Poisson likelihood and both pseudolikelihoods once the
// interaction exponents have been tabulated.
struct LogLinearProblem {
  Eigen::VectorXd data_sum;   // s
  Eigen::MatrixXd nodes;      // rows x_q
  Eigen::VectorXd weights;    // w_q
  // Index of a coordinate constrained to be <= 0, or -1.
  Eigen::Index upper_bounded = -1;

  double value(const Eigen::VectorXd& eta) const {
    const Eigen::VectorXd lin = nodes * eta;
    return data_sum.dot(eta) - weights.dot(lin.array().exp().matrix());
  }

  void derivatives(const Eigen::VectorXd& eta, Eigen::VectorXd& grad, Eigen::MatrixXd& neg_hess) const {
    const Eigen::VectorXd mass = (weights.array() * (nodes * eta).array().exp()).matrix();
    grad = data_sum - nodes.transpose() * mass;
    neg_hess = nodes.transpose() * mass.asDiagonal() * nodes;
  }
};

struct NewtonOutcome {
  Eigen::VectorXd eta;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

double projected_norm(const LogLinearProblem& pb, const Eigen::VectorXd& eta, const Eigen::VectorXd& grad) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const bool pinned = i == pb.upper_bounded && eta[i] >= 0.0 && grad[i] > 0.0;
    if (!pinned) norm = std::max(norm, std::abs(grad[i]));
  }
  return norm;
}

// Damped projected Newton; concavity of the objective makes this reliable.
NewtonOutcome maximize(const LogLinearProblem& pb, Eigen::VectorXd eta, int max_iterations, double tolerance) {
  NewtonOutcome out;
  Eigen::VectorXd grad;
  Eigen::MatrixXd neg_hess;
  double current = pb.value(eta);
  for (int it = 0; it < max_iterations; ++it) {
    pb.derivatives(eta, grad, neg_hess);
    out.gradient_norm = projected_norm(pb, eta, grad);
    out.iterations = it;
    if (out.gradient_norm < tolerance) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd step = Eigen::VectorXd::Zero(eta.size());
    const Eigen::Index b = pb.upper_bounded;
    if (b >= 0 && eta[b] >= 0.0 && grad[b] > 0.0) {
      // Bound active: Newton step in the free coordinates only.
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if (i != b) free.push_back(i);
      }
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd h(nf, nf);
      Eigen::VectorXd g(nf);
      for (Eigen::Index i = 0; i < nf; ++i) {
        g[i] = grad[free[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < nf; ++j) {
          h(i, j) = neg_hess(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
        }
      }
      const Eigen::VectorXd d = h.ldlt().solve(g);
      for (Eigen::Index i = 0; i < nf; ++i) step[free[static_cast<std::size_t>(i)]] = d[i];
    } else {
      step = neg_hess.ldlt().solve(grad);
    }
    if (!step.allFinite()) step = grad;
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      Eigen::VectorXd trial = eta + t * step;
      if (b >= 0) trial[b] = std::min(trial[b], 0.0);
      const double v = pb.value(trial);
      if (std::isfinite(v) && v >= current - 1e-12 * std::max(1.0, std::abs(current))) {
        moved = v > current || (trial - eta).lpNorm<Eigen::Infinity>() > 0.0;
        eta = std::move(trial);
        current = v;
        break;
      }
    }
    if (!moved || eta.lpNorm<Eigen::Infinity>() > 1e6) {
      pb.derivatives(eta, grad, neg_hess);
      out.gradient_norm = projected_norm(pb, eta, grad);
      out.iterations = it + 1;
      out.converged = out.gradient_norm < tolerance;
      break;
    }
    out.iterations = it + 1;
  }
  if (!out.converged) {
    pb.derivatives(eta, grad, neg_hess);
    out.gradient_norm = projected_norm(pb, eta, grad);
    out.converged = out.gradient_norm < tolerance;
  }
  out.value = current;
  out.eta = std::move(eta);
  return out;
}

// Gauss-Legendre nodes and weights over the window as (point, weight) pairs.
void window_quadrature(const Window& w, QuadratureOptions q, std::vector<Point>& pts, std::vector<double>& wts) {
  const GaussLegendre rule(q.nodes);
  const auto panels = q.panels;
  const double pw = w.width() / static_cast<double>(panels);
  const double ph = w.height() / static_cast<double>(panels);
  for (std::size_t py = 0; py < panels; ++py) {
    const double yc = w.y_min() + (static_cast<double>(py) + 0.5) * ph;
    for (std::size_t px = 0; px < panels; ++px) {
      const double xc = w.x_min() + (static_cast<double>(px) + 0.5) * pw;
      for (std::size_t j = 0; j < q.nodes; ++j) {
        for (std::size_t i = 0; i < q.nodes; ++i) {
          pts.push_back({xc + 0.5 * pw * rule.nodes()[i], yc + 0.5 * ph * rule.nodes()[j]});
          wts.push_back(rule.weights()[i] * rule.weights()[j] * 0.25 * pw * ph);
        }
      }
    }
  }
}

// Collects midpoint leaves of one cell. `cand` holds data points whose disc
// boundary may cross the cell; points wholly inside or outside stay so in
// every subcell and are dropped.
void refine_cell(double x0, double x1, double y0, double y1, std::span<const Point> data, double r2,
                 std::vector<std::uint32_t> cand, int depth, std::vector<QuadratureNode>& out) {
  std::erase_if(cand, [&](std::uint32_t id) {
    const Point p = data[id];
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    if (dx * dx + dy * dy > r2) return true;
    const double fx = std::max(p.x - x0, x1 - p.x);
    const double fy = std::max(p.y - y0, y1 - p.y);
    return fx * fx + fy * fy <= r2;
  });
  if (cand.empty() || depth <= 0) {
    out.push_back({{0.5 * (x0 + x1), 0.5 * (y0 + y1)}, (x1 - x0) * (y1 - y0)});
    return;
  }
  const double xm = 0.5 * (x0 + x1);
  const double ym = 0.5 * (y0 + y1);
  refine_cell(x0, xm, y0, ym, data, r2, cand, depth - 1, out);
  refine_cell(xm, x1, y0, ym, data, r2, cand, depth - 1, out);
  refine_cell(x0, xm, ym, y1, data, r2, cand, depth - 1, out);
  refine_cell(xm, x1, ym, y1, data, r2, std::move(cand), depth - 1, out);
}

double interaction_radius(const ModelSpec& model) {
  return std::visit(
      [](const auto& m) -> double {
        if constexpr (requires { m.r; }) {
          return m.r;
        } else {
          return 0.0;
        }
      },
      model);
}

Eigen::VectorXd basis_row(const std::vector<Monomial>& basis, Point u) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) row[static_cast<Eigen::Index>(k)] = basis[k](u);
  return row;
}

std::vector<double> to_std(const Eigen::VectorXd& v, Eigen::Index count) {
  return std::vector<double>(v.data(), v.data() + count);
}

}  // namespace

double poisson_log_likelihood(const LogLinearIntensity& intensity, const PointPattern& pattern,
                              QuadratureOptions quadrature) {
  double v = -integrate_intensity(intensity, pattern.window(), quadrature);
  for (const auto& p : pattern.points()) v += intensity.log_value(p);
  return v;
}

FitResult fit_poisson(const PointPattern& pattern, const std::vector<Monomial>& basis, const FitOptions& opt) {
  // Validates the basis (intercept present, no duplicates).
  LogLinearIntensity start(basis, std::vector<double>(basis.size(), 0.0));
  const Window& w = pattern.window();
  const auto p = static_cast<Eigen::Index>(basis.size());
  if (pattern.empty()) {
    std::vector<double> theta(basis.size(), 0.0);
    theta[start.intercept_index()] = kNegInf;
    return {PoissonModel{LogLinearIntensity(basis, std::move(theta))}, 0.0, false, 0, 0.0,
            "empty pattern: maximum likelihood intensity is identically zero"};
  }
  const double n = static_cast<double>(pattern.size());
  if (start.is_constant()) {
    // Closed form; reported for consistency with the general path.
    const auto model = LogLinearIntensity({Monomial{}}, {std::log(n / w.area())});
    return {PoissonModel{model}, poisson_log_likelihood(model, pattern, opt.quadrature), true, 0, 0.0, ""};
  }

  LogLinearProblem pb;
  pb.data_sum = Eigen::VectorXd::Zero(p);
  for (const auto& pt : pattern.points()) pb.data_sum += basis_row(basis, pt);
  std::vector<Point> qp;
  std::vector<double> qw;
  window_quadrature(w, opt.quadrature, qp, qw);
  pb.nodes.resize(static_cast<Eigen::Index>(qp.size()), p);
  pb.weights.resize(static_cast<Eigen::Index>(qp.size()));
  for (std::size_t q = 0; q < qp.size(); ++q) {
    pb.nodes.row(static_cast<Eigen::Index>(q)) = basis_row(basis, qp[q]).transpose();
    pb.weights[static_cast<Eigen::Index>(q)] = qw[q];
  }
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(p);
  eta[static_cast<Eigen::Index>(start.intercept_index())] = std::log(n / w.area());
  const auto res = maximize(pb, eta, opt.max_iterations, opt.tolerance);
  FitResult out{PoissonModel{LogLinearIntensity(basis, to_std(res.eta, p))}, res.value, res.converged,
                res.iterations, res.gradient_norm, ""};
  if (!res.converged) out.message = "Newton iterations did not converge (possible separation)";
  return out;
}

FitResult fit_gibbs_mple(const PointPattern& pattern, Family family, GibbsFixed fixed,
                         const std::vector<Monomial>& basis, const MpleOptions& opt) {
  if (family == Family::poisson) throw std::invalid_argument("fit_gibbs_mple needs a Gibbs family");
  if (!(fixed.r > 0.0)) throw std::invalid_argument("r: interaction radius must be positive");
  const LogLinearIntensity start(basis, std::vector<double>(basis.size(), 0.0));
  if (family == Family::geyer && !start.is_constant()) {
    throw std::invalid_argument("basis: the Geyer model has a constant activity; use basis {1}");
  }
  const Window& w = pattern.window();
  const double n = static_cast<double>(pattern.size());
  const auto p = static_cast<Eigen::Index>(basis.size());

  auto make_model = [&](const Eigen::VectorXd& eta, double log_gamma) -> ModelSpec {
    if (family == Family::geyer) return GeyerModel{std::exp(eta[0]), std::exp(log_gamma), fixed.r, fixed.alpha};
    return StraussModel{LogLinearIntensity(basis, to_std(eta, p)), std::exp(log_gamma), fixed.r};
  };

  if (pattern.size() < 2) {
    // Interaction is unidentifiable; fit the activity alone with gamma = 1.
    const auto poisson = fit_poisson(pattern, basis);
    const auto& theta = std::get<PoissonModel>(poisson.model).intensity.theta();
    Eigen::VectorXd eta = Eigen::Map<const Eigen::VectorXd>(theta.data(), p);
    FitResult out{family == Family::geyer ? ModelSpec(GeyerModel{std::exp(eta[0]), 1.0, fixed.r, fixed.alpha})
                                          : ModelSpec(StraussModel{LogLinearIntensity(basis, theta), 1.0, fixed.r}),
                  0.0, false, poisson.n_iterations, poisson.gradient_norm,
                  "fewer than two points: interaction not identifiable, gamma fixed at 1"};
    if (!pattern.empty()) out.log_objective = log_pseudolikelihood(out.model, pattern, opt.grid, opt.refine_depth);
    return out;
  }

  // Exponents depend only on r (and alpha), not on the fitted parameters.
  const ModelSpec shape = family == Family::geyer ? ModelSpec(GeyerModel{1.0, 1.0, fixed.r, fixed.alpha})
                                                  : ModelSpec(StraussModel{LogLinearIntensity::constant(1.0), 1.0, fixed.r});
  validate(shape);
  const GibbsState state(shape, w, pattern.points());

  LogLinearProblem pb;
  pb.data_sum = Eigen::VectorXd::Zero(p + 1);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    pb.data_sum.head(p) += basis_row(basis, pattern[i]);
    pb.data_sum[p] += state.death_exponent(i);
  }
  const auto nodes = pseudolikelihood_quadrature(pattern, fixed.r, opt.grid, opt.refine_depth);
  pb.nodes.resize(static_cast<Eigen::Index>(nodes.size()), p + 1);
  pb.weights.resize(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    const auto row = static_cast<Eigen::Index>(q);
    pb.nodes.row(row).head(p) = basis_row(basis, nodes[q].u).transpose();
    pb.nodes(row, p) = state.birth_exponent(nodes[q].u);
    pb.weights[row] = nodes[q].weight;
  }
  if (family == Family::strauss) pb.upper_bounded = p;

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(p + 1);
  eta[static_cast<Eigen::Index>(start.intercept_index())] = std::log(n / w.area());
  const auto res = maximize(pb, eta, opt.max_iterations, opt.tolerance);
  double log_gamma = res.eta[p];
  if (family == Family::strauss) log_gamma = std::min(log_gamma, 0.0);
  FitResult out{make_model(res.eta.head(p), log_gamma), res.value, res.converged, res.iterations,
                res.gradient_norm, ""};
  if (!res.converged) out.message = "pseudolikelihood maximisation did not converge; best iterate reported";
  return out;
}

std::vector<QuadratureNode> pseudolikelihood_quadrature(const PointPattern& pattern, double r, std::size_t grid,
                                                        int refine_depth) {
  if (grid == 0) throw std::invalid_argument("quadrature grid must be >= 1");
  if (refine_depth < 0) throw std::invalid_argument("refine_depth must be >= 0");
  const Window& w = pattern.window();
  const double cw = w.width() / static_cast<double>(grid);
  const double ch = w.height() / static_cast<double>(grid);
  const bool refine = r > 0.0 && refine_depth > 0 && !pattern.empty();
  std::optional<BucketGrid> index;
  if (refine) {
    // Any point whose disc boundary can cross a base cell is within r plus
    // the half diagonal of the cell centre.
    index.emplace(w, r + 0.5 * std::hypot(cw, ch));
    for (std::size_t i = 0; i < pattern.size(); ++i) index->insert(static_cast<std::uint32_t>(i), pattern[i]);
  }
  std::vector<QuadratureNode> out;
  out.reserve(grid * grid);
  std::vector<std::uint32_t> cand;
  for (std::size_t j = 0; j < grid; ++j) {
    const double y0 = w.y_min() + static_cast<double>(j) * ch;
    const double y1 = j + 1 == grid ? w.y_max() : y0 + ch;
    for (std::size_t i = 0; i < grid; ++i) {
      const double x0 = w.x_min() + static_cast<double>(i) * cw;
      const double x1 = i + 1 == grid ? w.x_max() : x0 + cw;
      if (!refine) {
        out.push_back({{0.5 * (x0 + x1), 0.5 * (y0 + y1)}, (x1 - x0) * (y1 - y0)});
        continue;
      }
      cand.clear();
      index->for_each_within({0.5 * (x0 + x1), 0.5 * (y0 + y1)}, pattern.points(),
                             [&](std::uint32_t id) { cand.push_back(id); });
      refine_cell(x0, x1, y0, y1, pattern.points(), r * r, cand, refine_depth, out);
    }
  }
  return out;
}

double log_pseudolikelihood(const ModelSpec& model, const PointPattern& pattern, std::size_t grid, int refine_depth) {
  const GibbsState state(model, pattern.window(), pattern.points());
  double v = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) v += state.log_death_intensity(i);
  for (const auto& q : pseudolikelihood_quadrature(pattern, interaction_radius(model), grid, refine_depth)) {
    v -= q.weight * std::exp(state.log_birth_intensity(q.u));
  }
  return v;
}

}  // namespace ppcalib
