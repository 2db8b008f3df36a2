#ifndef PPCALIB_FIT_HPP
#define PPCALIB_FIT_HPP

#include <string>
#include <vector>

#include "ppcalib/core.hpp"
#include "ppcalib/models.hpp"

namespace ppcalib {

struct FitResult {
  ModelSpec model;
  /// Log-likelihood (Poisson, without the constant |W|) or log-pseudolikelihood
  /// at the reported parameters.
  double log_objective = 0.0;
  bool converged = false;
  int n_iterations = 0;
  /// Sup-norm of the (projected) gradient at the reported parameters.
  double gradient_norm = 0.0;
  std::string message;
};

struct FitOptions {
  QuadratureOptions quadrature{16, 2};
  int max_iterations = 500;
  double tolerance = 1e-6;
};

/// Maximum likelihood for a log-linear Poisson intensity by Newton's method.
/// An empty pattern yields the zero intensity (intercept -inf) with
/// converged = false.
FitResult fit_poisson(const PointPattern& pattern, const std::vector<Monomial>& basis, const FitOptions& opt = {});

/// Sum of log lambda(x_i) minus the integral of lambda over the window.
double poisson_log_likelihood(const LogLinearIntensity& intensity, const PointPattern& pattern,
                              QuadratureOptions quadrature = {16, 2});

struct GibbsFixed {
  double r = 0.0;
  double alpha = 0.0;  // Geyer only
};

struct MpleOptions {
  /// The window integral uses grid x grid midpoint cells; cells cut by the
  /// boundary of a data point's interaction disc are split into 2 x 2
  /// subcells up to refine_depth times.
  std::size_t grid = 64;
  int refine_depth = 4;
  int max_iterations = 500;
  double tolerance = 1e-6;
};

/// Maximum pseudolikelihood for Strauss (activity coefficients over `basis`,
/// log gamma <= 0) or Geyer (log beta, log gamma; basis must be {1}).
FitResult fit_gibbs_mple(const PointPattern& pattern, Family family, GibbsFixed fixed,
                         const std::vector<Monomial>& basis, const MpleOptions& opt = {});

struct QuadratureNode {
  Point u;
  double weight;
};

/// Midpoint nodes for the pseudolikelihood integral. The neighbour set
/// {x_i : |u - x_i| <= r} is constant on every leaf cell unless the depth
/// limit was reached, so the conditional intensity is smooth on each leaf.
std::vector<QuadratureNode> pseudolikelihood_quadrature(const PointPattern& pattern, double r, std::size_t grid,
                                                        int refine_depth);

/// log PL = sum_i log lambda(x_i; phi \ x_i) - sum over the nodes above of
/// weight * lambda(u; phi). Returns -inf where a data point has zero
/// conditional intensity.
double log_pseudolikelihood(const ModelSpec& model, const PointPattern& pattern, std::size_t grid = 64,
                            int refine_depth = MpleOptions{}.refine_depth);

}  // namespace ppcalib

#endif  // PPCALIB_FIT_HPP
