#ifndef PPCALIB_STATS_HPP
#define PPCALIB_STATS_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace ppcalib::stats {

/// Poisson(mean) cumulative distribution on the integers, F(-1) = 0.
///
/// Terms are summed by the recursion p_k = p_{k-1} * mean / k from p_0 =
/// exp(-mean); for mean > 700, where exp(-mean) underflows, the terms are
/// accumulated in log space instead.
class PoissonCdf {
 public:
  explicit PoissonCdf(double mean);

  double mean() const { return mean_; }
  double operator()(std::int64_t k) const;

 private:
  double mean_;
};

double binomial_cdf(std::int64_t k, std::int64_t n, double p);
/// Smallest k with P(X <= k) >= q for X ~ Binomial(n, p).
std::int64_t binomial_quantile(double q, std::int64_t n, double p);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);
/// Two-sided one-sample KS statistic against U(0, 1).
double ks_statistic_uniform(std::span<const double> values);
/// Two-sample KS statistic.
double ks_statistic_two_sample(std::span<const double> a, std::span<const double> b);
/// P(K > lambda) for the limiting Kolmogorov distribution.
double kolmogorov_sf(double lambda);
/// Asymptotic p-value with the Stephens small-sample correction;
/// n is the (effective) sample size.
double ks_p_value(double statistic, double n);

/// Sample quantile, linear interpolation between order statistics
/// (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double q);

struct CorrelationTest {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Spearman rank correlation with average ranks for ties; two-sided p-value
/// from the t approximation with n - 2 degrees of freedom.
CorrelationTest spearman(std::span<const double> a, std::span<const double> b);

/// Pearson chi-square statistic of observed counts against equal expected
/// cells.
double chi_square_uniform_statistic(std::span<const std::int64_t> counts);

}  // namespace ppcalib::stats

#endif  // PPCALIB_STATS_HPP
