#include "ppcalib/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace ppcalib::stats {

PoissonCdf::PoissonCdf(double mean) : mean_(mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson mean must be finite and >= 0");
}

double PoissonCdf::operator()(std::int64_t k) const {
  if (k < 0) return 0.0;
  if (mean_ == 0.0) return 1.0;
  // Beyond 40 standard deviations the upper tail is below double precision.
  if (static_cast<double>(k) > mean_ + 40.0 * std::sqrt(mean_) + 40.0) return 1.0;
  if (mean_ <= 700.0) {
    double term = std::exp(-mean_);
    double sum = term;
    for (std::int64_t j = 1; j <= k; ++j) {
      term *= mean_ / static_cast<double>(j);
      sum += term;
      if (term < sum * 1e-17 && static_cast<double>(j) > mean_) break;
    }
    return std::min(sum, 1.0);
  }
  // log p_j = -mean + j log(mean) - lgamma(j + 1); log-sum-exp around the
  // largest included term.
  const double log_mean = std::log(mean_);
  auto log_term = [&](std::int64_t j) {
    const double jd = static_cast<double>(j);
    return -mean_ + jd * log_mean - std::lgamma(jd + 1.0);
  };
  const std::int64_t top = std::min<std::int64_t>(k, static_cast<std::int64_t>(std::floor(mean_)));
  const double anchor = log_term(top);
  double sum = 0.0;
  for (std::int64_t j = k; j >= 0; --j) {
    const double t = std::exp(log_term(j) - anchor);
    sum += t;
    if (j < top && t < 1e-17 * sum) break;
  }
  return std::min(1.0, std::exp(anchor + std::log(sum)));
}

double binomial_cdf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double nd = static_cast<double>(n);
  double sum = 0.0;
  for (std::int64_t j = 0; j <= k; ++j) {
    const double jd = static_cast<double>(j);
    sum += std::exp(std::lgamma(nd + 1.0) - std::lgamma(jd + 1.0) - std::lgamma(nd - jd + 1.0) + jd * lp +
                    (nd - jd) * lq);
  }
  return std::min(sum, 1.0);
}

std::int64_t binomial_quantile(double q, std::int64_t n, double p) {
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level must lie in [0, 1]");
  if (n < 0) throw std::invalid_argument("binomial size must be >= 0");
  for (std::int64_t k = 0; k < n; ++k) {
    if (binomial_cdf(k, n, p) >= q - 1e-12) return k;
  }
  return n;
}

double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

double ks_statistic_uniform(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("KS test needs at least one value");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::clamp(v[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

double ks_statistic_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test needs nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series, fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      cdf += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

double ks_p_value(double statistic, double n) {
  const double rn = std::sqrt(n);
  return kolmogorov_sf((rn + 0.12 + 0.11 / rn) * statistic);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

CorrelationTest spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 3) throw std::invalid_argument("spearman needs two samples of equal size >= 3");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  CorrelationTest out;
  if (saa == 0.0 || sbb == 0.0) return out;
  out.rho = sab / std::sqrt(saa * sbb);
  if (std::abs(out.rho) >= 1.0) {
    out.p_value = 0.0;
    return out;
  }
  const double t = out.rho * std::sqrt((n - 2.0) / (1.0 - out.rho * out.rho));
  const boost::math::students_t dist(n - 2.0);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return out;
}

double chi_square_uniform_statistic(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("chi-square needs at least one cell");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
  const double expected = total / static_cast<double>(counts.size());
  if (expected == 0.0) return 0.0;
  double x2 = 0.0;
  for (const auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    x2 += d * d / expected;
  }
  return x2;
}

}  // namespace ppcalib::stats
