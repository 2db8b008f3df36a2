#ifndef PPCALIB_CALIB_HPP
#define PPCALIB_CALIB_HPP

#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppcalib/core.hpp"
#include "ppcalib/models.hpp"
#include "ppcalib/sim.hpp"
#include "ppcalib/stats.hpp"

namespace ppcalib {

/// Randomized PIT for an integer-valued forecast:
/// F(z - 1) + v * (F(z) - F(z - 1)), with F(-1) = 0.
inline double randomized_pit(double cdf_below, double cdf_at, double v) {
  return cdf_below + v * (cdf_at - cdf_below);
}

template <class Cdf>
  requires std::invocable<const Cdf&, std::int64_t>
double randomized_pit(const Cdf& cdf, std::int64_t z, double v) {
  const double below = z <= 0 ? 0.0 : static_cast<double>(cdf(z - 1));
  return randomized_pit(below, static_cast<double>(cdf(z)), v);
}

enum class PitKind { exact_randomized, empirical_rank };

std::string_view pit_kind_name(PitKind k);

/// Per-pixel PIT values on [0, 1]. For empirical ranks, values are
/// rank / (K + 1) with integer ranks in 1..K+1 kept alongside.
struct PitVector {
  std::vector<double> values;
  PitKind kind = PitKind::exact_randomized;
  PixelGrid grid;
  /// K + 1 for empirical ranks, 0 otherwise.
  std::int64_t rank_scale = 0;
  std::vector<std::int64_t> ranks;
  /// Observed count per pixel.
  std::vector<std::int64_t> counts;
};

PitVector exact_poisson_pit(const PointPattern& pattern, const ModelSpec& model, const PixelGrid& grid,
                            RngStream& rng, QuadratureOptions quadrature = {});

/// Rank of the observed count in each pixel among the replicate counts, ties
/// broken uniformly at random.
PitVector empirical_ranks(const CountVector& observed, std::span<const CountVector> replicates, RngStream& rng);
PitVector empirical_ranks(const PointPattern& pattern, std::span<const PointPattern> replicates,
                          const PixelGrid& grid, RngStream& rng);

struct NTestResult {
  double delta = 0.0;
  /// Set when delta lies within `tail` of 0 or 1.
  bool inconsistent = false;
};

/// Fraction of replicates with strictly fewer points than the observation.
NTestResult n_test(std::size_t observed_size, std::span<const std::size_t> replicate_sizes, double tail = 0.025);
NTestResult n_test(const PointPattern& pattern, std::span<const PointPattern> replicates, double tail = 0.025);
/// Poisson models: delta = P(N(W) < n) under the model's total count law.
NTestResult exact_n_test(std::size_t observed_size, const ModelSpec& model, const Window& window,
                         QuadratureOptions quadrature = {}, double tail = 0.025);

enum class BandKind { none, binomial_null, bootstrap };

std::string_view band_kind_name(BandKind k);

struct Band {
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.9;
  BandKind kind = BandKind::none;
};

struct HistogramReport {
  std::vector<std::int64_t> bin_counts;
  std::vector<double> bin_edges;
  std::vector<double> lower_band;
  std::vector<double> upper_band;
  BandKind band_kind = BandKind::none;
  std::int64_t n_values = 0;

  void set_band(const Band& band);
  /// True if every bin count lies inside [lower, upper].
  bool inside_band() const;
};

/// Equal-width bins on [0, 1]; 1.0 goes to the last bin. Rank vectors are
/// binned on their integer ranks and require B to divide K + 1.
HistogramReport histogram(const PitVector& pit, std::size_t bins = 5);

/// Pointwise band from exact Binomial(S, 1/B) quantiles at (1 -+ level) / 2.
Band binomial_null_band(std::int64_t S, std::size_t bins, double level = 0.90);

struct BootstrapOptions {
  std::size_t n_boot = 500;
  double level = 0.90;
  McmcConfig mcmc{};
  unsigned threads = 0;
};

/// Pointwise percentile band of rank-histogram counts for data drawn from
/// `model` itself: one shared pool of K replicates, and n_boot fresh draws
/// each ranked against the pool.
Band bootstrap_band(const ModelSpec& model, const PixelGrid& grid, std::size_t K, std::size_t bins,
                    std::uint64_t master_seed, const BootstrapOptions& opt = {});

struct UniformityTests {
  double chi_square_statistic = 0.0;
  double chi_square_p = 1.0;
  double ks_statistic = 0.0;
  double ks_p = 1.0;
  /// PIT values are not independent across pixels (interaction models).
  bool dependence_caveat = false;
};

UniformityTests uniformity_tests(const PitVector& pit, std::size_t bins = 5);

/// Row-major (ny x nx) matrix; row iy, column ix.
struct SpatialMap {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  double at(std::size_t iy, std::size_t ix) const { return values[iy * nx + ix]; }
  std::vector<double> column_means() const;
};

SpatialMap spatial_map(const PitVector& pit);

/// Spearman correlation between column index and column-mean PIT.
stats::CorrelationTest column_trend(const SpatialMap& map);

enum class Dispersion { consistent, underdispersed, overdispersed };

std::string_view dispersion_name(Dispersion d);

struct DispersionDiagnosis {
  Dispersion verdict = Dispersion::consistent;
  std::int64_t outer_count = 0;  // first + last bin
  std::int64_t null_lower = 0;   // 5th percentile of Binomial(S, 2/B)
  std::int64_t null_upper = 0;   // 95th percentile
};

/// Compares the outer bins' total with its null Binomial(S, 2/B) law:
/// above the 95th percentile is a U shape, below the 5th a hump.
DispersionDiagnosis diagnose_dispersion(const HistogramReport& hist);

struct CalibrationOptions {
  std::size_t K = 499;
  std::size_t bins = 5;
  BandKind band = BandKind::binomial_null;
  double level = 0.90;
  std::size_t n_boot = 500;
  bool force_empirical = false;
  McmcConfig mcmc{};
  unsigned threads = 0;
  QuadratureOptions quadrature{};
};

struct CalibrationReport {
  PitVector pit;
  HistogramReport hist{};
  UniformityTests tests{};
  NTestResult ntest{};
  /// "exact" (Poisson CDF of the total count) or "empirical".
  std::string ntest_kind{};
  DispersionDiagnosis dispersion{};
  stats::CorrelationTest trend{};
  std::vector<std::size_t> replicate_sizes{};
  std::uint64_t seed = 0;
};

/// Full diagnostic for one model: exact randomized PIT for Poisson models
/// (unless forced empirical), simulation ranks otherwise; histogram, band,
/// tests, N-test and dispersion verdict. `band_override` replaces the band
/// computed from `opt.band` (useful when one band serves many reports).
CalibrationReport calibrate(const PointPattern& pattern, const ModelSpec& model, const PixelGrid& grid,
                            std::uint64_t seed, const CalibrationOptions& opt = {},
                            const std::optional<Band>& band_override = std::nullopt);

}  // namespace ppcalib

#endif  // PPCALIB_CALIB_HPP
