#include "ppcalib/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ppcalib/stats.hpp"

namespace ppcalib {

std::string_view pit_kind_name(PitKind k) {
  return k == PitKind::exact_randomized ? "exact_randomized" : "empirical_rank";
}

std::string_view band_kind_name(BandKind k) {
  switch (k) {
    case BandKind::none:
      return "none";
    case BandKind::binomial_null:
      return "binomial_null";
    case BandKind::bootstrap:
      return "bootstrap";
  }
  return "?";
}

std::string_view dispersion_name(Dispersion d) {
  switch (d) {
    case Dispersion::consistent:
      return "consistent";
    case Dispersion::underdispersed:
      return "underdispersed";
    case Dispersion::overdispersed:
      return "overdispersed";
  }
  return "?";
}

PitVector exact_poisson_pit(const PointPattern& pattern, const ModelSpec& model, const PixelGrid& grid,
                            RngStream& rng, QuadratureOptions quadrature) {
  const auto* poisson = std::get_if<PoissonModel>(&model);
  if (poisson == nullptr) throw std::invalid_argument("exact PIT requires a Poisson model");
  const auto observed = pixel_counts(pattern, grid);
  PitVector out{std::vector<double>(grid.size()), PitKind::exact_randomized, grid, 0, {}, observed.counts};
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const stats::PoissonCdf cdf(integrate_intensity(poisson->intensity, grid.pixel(s), quadrature));
    out.values[s] = randomized_pit(cdf, observed.counts[s], rng.uniform());
  }
  return out;
}

PitVector empirical_ranks(const CountVector& observed, std::span<const CountVector> replicates, RngStream& rng) {
  if (replicates.empty()) throw std::invalid_argument("empirical ranks need K >= 1 replicates");
  const auto& grid = observed.grid;
  for (const auto& r : replicates) {
    if (!(r.grid == grid)) throw std::invalid_argument("replicate grid does not match the observation grid");
  }
  const auto scale = static_cast<std::int64_t>(replicates.size()) + 1;
  PitVector out{std::vector<double>(grid.size()), PitKind::empirical_rank, grid, scale,
                std::vector<std::int64_t>(grid.size()), observed.counts};
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const auto z = observed.counts[s];
    std::int64_t below = 0;
    std::int64_t ties = 0;
    for (const auto& r : replicates) {
      below += r.counts[s] < z ? 1 : 0;
      ties += r.counts[s] == z ? 1 : 0;
    }
    const auto rank = 1 + below + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(ties) + 1));
    out.ranks[s] = rank;
    out.values[s] = static_cast<double>(rank) / static_cast<double>(scale);
  }
  return out;
}

PitVector empirical_ranks(const PointPattern& pattern, std::span<const PointPattern> replicates,
                          const PixelGrid& grid, RngStream& rng) {
  std::vector<CountVector> counts;
  counts.reserve(replicates.size());
  for (const auto& r : replicates) counts.push_back(pixel_counts(r, grid));
  return empirical_ranks(pixel_counts(pattern, grid), counts, rng);
}

NTestResult n_test(std::size_t observed_size, std::span<const std::size_t> replicate_sizes, double tail) {
  if (replicate_sizes.empty()) throw std::invalid_argument("N-test needs K >= 1 replicates");
  const auto fewer = std::count_if(replicate_sizes.begin(), replicate_sizes.end(),
                                   [&](std::size_t n) { return n < observed_size; });
  NTestResult out;
  out.delta = static_cast<double>(fewer) / static_cast<double>(replicate_sizes.size());
  out.inconsistent = out.delta <= tail || out.delta >= 1.0 - tail;
  return out;
}

NTestResult exact_n_test(std::size_t observed_size, const ModelSpec& model, const Window& window,
                         QuadratureOptions quadrature, double tail) {
  const stats::PoissonCdf total(integrate_intensity(model, window, quadrature));
  NTestResult out;
  out.delta = observed_size == 0 ? 0.0 : total(static_cast<std::int64_t>(observed_size) - 1);
  out.inconsistent = out.delta <= tail || out.delta >= 1.0 - tail;
  return out;
}

NTestResult n_test(const PointPattern& pattern, std::span<const PointPattern> replicates, double tail) {
  std::vector<std::size_t> sizes;
  sizes.reserve(replicates.size());
  for (const auto& r : replicates) sizes.push_back(r.size());
  return n_test(pattern.size(), sizes, tail);
}

void HistogramReport::set_band(const Band& band) {
  if (band.lower.size() != bin_counts.size() || band.upper.size() != bin_counts.size()) {
    throw std::invalid_argument("band has a different number of bins than the histogram");
  }
  lower_band = band.lower;
  upper_band = band.upper;
  band_kind = band.kind;
}

bool HistogramReport::inside_band() const {
  if (band_kind == BandKind::none) return true;
  for (std::size_t b = 0; b < bin_counts.size(); ++b) {
    const auto c = static_cast<double>(bin_counts[b]);
    if (c < lower_band[b] || c > upper_band[b]) return false;
  }
  return true;
}

HistogramReport histogram(const PitVector& pit, std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("histogram needs at least 2 bins");
  HistogramReport out;
  out.bin_counts.assign(bins, 0);
  out.n_values = static_cast<std::int64_t>(pit.values.size());
  for (std::size_t b = 0; b <= bins; ++b) out.bin_edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
  const auto B = static_cast<std::int64_t>(bins);
  if (pit.kind == PitKind::empirical_rank) {
    if (pit.rank_scale % B != 0) {
      throw std::invalid_argument("rank histogram: " + std::to_string(bins) + " bins do not divide K + 1 = " +
                                  std::to_string(pit.rank_scale) +
                                  "; bins must align with rank boundaries (choose K so that K + 1 is a multiple of B)");
    }
    const std::int64_t per_bin = pit.rank_scale / B;
    for (const auto r : pit.ranks) ++out.bin_counts[static_cast<std::size_t>((r - 1) / per_bin)];
    return out;
  }
  for (const double v : pit.values) {
    const auto b = static_cast<std::int64_t>(std::floor(v * static_cast<double>(B)));
    ++out.bin_counts[static_cast<std::size_t>(std::clamp<std::int64_t>(b, 0, B - 1))];
  }
  return out;
}

Band binomial_null_band(std::int64_t S, std::size_t bins, double level) {
  if (S <= 0 || bins == 0) throw std::invalid_argument("binomial band needs S >= 1 and B >= 1");
  if (level < 0.0 || level >= 1.0) throw std::invalid_argument("band level must lie in [0, 1)");
  const double p = 1.0 / static_cast<double>(bins);
  const auto lo = static_cast<double>(stats::binomial_quantile(0.5 * (1.0 - level), S, p));
  const auto hi = static_cast<double>(stats::binomial_quantile(0.5 * (1.0 + level), S, p));
  return {std::vector<double>(bins, lo), std::vector<double>(bins, hi), level, BandKind::binomial_null};
}

Band bootstrap_band(const ModelSpec& model, const PixelGrid& grid, std::size_t K, std::size_t bins,
                    std::uint64_t master_seed, const BootstrapOptions& opt) {
  if (opt.n_boot == 0) throw std::invalid_argument("bootstrap needs n_boot >= 1");
  if ((K + 1) % bins != 0) throw std::invalid_argument("bootstrap band: B must divide K + 1");
  const auto pool = sample_batch_counts(model, grid, K, opt.mcmc, derive_seed(master_seed, "bootstrap-pool"), opt.threads);
  const auto fresh =
      sample_batch_counts(model, grid, opt.n_boot, opt.mcmc, derive_seed(master_seed, "bootstrap-fresh"), opt.threads);
  std::vector<std::vector<double>> per_bin(bins);
  const std::uint64_t tie_seed = derive_seed(master_seed, "bootstrap-ties");
  for (std::size_t b = 0; b < opt.n_boot; ++b) {
    RngStream rng(tie_seed, b);
    const auto hist = histogram(empirical_ranks(fresh[b], pool, rng), bins);
    for (std::size_t j = 0; j < bins; ++j) per_bin[j].push_back(static_cast<double>(hist.bin_counts[j]));
  }
  Band band{{}, {}, opt.level, BandKind::bootstrap};
  for (auto& v : per_bin) {
    band.lower.push_back(stats::quantile(v, 0.5 * (1.0 - opt.level)));
    band.upper.push_back(stats::quantile(v, 0.5 * (1.0 + opt.level)));
  }
  return band;
}

UniformityTests uniformity_tests(const PitVector& pit, std::size_t bins) {
  UniformityTests out;
  const auto hist = histogram(pit, bins);
  out.chi_square_statistic = stats::chi_square_uniform_statistic(hist.bin_counts);
  out.chi_square_p = stats::chi_square_sf(out.chi_square_statistic, static_cast<double>(bins) - 1.0);
  out.ks_statistic = stats::ks_statistic_uniform(pit.values);
  out.ks_p = stats::ks_p_value(out.ks_statistic, static_cast<double>(pit.values.size()));
  out.dependence_caveat = pit.kind == PitKind::empirical_rank;
  return out;
}

std::vector<double> SpatialMap::column_means() const {
  std::vector<double> out(nx, 0.0);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) out[ix] += at(iy, ix);
  }
  for (auto& v : out) v /= static_cast<double>(ny);
  return out;
}

SpatialMap spatial_map(const PitVector& pit) {
  if (pit.values.size() != pit.grid.size()) throw std::invalid_argument("PIT vector does not match its grid");
  return {pit.grid.nx(), pit.grid.ny(), pit.values};
}

stats::CorrelationTest column_trend(const SpatialMap& map) {
  const auto means = map.column_means();
  std::vector<double> index(means.size());
  std::iota(index.begin(), index.end(), 0.0);
  return stats::spearman(index, means);
}

DispersionDiagnosis diagnose_dispersion(const HistogramReport& hist) {
  DispersionDiagnosis out;
  const auto B = hist.bin_counts.size();
  out.outer_count = hist.bin_counts.front() + hist.bin_counts.back();
  const double p = 2.0 / static_cast<double>(B);
  out.null_lower = stats::binomial_quantile(0.05, hist.n_values, p);
  out.null_upper = stats::binomial_quantile(0.95, hist.n_values, p);
  if (out.outer_count > out.null_upper) {
    out.verdict = Dispersion::underdispersed;
  } else if (out.outer_count < out.null_lower) {
    out.verdict = Dispersion::overdispersed;
  }
  return out;
}

CalibrationReport calibrate(const PointPattern& pattern, const ModelSpec& model, const PixelGrid& grid,
                            std::uint64_t seed, const CalibrationOptions& opt, const std::optional<Band>& band_override) {
  if (!(pattern.window() == grid.window())) throw std::invalid_argument("pattern window does not match the grid");
  validate(model);
  RngStream pit_rng(derive_seed(seed, "pit"), 0);
  const bool exact = !is_gibbs(model) && !opt.force_empirical;
  std::vector<std::size_t> sizes;
  PitVector pit = [&] {
    if (exact) return exact_poisson_pit(pattern, model, grid, pit_rng, opt.quadrature);
    if ((opt.K + 1) % opt.bins != 0) {
      throw std::invalid_argument("rank histogram: B = " + std::to_string(opt.bins) + " must divide K + 1 = " +
                                  std::to_string(opt.K + 1));
    }
    const auto reps = sample_batch(model, grid.window(), opt.K, opt.mcmc, derive_seed(seed, "replicates"), opt.threads);
    std::vector<CountVector> counts;
    counts.reserve(reps.size());
    for (const auto& r : reps) {
      counts.push_back(pixel_counts(r, grid));
      sizes.push_back(r.size());
    }
    return empirical_ranks(pixel_counts(pattern, grid), counts, pit_rng);
  }();
  CalibrationReport rep{.pit = std::move(pit)};
  rep.seed = seed;
  rep.replicate_sizes = std::move(sizes);
  if (exact) {
    rep.ntest = exact_n_test(pattern.size(), model, grid.window(), opt.quadrature);
    rep.ntest_kind = "exact";
  } else {
    rep.ntest = n_test(pattern.size(), rep.replicate_sizes);
    rep.ntest_kind = "empirical";
  }
  rep.hist = histogram(rep.pit, opt.bins);
  if (band_override) {
    rep.hist.set_band(*band_override);
  } else if (opt.band == BandKind::binomial_null) {
    rep.hist.set_band(binomial_null_band(static_cast<std::int64_t>(grid.size()), opt.bins, opt.level));
  } else if (opt.band == BandKind::bootstrap) {
    BootstrapOptions bo{opt.n_boot, opt.level, opt.mcmc, opt.threads};
    rep.hist.set_band(bootstrap_band(model, grid, opt.K, opt.bins, derive_seed(seed, "bootstrap"), bo));
  }
  rep.tests = uniformity_tests(rep.pit, opt.bins);
  rep.dispersion = diagnose_dispersion(rep.hist);
  if (grid.nx() >= 3) rep.trend = column_trend(spatial_map(rep.pit));
  return rep;
}

}  // namespace ppcalib
