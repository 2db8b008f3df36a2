#ifndef PPCALIB_EXPERIMENT_HPP
#define PPCALIB_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ppcalib/calib.hpp"
#include "ppcalib/fit.hpp"
#include "ppcalib/models.hpp"
#include "ppcalib/sim.hpp"

namespace ppcalib {

/// How a compared model is obtained from the observed pattern.
struct FitRecipe {
  Family family = Family::poisson;
  std::vector<Monomial> basis{Monomial{}};
  GibbsFixed fixed{};
};

struct Competitor {
  std::string label;
  /// Either fitted to the observation (recipe) or used as given (model).
  std::optional<FitRecipe> recipe;
  std::optional<ModelSpec> model;
  std::string note;
};

struct ExperimentConfig {
  std::string name;
  Window window = Window::unit_square();
  std::size_t nx = 20;
  std::size_t ny = 20;
  ModelSpec truth = PoissonModel{LogLinearIntensity::constant(1.0)};
  std::vector<Competitor> competitors;
  std::size_t K = 499;
  std::size_t bins = 5;
  /// Band kind for every report; for Gibbs experiments the bootstrap band is
  /// drawn from the true model and shared by all models.
  BandKind band = BandKind::binomial_null;
  double level = 0.90;
  std::size_t n_boot = 500;
  McmcConfig mcmc{};
  FitOptions fit{};
  MpleOptions mple{};
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Built-in designs: "strauss", "inhom_poisson", "geyer". With
/// `published_estimates` the compared models use the estimates printed for
/// the original single draw instead of being refitted. `extended` stretches
/// the inhom_poisson window to [0,1] x [0,10] with a 20 x 200 grid.
ExperimentConfig experiment_config(std::string_view name, bool published_estimates = false, bool extended = false);

struct ModelOutcome {
  std::string label;
  ModelSpec model;
  std::optional<FitResult> fit;
  std::string note;
  CalibrationReport report;
};

struct ExperimentResult {
  ExperimentConfig config;
  PointPattern observation;
  std::optional<Band> shared_band;
  std::vector<ModelOutcome> outcomes;
};

/// Simulates the truth, fits or takes each competitor, and calibrates every
/// model against the observation. All randomness derives from config.seed.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes observation.csv (+ sidecar), summary.json, and per model
/// <label>/{model.json, pixels.csv, report.json, histogram.svg, map.svg}.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& outdir);

}  // namespace ppcalib

#endif  // PPCALIB_EXPERIMENT_HPP
