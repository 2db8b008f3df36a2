#include "ppcalib/experiment.hpp"

#include <cmath>
#include <stdexcept>

#include "ppcalib/io.hpp"

namespace ppcalib {

namespace {

const Monomial kOne{0, 0};
const Monomial kX{1, 0};
const Monomial kY{0, 1};
const Monomial kXX{2, 0};

Competitor fitted(std::string label, FitRecipe recipe, std::string note = {}) {
  return {std::move(label), std::move(recipe), std::nullopt, std::move(note)};
}

Competitor given(std::string label, ModelSpec model, std::string note = {}) {
  return {std::move(label), std::nullopt, std::move(model), std::move(note)};
}

ExperimentConfig strauss_design(bool published) {
  ExperimentConfig c;
  c.name = "strauss";
  const std::vector<Monomial> basis{kOne, kX, kY, kXX};
  c.truth = StraussModel{LogLinearIntensity(basis, {std::log(200.0), 2.0, 2.0, 3.0}), 0.1, 0.05};
  c.band = BandKind::bootstrap;
  c.competitors.push_back(given("true", c.truth));
  if (published) {
    c.competitors.push_back(
        given("refit", StraussModel{LogLinearIntensity(basis, {std::log(179.0), 1.53, 1.89, 1.34}), 0.24, 0.05},
              "published estimate (0.24, 179, 1.53, 1.89, 1.34) read as (gamma, activity scale, x, y, x^2)"));
    c.competitors.push_back(given("homogeneous_strauss",
                                  StraussModel{LogLinearIntensity::constant(1099.0), 0.34, 0.05},
                                  "published pair (1099, 0.34) read as activity 1099 and gamma 0.34"));
    c.competitors.push_back(given("homogeneous_poisson", PoissonModel{LogLinearIntensity::constant(271.0)}));
  } else {
    c.competitors.push_back(fitted("refit", {Family::strauss, basis, {0.05, 0.0}}));
    c.competitors.push_back(fitted("homogeneous_strauss", {Family::strauss, {kOne}, {0.05, 0.0}}));
    c.competitors.push_back(fitted("homogeneous_poisson", {Family::poisson, {kOne}, {}}));
  }
  return c;
}

ExperimentConfig inhom_poisson_design(bool published, bool extended) {
  ExperimentConfig c;
  c.name = extended ? "inhom_poisson_extended" : "inhom_poisson";
  if (extended) {
    c.window = Window(0.0, 1.0, 0.0, 10.0);
    c.ny = 200;
  }
  c.truth = PoissonModel{LogLinearIntensity({kOne, kX}, {std::log(300.0), -3.0})};
  c.band = BandKind::binomial_null;
  c.competitors.push_back(given("true", c.truth));
  if (published && !extended) {
    c.competitors.push_back(given("mle", PoissonModel{LogLinearIntensity({kOne, kX}, {std::log(223.0), -2.89})}));
    c.competitors.push_back(given("homogeneous_poisson", PoissonModel{LogLinearIntensity::constant(73.0)}));
  } else {
    c.competitors.push_back(fitted("mle", {Family::poisson, {kOne, kX}, {}}));
    c.competitors.push_back(fitted("homogeneous_poisson", {Family::poisson, {kOne}, {}}));
  }
  return c;
}

ExperimentConfig geyer_design(bool published) {
  ExperimentConfig c;
  c.name = "geyer";
  c.truth = GeyerModel{std::exp(4.0), std::exp(0.4), 0.05, 4.5};
  c.band = BandKind::bootstrap;
  c.competitors.push_back(given("true", c.truth));
  if (published) {
    c.competitors.push_back(given("mple", GeyerModel{std::exp(4.12), 1.46, 0.05, 4.5}));
    c.competitors.push_back(given("homogeneous_poisson", PoissonModel{LogLinearIntensity::constant(376.0)}));
  } else {
    c.competitors.push_back(fitted("mple", {Family::geyer, {kOne}, {0.05, 4.5}}));
    c.competitors.push_back(fitted("homogeneous_poisson", {Family::poisson, {kOne}, {}}));
  }
  return c;
}

FitResult fit_recipe(const FitRecipe& recipe, const PointPattern& pattern, const ExperimentConfig& c) {
  if (recipe.family == Family::poisson) return fit_poisson(pattern, recipe.basis, c.fit);
  return fit_gibbs_mple(pattern, recipe.family, recipe.fixed, recipe.basis, c.mple);
}

}  // namespace

ExperimentConfig experiment_config(std::string_view name, bool published_estimates, bool extended) {
  if (extended && name != "inhom_poisson") throw std::invalid_argument("the extended window applies to inhom_poisson only");
  if (name == "strauss") return strauss_design(published_estimates);
  if (name == "inhom_poisson") return inhom_poisson_design(published_estimates, extended);
  if (name == "geyer") return geyer_design(published_estimates);
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "' (expected strauss, inhom_poisson or geyer)");
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate(c.truth);
  const PixelGrid grid(c.window, c.nx, c.ny);
  RngStream obs_rng(derive_seed(c.seed, "observation"), 0);
  ExperimentResult out{c, sample_pattern(c.truth, c.window, c.mcmc, obs_rng), std::nullopt, {}};

  CalibrationOptions opt;
  opt.K = c.K;
  opt.bins = c.bins;
  opt.band = c.band;
  opt.level = c.level;
  opt.n_boot = c.n_boot;
  opt.mcmc = c.mcmc;
  opt.threads = c.threads;
  opt.quadrature = c.fit.quadrature;

  if (c.band == BandKind::bootstrap) {
    BootstrapOptions b;
    b.n_boot = c.n_boot;
    b.level = c.level;
    b.mcmc = c.mcmc;
    b.threads = c.threads;
    out.shared_band = bootstrap_band(c.truth, grid, c.K, c.bins, derive_seed(c.seed, "band"), b);
  }

  for (const auto& comp : c.competitors) {
    std::optional<FitResult> fit;
    ModelSpec model = comp.model ? *comp.model : [&] {
      fit = fit_recipe(*comp.recipe, out.observation, c);
      return fit->model;
    }();
    CalibrationReport rep = calibrate(out.observation, model, grid, derive_seed(c.seed, comp.label), opt, out.shared_band);
    out.outcomes.push_back({comp.label, std::move(model), std::move(fit), comp.note, std::move(rep)});
  }
  return out;
}

void write_experiment(const ExperimentResult& r, const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  io::write_pattern(r.observation, outdir / "observation.csv");
  io::json summary;
  summary["experiment"] = r.config.name;
  summary["seed"] = r.config.seed;
  summary["observed_points"] = r.observation.size();
  summary["window"] = io::window_to_json(r.config.window)["window"];
  summary["grid"] = {{"nx", r.config.nx}, {"ny", r.config.ny}};
  summary["K"] = r.config.K;
  summary["bins"] = r.config.bins;
  summary["truth"] = io::model_to_json(r.config.truth);
  summary["models"] = io::json::array();
  for (const auto& o : r.outcomes) {
    const auto dir = outdir / o.label;
    io::write_text(dir / "model.json", (o.fit ? io::fit_to_json(*o.fit) : io::model_to_json(o.model)).dump(2) + "\n");
    io::write_text(dir / "pixels.csv", io::pixels_to_csv(o.report.pit));
    io::json rep = io::report_to_json(o.report);
    io::write_text(dir / "report.json", rep.dump(2) + "\n");
    const std::string title = r.config.name + ": " + o.label;
    io::write_text(dir / "histogram.svg", io::histogram_svg(o.report.hist, title));
    io::write_text(dir / "map.svg", io::spatial_map_svg(o.report.pit, r.observation, title));
    io::json entry{{"label", o.label}, {"model", io::model_to_json(o.model)}, {"report", rep}};
    if (o.fit) entry["fit"] = io::fit_to_json(*o.fit);
    if (!o.note.empty()) entry["interpretation"] = o.note;
    summary["models"].push_back(entry);
  }
  io::write_text(outdir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace ppcalib
