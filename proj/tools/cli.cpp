#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "ppcalib/calib.hpp"
#include "ppcalib/experiment.hpp"
#include "ppcalib/fit.hpp"
#include "ppcalib/io.hpp"
#include "ppcalib/models.hpp"
#include "ppcalib/sim.hpp"

namespace ppcalib::cli {

namespace {

using io::json;

/// Usage errors detected after flag parsing (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a JSON config: top-level keys name global options or subcommands,
/// and a subcommand's object holds its option values keyed by long flag name.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    collect(app, default_also, j);
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void walk(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        walk(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  static void collect(const CLI::App* app, bool default_also, json& out) {
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& res = opt->results();
        out[name] = res.size() == 1 ? json(res.front()) : json(res);
      } else if (default_also && !opt->get_default_str().empty()) {
        out[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      json child = json::object();
      collect(sub, default_also, child);
      if (!child.empty()) out[sub->get_name()] = child;
    }
  }
};

// Scalar expression parser: expr := '-' expr | name '(' expr ')' | number.
class ScalarParser {
 public:
  explicit ScalarParser(std::string_view text) : text_(text) {}

  double parse() {
    const double v = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(text_.substr(pos_)) + "'");
    return v;
  }

 private:
  double expr() {
    skip();
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
      const bool neg = text_[pos_++] == '-';
      const double v = expr();
      return neg ? -v : v;
    }
    if (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_])) && !starts_number()) {
      const std::size_t b = pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string name(text_.substr(b, pos_ - b));
      skip();
      if (pos_ >= text_.size() || text_[pos_] != '(') fail("expected '(' after " + name);
      ++pos_;
      const double arg = expr();
      skip();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
      ++pos_;
      if (name == "log") return std::log(arg);
      if (name == "exp") return std::exp(arg);
      if (name == "sqrt") return std::sqrt(arg);
      fail("unknown function " + name);
    }
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      const double v = expr();
      skip();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
      ++pos_;
      return v;
    }
    return number();
  }

  bool starts_number() const {
    const auto rest = text_.substr(pos_);
    return rest.starts_with("inf") || rest.starts_with("nan");
  }

  double number() {
    const std::string rest(text_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("expected a number at '" + rest + "'");
    }
    pos_ += used;
    return v;
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw UsageError("cannot parse '" + std::string(text_) + "': " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// Default basis for n coefficients: 1, x, y, x^2, x*y, y^2.
std::vector<Monomial> canonical_basis(std::size_t n) {
  static const std::vector<Monomial> order{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  if (n == 0 || n > order.size()) {
    throw UsageError("--theta has " + std::to_string(n) + " coefficients; give --basis explicitly");
  }
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n)};
}

struct ModelFlags {
  std::string model_file;
  std::string family;
  std::string theta;
  std::string basis;
  std::optional<double> gamma;
  std::optional<double> r;
  std::optional<double> alpha;
  std::optional<double> beta;

  void add_to(CLI::App* app) {
    app->add_option("--model", model_file, "Model JSON file (instead of the flags below)");
    app->add_option("--family", family, "poisson, strauss or geyer");
    app->add_option("--theta", theta, "Log-linear coefficients, e.g. \"log(300),-3\"");
    app->add_option("--basis", basis, "Basis terms, e.g. \"1,x,y,x^2\" (default: first terms of 1,x,y,x^2,x*y,y^2)");
    app->add_option("--gamma", gamma, "Interaction parameter");
    app->add_option("--r", r, "Interaction radius");
    app->add_option("--alpha", alpha, "Geyer saturation threshold");
    app->add_option("--beta", beta, "Geyer activity");
  }

  ModelSpec build() const {
    if (!model_file.empty()) return io::read_model(model_file);
    if (family.empty()) throw UsageError("give --model or --family");
    const Family fam = parse_family(family);
    auto need = [](const std::optional<double>& v, const char* name) {
      if (!v) throw UsageError(std::string("--") + name + " is required for this family");
      return *v;
    };
    auto intensity = [&] {
      if (theta.empty()) throw UsageError("--theta is required for this family");
      const auto coef = parse_scalar_list(theta);
      auto terms = basis.empty() ? canonical_basis(coef.size()) : parse_basis(basis);
      return LogLinearIntensity(std::move(terms), coef);
    };
    ModelSpec m = [&]() -> ModelSpec {
      switch (fam) {
        case Family::poisson:
          return PoissonModel{intensity()};
        case Family::strauss:
          return StraussModel{intensity(), need(gamma, "gamma"), need(r, "r")};
        case Family::geyer:
          return GeyerModel{need(beta, "beta"), need(gamma, "gamma"), need(r, "r"), need(alpha, "alpha")};
      }
      throw UsageError("unknown family");
    }();
    validate(m);
    return m;
  }
};

struct ChainFlags {
  std::int64_t iterations = McmcConfig{}.n_iterations;
  double p_birth = 0.5;
  std::string initial = "empty";

  void add_to(CLI::App* app) {
    app->add_option("--iterations", iterations, "Birth-death steps per Gibbs replicate")->capture_default_str();
    app->add_option("--p-birth", p_birth, "Birth proposal probability")->capture_default_str();
    app->add_option("--initial", initial, "Chain start: empty or poisson_matched")
        ->check(CLI::IsMember({"empty", "poisson_matched"}))
        ->capture_default_str();
  }

  McmcConfig config() const {
    McmcConfig c;
    c.n_iterations = iterations;
    c.p_birth = p_birth;
    c.initial_state = initial == "empty" ? InitialState::empty : InitialState::poisson_matched;
    c.validate();
    return c;
  }
};

void add_seed(CLI::App* app, std::uint64_t& seed) {
  app->add_option("--seed", seed, "Master seed (default from PPCALIB_SEED, else 1)")
      ->envname("PPCALIB_SEED")
      ->capture_default_str();
}

PointPattern load_pattern(const std::string& path, const std::string& window) {
  return io::read_pattern(path, window.empty() ? std::nullopt : std::optional<Window>(io::parse_window(window)));
}

std::map<std::string, double> parse_fixed(const std::string& text) {
  std::map<std::string, double> out;
  if (text.empty()) return out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--fixed expects name=value pairs, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    if (name != "r" && name != "alpha") throw UsageError("--fixed: unknown parameter '" + name + "' (expected r or alpha)");
    out[name] = ScalarParser(item.substr(eq + 1)).parse();
  }
  return out;
}

BandKind parse_band(const std::string& s) {
  if (s == "binomial") return BandKind::binomial_null;
  if (s == "bootstrap") return BandKind::bootstrap;
  if (s == "none") return BandKind::none;
  throw UsageError("--band must be binomial, bootstrap or none");
}

void print_parameters(const FitResult& fit) {
  std::cout << std::left << std::setw(16) << "parameter" << "estimate\n";
  auto row = [](const std::string& name, double v) {
    std::cout << std::left << std::setw(16) << name << std::setprecision(6) << v << '\n';
  };
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, GeyerModel>) {
          row("beta", m.beta);
          row("log_beta", std::log(m.beta));
          row("gamma", m.gamma);
          row("r (fixed)", m.r);
          row("alpha (fixed)", m.alpha);
        } else {
          const LogLinearIntensity* f = nullptr;
          if constexpr (std::is_same_v<M, PoissonModel>) {
            f = &m.intensity;
          } else {
            f = &m.activity;
          }
          for (std::size_t i = 0; i < f->basis().size(); ++i) row("theta[" + f->basis()[i].name() + "]", f->theta()[i]);
          row(std::is_same_v<M, PoissonModel> ? "lambda scale" : "activity scale",
              std::exp(f->theta()[f->intercept_index()]));
          if constexpr (std::is_same_v<M, StraussModel>) {
            row("gamma", m.gamma);
            row("r (fixed)", m.r);
          }
        }
      },
      fit.model);
  row("log objective", fit.log_objective);
  std::cout << std::left << std::setw(16) << "converged" << (fit.converged ? "true" : "false") << '\n';
  if (!fit.message.empty()) std::cout << "note: " << fit.message << '\n';
}

void write_report(const std::filesystem::path& dir, const CalibrationReport& rep, const PointPattern& pattern,
                  const ModelSpec& model) {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "pixels.csv", io::pixels_to_csv(rep.pit));
  json summary = io::report_to_json(rep);
  summary["model"] = io::model_to_json(model);
  summary["observed_points"] = pattern.size();
  io::write_text(dir / "summary.json", summary.dump(2) + "\n");
  const std::string title = std::string(family_name(family_of(model))) + " model";
  io::write_text(dir / "histogram.svg", io::histogram_svg(rep.hist, title));
  io::write_text(dir / "map.svg", io::spatial_map_svg(rep.pit, pattern, title));
}

void print_report(const CalibrationReport& rep) {
  std::cout << "PIT kind: " << pit_kind_name(rep.pit.kind) << '\n' << "bins:";
  for (const auto c : rep.hist.bin_counts) std::cout << ' ' << c;
  std::cout << '\n';
  if (rep.hist.band_kind != BandKind::none) {
    std::cout << "band (" << band_kind_name(rep.hist.band_kind) << "):";
    for (std::size_t b = 0; b < rep.hist.lower_band.size(); ++b) {
      std::cout << " [" << rep.hist.lower_band[b] << ", " << rep.hist.upper_band[b] << ']';
    }
    std::cout << "\ninside band: " << (rep.hist.inside_band() ? "yes" : "no") << '\n';
  }
  std::cout << "chi-square p: " << rep.tests.chi_square_p << "  KS p: " << rep.tests.ks_p
            << (rep.tests.dependence_caveat ? "  (values dependent; p-values indicative)" : "") << '\n'
            << "N-test delta: " << rep.ntest.delta << (rep.ntest.inconsistent ? "  INCONSISTENT" : "") << '\n'
            << "dispersion: " << dispersion_name(rep.dispersion.verdict) << '\n';
}

}  // namespace

std::vector<double> parse_scalar_list(const std::string& text) {
  std::vector<double> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size() && text[i] == '(') ++depth;
    if (i < text.size() && text[i] == ')') --depth;
    if (i == text.size() || (text[i] == ',' && depth == 0)) {
      out.push_back(ScalarParser(std::string_view(text).substr(start, i - start)).parse());
      start = i + 1;
    }
  }
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Simulate, fit and calibrate spatial point process models", "ppcalib"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; keys are subcommand names holding flag values");
  app.allow_config_extras(CLI::config_extras_mode::error);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads for replicate batches (0 = all cores)")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a pattern from a model");
  ModelFlags sim_model;
  sim_model.add_to(sim);
  ChainFlags sim_chain;
  sim_chain.add_to(sim);
  std::string sim_window = "0,1,0,1";
  std::string sim_out = "pattern.csv";
  std::uint64_t sim_seed = 1;
  sim->add_option("--window", sim_window, "x_min,x_max,y_min,y_max")->capture_default_str();
  sim->add_option("--out,-o", sim_out, "Pattern CSV (window written to <name>.window.json)")->capture_default_str();
  add_seed(sim, sim_seed);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model to a pattern");
  std::string fit_pattern;
  std::string fit_window;
  std::string fit_family;
  std::string fit_basis = "1";
  std::string fit_fixed;
  std::string fit_out;
  std::size_t fit_grid = MpleOptions{}.grid;
  fit->add_option("--pattern", fit_pattern, "Pattern CSV")->required();
  fit->add_option("--window", fit_window, "Window override (default: sidecar)");
  fit->add_option("--family", fit_family, "poisson, strauss or geyer")->required();
  fit->add_option("--basis", fit_basis, "Trend basis terms")->capture_default_str();
  fit->add_option("--fixed", fit_fixed, "Fixed interaction parameters, e.g. r=0.05,alpha=4.5");
  fit->add_option("--grid", fit_grid, "Pseudolikelihood quadrature grid per axis")->capture_default_str();
  fit->add_option("--out,-o", fit_out, "FitResult JSON output");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "PIT calibration report for a model and pattern");
  ModelFlags cal_model;
  cal_model.add_to(cal);
  ChainFlags cal_chain;
  cal_chain.add_to(cal);
  std::string cal_pattern;
  std::string cal_window;
  std::string cal_out = "report";
  std::string cal_band;
  std::size_t cal_nx = 20;
  std::size_t cal_ny = 20;
  std::size_t cal_K = 499;
  std::size_t cal_bins = 5;
  std::size_t cal_boot = 500;
  double cal_level = 0.90;
  bool cal_empirical = false;
  std::uint64_t cal_seed = 1;
  cal->add_option("--pattern", cal_pattern, "Pattern CSV")->required();
  cal->add_option("--window", cal_window, "Window override (default: sidecar)");
  cal->add_option("--nx", cal_nx, "Pixels along x")->capture_default_str();
  cal->add_option("--ny", cal_ny, "Pixels along y")->capture_default_str();
  cal->add_option("--K", cal_K, "Simulated replicates for ranks")->capture_default_str();
  cal->add_option("--bins", cal_bins, "Histogram bins B")->capture_default_str();
  cal->add_option("--band", cal_band, "binomial, bootstrap or none (default: binomial for exact PITs, bootstrap for ranks)");
  cal->add_option("--level", cal_level, "Pointwise band level")->capture_default_str();
  cal->add_option("--n-boot", cal_boot, "Bootstrap realizations")->capture_default_str();
  cal->add_flag("--force-empirical", cal_empirical, "Use simulation ranks for Poisson models too");
  cal->add_option("--out,-o", cal_out, "Report directory")->capture_default_str();
  add_seed(cal, cal_seed);

  // ntest
  auto* nt = app.add_subcommand("ntest", "N-test of the total count");
  ModelFlags nt_model;
  nt_model.add_to(nt);
  ChainFlags nt_chain;
  nt_chain.add_to(nt);
  std::string nt_pattern;
  std::string nt_window;
  std::size_t nt_K = 499;
  bool nt_empirical = false;
  std::uint64_t nt_seed = 1;
  nt->add_option("--pattern", nt_pattern, "Pattern CSV")->required();
  nt->add_option("--window", nt_window, "Window override (default: sidecar)");
  nt->add_option("--K", nt_K, "Replicates for the empirical N-test")->capture_default_str();
  nt->add_flag("--empirical", nt_empirical, "Simulate even for Poisson models");
  add_seed(nt, nt_seed);

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a built-in experiment end to end");
  ChainFlags ex_chain;
  ex_chain.add_to(ex);
  std::string ex_name;
  std::string ex_out;
  std::size_t ex_K = 499;
  std::size_t ex_bins = 5;
  std::size_t ex_boot = 500;
  bool ex_published = false;
  bool ex_extended = false;
  std::uint64_t ex_seed = 1;
  ex->add_option("name", ex_name, "strauss, inhom_poisson or geyer")
      ->required()
      ->check(CLI::IsMember({"strauss", "inhom_poisson", "geyer"}));
  ex->add_option("--out,-o", ex_out, "Output directory (default: experiment name)");
  ex->add_option("--K", ex_K, "Replicates per model")->capture_default_str();
  ex->add_option("--bins", ex_bins, "Histogram bins B")->capture_default_str();
  ex->add_option("--n-boot", ex_boot, "Bootstrap realizations")->capture_default_str();
  ex->add_flag("--published-estimates", ex_published, "Use the published estimates instead of refitting");
  ex->add_flag("--extended", ex_extended, "inhom_poisson on [0,1] x [0,10] with a 20 x 200 grid");
  add_seed(ex, ex_seed);

  std::vector<const char*> argv{"ppcalib"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim->parsed()) {
      const ModelSpec model = sim_model.build();
      const Window window = io::parse_window(sim_window);
      RngStream rng(sim_seed, 0);
      const PointPattern p = sample_pattern(model, window, sim_chain.config(), rng);
      io::write_pattern(p, sim_out);
      std::cout << "wrote " << p.size() << " points to " << sim_out << '\n';
    } else if (fit->parsed()) {
      const PointPattern p = load_pattern(fit_pattern, fit_window);
      const Family fam = parse_family(fit_family);
      const auto fixed = parse_fixed(fit_fixed);
      const auto basis = parse_basis(fit_basis);
      FitResult res = [&] {
        if (fam == Family::poisson) return fit_poisson(p, basis);
        if (!fixed.contains("r")) throw UsageError("--fixed r=<radius> is required for Gibbs fits");
        if (fam == Family::geyer && !fixed.contains("alpha")) throw UsageError("--fixed alpha=<value> is required for geyer");
        MpleOptions mo;
        mo.grid = fit_grid;
        return fit_gibbs_mple(p, fam, {fixed.at("r"), fixed.contains("alpha") ? fixed.at("alpha") : 0.0}, basis, mo);
      }();
      print_parameters(res);
      const std::string doc = io::fit_to_json(res).dump(2) + "\n";
      if (fit_out.empty()) {
        std::cout << doc;
      } else {
        io::write_text(fit_out, doc);
      }
    } else if (cal->parsed()) {
      const PointPattern p = load_pattern(cal_pattern, cal_window);
      const ModelSpec model = cal_model.build();
      CalibrationOptions opt;
      opt.K = cal_K;
      opt.bins = cal_bins;
      opt.level = cal_level;
      opt.n_boot = cal_boot;
      opt.force_empirical = cal_empirical;
      opt.mcmc = cal_chain.config();
      opt.threads = threads;
      const bool exact = !is_gibbs(model) && !cal_empirical;
      opt.band = cal_band.empty() ? (exact ? BandKind::binomial_null : BandKind::bootstrap) : parse_band(cal_band);
      const CalibrationReport rep = calibrate(p, model, PixelGrid(p.window(), cal_nx, cal_ny), cal_seed, opt);
      write_report(cal_out, rep, p, model);
      print_report(rep);
      std::cout << "report written to " << cal_out << '\n';
    } else if (nt->parsed()) {
      const PointPattern p = load_pattern(nt_pattern, nt_window);
      const ModelSpec model = nt_model.build();
      json out{{"observed_points", p.size()}};
      NTestResult r;
      if (!is_gibbs(model) && !nt_empirical) {
        r = exact_n_test(p.size(), model, p.window());
        out["kind"] = "exact";
        out["expected_points"] = integrate_intensity(model, p.window());
      } else {
        const auto reps = sample_batch(model, p.window(), nt_K, nt_chain.config(), derive_seed(nt_seed, "replicates"), threads);
        r = n_test(p, reps);
        out["kind"] = "empirical";
        out["K"] = nt_K;
      }
      out["delta"] = r.delta;
      out["inconsistent"] = r.inconsistent;
      std::cout << out.dump(2) << '\n';
    } else if (ex->parsed()) {
      ExperimentConfig cfg = experiment_config(ex_name, ex_published, ex_extended);
      cfg.seed = ex_seed;
      cfg.K = ex_K;
      cfg.bins = ex_bins;
      cfg.n_boot = ex_boot;
      cfg.mcmc = ex_chain.config();
      cfg.threads = threads;
      const auto dir = ex_out.empty() ? std::filesystem::path(cfg.name) : std::filesystem::path(ex_out);
      const ExperimentResult res = run_experiment(cfg);
      write_experiment(res, dir);
      std::cout << cfg.name << ": observed " << res.observation.size() << " points\n";
      for (const auto& o : res.outcomes) {
        std::cout << "  " << std::left << std::setw(22) << o.label << "bins";
        for (const auto c : o.report.hist.bin_counts) std::cout << ' ' << c;
        std::cout << "  " << dispersion_name(o.report.dispersion.verdict) << "  N-test " << o.report.ntest.delta << '\n';
      }
      std::cout << "reports written to " << dir.string() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ppcalib::cli
