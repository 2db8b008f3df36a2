#include "ppcalib/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ppcalib::io {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = strip(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ParseError(what + ": '" + t + "' is not a number");
  }
  if (used != t.size()) throw ParseError(what + ": '" + t + "' is not a number");
  return v;
}

double number_field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("model JSON: missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError(std::string("model JSON: field '") + key + "' must be a number");
  return v.get<double>();
}

json coefficient_to_json(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return v;
}

double coefficient_from_json(const json& v, std::size_t i) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && v.get<std::string>() == "-inf") return -std::numeric_limits<double>::infinity();
  throw ParseError("model JSON: field 'theta' entry " + std::to_string(i) + " must be a number");
}

json intensity_fields(const LogLinearIntensity& f) {
  json basis = json::array();
  json theta = json::array();
  for (std::size_t i = 0; i < f.basis().size(); ++i) {
    basis.push_back(f.basis()[i].name());
    theta.push_back(coefficient_to_json(f.theta()[i]));
  }
  return {{"basis", basis}, {"theta", theta}};
}

LogLinearIntensity intensity_from_json(const json& j) {
  if (!j.contains("theta") || !j.at("theta").is_array()) throw ParseError("model JSON: missing array field 'theta'");
  std::vector<double> theta;
  for (std::size_t i = 0; i < j.at("theta").size(); ++i) theta.push_back(coefficient_from_json(j.at("theta")[i], i));
  std::vector<Monomial> basis;
  if (j.contains("basis")) {
    if (!j.at("basis").is_array()) throw ParseError("model JSON: field 'basis' must be an array of terms");
    for (const auto& t : j.at("basis")) {
      if (!t.is_string()) throw ParseError("model JSON: field 'basis' entries must be strings");
      try {
        basis.push_back(Monomial::parse(t.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("model JSON: field 'basis': ") + e.what());
      }
    }
  } else {
    basis.push_back(Monomial{});
  }
  try {
    return LogLinearIntensity(std::move(basis), std::move(theta));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model JSON: field 'theta'/'basis': ") + e.what());
  }
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

// Diverging blue-white-red scale; t in [0, 1], 0.5 maps to white.
std::string diverging_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double a = std::abs(t - 0.5) * 2.0;
  int r = 255;
  int g = 255;
  int b = 255;
  if (t < 0.5) {
    r = static_cast<int>(std::lround(255.0 - a * (255.0 - 33.0)));
    g = static_cast<int>(std::lround(255.0 - a * (255.0 - 102.0)));
    b = static_cast<int>(std::lround(255.0 - a * (255.0 - 172.0)));
  } else {
    r = static_cast<int>(std::lround(255.0 - a * (255.0 - 178.0)));
    g = static_cast<int>(std::lround(255.0 - a * (255.0 - 24.0)));
    b = static_cast<int>(std::lround(255.0 - a * (255.0 - 43.0)));
  }
  std::ostringstream os;
  os << "rgb(" << r << ',' << g << ',' << b << ')';
  return os.str();
}

}  // namespace

json window_to_json(const Window& w) { return {{"window", {w.x_min(), w.x_max(), w.y_min(), w.y_max()}}}; }

Window window_from_json(const json& j) {
  const json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("window")) throw ParseError("window JSON: missing field 'window'");
    arr = &j.at("window");
  }
  if (!arr->is_array() || arr->size() != 4) throw ParseError("window JSON: field 'window' must be [x_min, x_max, y_min, y_max]");
  for (const auto& v : *arr) {
    if (!v.is_number()) throw ParseError("window JSON: field 'window' entries must be numbers");
  }
  try {
    return {(*arr)[0].get<double>(), (*arr)[1].get<double>(), (*arr)[2].get<double>(), (*arr)[3].get<double>()};
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("window JSON: ") + e.what());
  }
}

Window parse_window(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw ParseError("--window expects x_min,x_max,y_min,y_max");
  try {
    return {parse_number(parts[0], "window"), parse_number(parts[1], "window"), parse_number(parts[2], "window"),
            parse_number(parts[3], "window")};
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("window: ") + e.what());
  }
}

std::filesystem::path window_sidecar(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".window.json");
  return p;
}

std::string pattern_to_csv(const PointPattern& pattern) {
  std::ostringstream os;
  os << std::setprecision(17) << "x,y\n";
  for (const auto& p : pattern.points()) os << p.x << ',' << p.y << '\n';
  return os.str();
}

void write_pattern(const PointPattern& pattern, const std::filesystem::path& csv) {
  write_text(csv, pattern_to_csv(pattern));
  write_text(window_sidecar(csv), window_to_json(pattern.window()).dump(2) + "\n");
}

std::vector<Point> parse_points_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || strip(line) != "x,y") throw ParseError("pattern CSV: expected header 'x,y'");
  std::vector<Point> pts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip(line);
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    const std::string where = "pattern CSV line " + std::to_string(lineno);
    if (parts.size() != 2) throw ParseError(where + ": expected two columns");
    pts.push_back({parse_number(parts[0], where), parse_number(parts[1], where)});
  }
  return pts;
}

PointPattern read_pattern(const std::filesystem::path& csv, const std::optional<Window>& window) {
  auto pts = parse_points_csv(read_text(csv));
  Window w = window ? *window : [&] {
    const auto side = window_sidecar(csv);
    if (!std::filesystem::exists(side)) {
      throw ParseError("no window given and sidecar " + side.string() + " not found");
    }
    try {
      return window_from_json(json::parse(read_text(side)));
    } catch (const json::exception& e) {
      throw ParseError("window JSON: " + std::string(e.what()));
    }
  }();
  try {
    return PointPattern(w, std::move(pts));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("pattern CSV: ") + e.what());
  }
}

json model_to_json(const ModelSpec& model) {
  return std::visit(Overloaded{[](const PoissonModel& m) {
                                 json j = intensity_fields(m.intensity);
                                 j["family"] = "poisson";
                                 return j;
                               },
                               [](const StraussModel& m) {
                                 json j = intensity_fields(m.activity);
                                 j["family"] = "strauss";
                                 j["gamma"] = m.gamma;
                                 j["r"] = m.r;
                                 return j;
                               },
                               [](const GeyerModel& m) {
                                 return json{{"family", "geyer"}, {"beta", m.beta}, {"gamma", m.gamma},
                                             {"r", m.r},           {"alpha", m.alpha}};
                               }},
                    model);
}

ModelSpec model_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model JSON: expected an object");
  if (!j.contains("family") || !j.at("family").is_string()) throw ParseError("model JSON: missing string field 'family'");
  Family family{};
  try {
    family = parse_family(j.at("family").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model JSON: field 'family': ") + e.what());
  }
  ModelSpec model = [&]() -> ModelSpec {
    switch (family) {
      case Family::poisson:
        return PoissonModel{intensity_from_json(j)};
      case Family::strauss:
        return StraussModel{intensity_from_json(j), number_field(j, "gamma"), number_field(j, "r")};
      case Family::geyer:
        return GeyerModel{number_field(j, "beta"), number_field(j, "gamma"), number_field(j, "r"),
                          number_field(j, "alpha")};
    }
    throw ParseError("model JSON: unknown family");
  }();
  try {
    validate(model);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model JSON: field ") + e.what());
  }
  return model;
}

ModelSpec read_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw ParseError("model JSON " + path.string() + ": " + e.what());
  }
}

json fit_to_json(const FitResult& fit) {
  json j = model_to_json(fit.model);
  j["log_objective"] = coefficient_to_json(fit.log_objective);
  j["converged"] = fit.converged;
  j["n_iterations"] = fit.n_iterations;
  j["gradient_norm"] = fit.gradient_norm;
  j["message"] = fit.message;
  // Convenience reading of the fitted level: lambda-hat or activity scale.
  std::visit(Overloaded{[&](const PoissonModel& m) { j["intercept_scale"] = std::exp(m.intensity.theta()[m.intensity.intercept_index()]); },
                        [&](const StraussModel& m) { j["intercept_scale"] = std::exp(m.activity.theta()[m.activity.intercept_index()]); },
                        [&](const GeyerModel& m) { j["log_beta"] = std::log(m.beta); }},
             fit.model);
  return j;
}

FitResult fit_from_json(const json& j) {
  FitResult out{model_from_json(j), 0.0, false, 0, 0.0, {}};
  if (j.contains("log_objective")) out.log_objective = coefficient_from_json(j.at("log_objective"), 0);
  out.converged = j.value("converged", false);
  out.n_iterations = j.value("n_iterations", 0);
  out.gradient_norm = j.value("gradient_norm", 0.0);
  out.message = j.value("message", std::string{});
  return out;
}

std::string pixels_to_csv(const PitVector& pit) {
  std::ostringstream os;
  os << std::setprecision(17) << "s,x_index,y_index,count,pit,rank\n";
  for (std::size_t s = 0; s < pit.values.size(); ++s) {
    os << s << ',' << pit.grid.x_index(s) << ',' << pit.grid.y_index(s) << ',' << pit.counts[s] << ','
       << pit.values[s] << ',';
    if (pit.kind == PitKind::empirical_rank) os << pit.ranks[s];
    os << '\n';
  }
  return os.str();
}

std::vector<PixelRow> parse_pixels_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || strip(line) != "s,x_index,y_index,count,pit,rank") {
    throw ParseError("pixel CSV: unexpected header");
  }
  std::vector<PixelRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip(line);
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    const std::string where = "pixel CSV line " + std::to_string(lineno);
    if (parts.size() != 6) throw ParseError(where + ": expected six columns");
    PixelRow r;
    r.s = static_cast<std::size_t>(parse_number(parts[0], where));
    r.x_index = static_cast<std::size_t>(parse_number(parts[1], where));
    r.y_index = static_cast<std::size_t>(parse_number(parts[2], where));
    r.count = static_cast<std::int64_t>(parse_number(parts[3], where));
    r.pit = parse_number(parts[4], where);
    if (!strip(parts[5]).empty()) r.rank = static_cast<std::int64_t>(parse_number(parts[5], where));
    rows.push_back(r);
  }
  return rows;
}

json histogram_to_json(const HistogramReport& hist) {
  return {{"bin_counts", hist.bin_counts},
          {"bin_edges", hist.bin_edges},
          {"lower_band", hist.lower_band},
          {"upper_band", hist.upper_band},
          {"band_kind", band_kind_name(hist.band_kind)},
          {"n_values", hist.n_values},
          {"inside_band", hist.inside_band()}};
}

json report_to_json(const CalibrationReport& rep) {
  json j;
  j["pit_kind"] = pit_kind_name(rep.pit.kind);
  j["grid"] = {{"nx", rep.pit.grid.nx()}, {"ny", rep.pit.grid.ny()}};
  j["window"] = window_to_json(rep.pit.grid.window())["window"];
  if (rep.pit.kind == PitKind::empirical_rank) j["rank_scale"] = rep.pit.rank_scale;
  j["histogram"] = histogram_to_json(rep.hist);
  j["tests"] = {{"chi_square_statistic", rep.tests.chi_square_statistic},
                {"chi_square_p", rep.tests.chi_square_p},
                {"ks_statistic", rep.tests.ks_statistic},
                {"ks_p", rep.tests.ks_p},
                {"dependence_caveat", rep.tests.dependence_caveat}};
  j["n_test"] = {{"delta", rep.ntest.delta}, {"inconsistent", rep.ntest.inconsistent}, {"kind", rep.ntest_kind}};
  j["dispersion"] = {{"verdict", dispersion_name(rep.dispersion.verdict)},
                     {"outer_count", rep.dispersion.outer_count},
                     {"null_lower", rep.dispersion.null_lower},
                     {"null_upper", rep.dispersion.null_upper}};
  j["underdispersed"] = rep.dispersion.verdict == Dispersion::underdispersed;
  j["overdispersed"] = rep.dispersion.verdict == Dispersion::overdispersed;
  j["column_trend"] = {{"spearman_rho", rep.trend.rho}, {"p_value", rep.trend.p_value}};
  if (!rep.replicate_sizes.empty()) {
    const auto [mn, mx] = std::minmax_element(rep.replicate_sizes.begin(), rep.replicate_sizes.end());
    double mean = 0.0;
    for (const auto n : rep.replicate_sizes) mean += static_cast<double>(n);
    mean /= static_cast<double>(rep.replicate_sizes.size());
    j["replicates"] = {{"K", rep.replicate_sizes.size()}, {"mean_size", mean}, {"min_size", *mn}, {"max_size", *mx}};
  }
  j["seed"] = rep.seed;
  return j;
}

std::string histogram_svg(const HistogramReport& hist, const std::string& title) {
  constexpr double kW = 400.0;
  constexpr double kH = 300.0;
  constexpr double kPad = 40.0;
  double top = 1.0;
  for (const auto c : hist.bin_counts) top = std::max(top, static_cast<double>(c));
  for (const auto u : hist.upper_band) top = std::max(top, u);
  top *= 1.1;
  const double plot_w = kW - 2.0 * kPad;
  const double plot_h = kH - 2.0 * kPad;
  const double bar_w = plot_w / static_cast<double>(hist.bin_counts.size());
  auto y_of = [&](double v) { return kH - kPad - v / top * plot_h; };
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
     << ' ' << kH << "\">\n"
     << "<title>" << xml_escape(title) << "</title>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
     << "</text>\n<g class=\"bins\">\n";
  for (std::size_t b = 0; b < hist.bin_counts.size(); ++b) {
    const double c = static_cast<double>(hist.bin_counts[b]);
    os << "<rect x=\"" << kPad + static_cast<double>(b) * bar_w << "\" y=\"" << y_of(c) << "\" width=\"" << bar_w
       << "\" height=\"" << c / top * plot_h << "\" fill=\"#bbbbbb\" stroke=\"#333333\"/>\n";
  }
  os << "</g>\n";
  if (hist.band_kind != BandKind::none) {
    os << "<g class=\"band\" stroke=\"#000000\" stroke-dasharray=\"5,4\">\n";
    for (std::size_t b = 0; b < hist.bin_counts.size(); ++b) {
      const double x0 = kPad + static_cast<double>(b) * bar_w;
      for (const double v : {hist.lower_band[b], hist.upper_band[b]}) {
        os << "<line x1=\"" << x0 << "\" y1=\"" << y_of(v) << "\" x2=\"" << x0 + bar_w << "\" y2=\"" << y_of(v)
           << "\"/>\n";
      }
    }
    os << "</g>\n";
  }
  os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"#000000\"/>\n";
  for (std::size_t b = 0; b < hist.bin_edges.size(); ++b) {
    os << "<text x=\"" << kPad + static_cast<double>(b) * bar_w << "\" y=\"" << kH - kPad + 15
       << "\" text-anchor=\"middle\" font-size=\"10\">" << hist.bin_edges[b] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string spatial_map_svg(const PitVector& pit, const PointPattern& pattern, const std::string& title) {
  const auto& grid = pit.grid;
  const Window& w = grid.window();
  constexpr double kPlot = 400.0;
  constexpr double kPad = 30.0;
  const double scale = kPlot / std::max(w.width(), w.height());
  const double width = w.width() * scale;
  const double height = w.height() * scale;
  auto sx = [&](double x) { return kPad + (x - w.x_min()) * scale; };
  auto sy = [&](double y) { return kPad + height - (y - w.y_min()) * scale; };
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width + 2 * kPad << "\" height=\""
     << height + 2 * kPad << "\">\n"
     << "<title>" << xml_escape(title) << "</title>\n<g class=\"pixels\" stroke=\"none\">\n";
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const Window px = grid.pixel(s);
    os << "<rect x=\"" << sx(px.x_min()) << "\" y=\"" << sy(px.y_max()) << "\" width=\"" << px.width() * scale
       << "\" height=\"" << px.height() * scale << "\" fill=\"" << diverging_color(pit.values[s]) << "\"/>\n";
  }
  os << "</g>\n<g class=\"points\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.8\">\n";
  for (const auto& p : pattern.points()) {
    os << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"2\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ppcalib::io
