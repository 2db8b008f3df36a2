#ifndef PPCALIB_IO_HPP
#define PPCALIB_IO_HPP

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppcalib/calib.hpp"
#include "ppcalib/core.hpp"
#include "ppcalib/fit.hpp"
#include "ppcalib/models.hpp"

namespace ppcalib::io {

using json = nlohmann::json;

/// Malformed input file or document. The message names the offending field
/// or line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json window_to_json(const Window& w);
Window window_from_json(const json& j);
/// "x0,x1,y0,y1"
Window parse_window(const std::string& text);

/// Sidecar holding the window of a pattern file: "pts.csv" -> "pts.window.json".
std::filesystem::path window_sidecar(const std::filesystem::path& csv);

/// CSV with header `x,y`, coordinates written with 17 significant digits.
std::string pattern_to_csv(const PointPattern& pattern);
void write_pattern(const PointPattern& pattern, const std::filesystem::path& csv);
/// Reads the CSV; the window comes from `window` if given, else the sidecar.
PointPattern read_pattern(const std::filesystem::path& csv, const std::optional<Window>& window = std::nullopt);
std::vector<Point> parse_points_csv(const std::string& text);

/// {"family": ..., "basis": [...], "theta": [...], "gamma":, "r":, "alpha":, "beta":}
/// A -inf intercept is written as the string "-inf".
json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const json& j);
ModelSpec read_model(const std::filesystem::path& path);

/// Model document plus "log_objective", "converged", "n_iterations",
/// "gradient_norm" and "message".
json fit_to_json(const FitResult& fit);
FitResult fit_from_json(const json& j);

struct PixelRow {
  std::size_t s = 0;
  std::size_t x_index = 0;
  std::size_t y_index = 0;
  std::int64_t count = 0;
  double pit = 0.0;
  std::optional<std::int64_t> rank;
};

/// One row per pixel: s,x_index,y_index,count,pit,rank (rank empty for exact PITs).
std::string pixels_to_csv(const PitVector& pit);
std::vector<PixelRow> parse_pixels_csv(const std::string& text);

json histogram_to_json(const HistogramReport& hist);
json report_to_json(const CalibrationReport& report);

/// Bar chart with one rect per bin and dashed band lines.
std::string histogram_svg(const HistogramReport& hist, const std::string& title);
/// One rect per pixel on a diverging scale centred at 0.5 (equivalently
/// (K + 1) / 2 for ranks), with the pattern drawn as small circles.
std::string spatial_map_svg(const PitVector& pit, const PointPattern& pattern, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ppcalib::io

#endif  // PPCALIB_IO_HPP
