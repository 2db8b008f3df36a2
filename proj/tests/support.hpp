#ifndef PPCALIB_TESTS_SUPPORT_HPP
#define PPCALIB_TESTS_SUPPORT_HPP

#include <random>
#include <string>
#include <vector>

#include "ppcalib/core.hpp"

namespace test {

template <class Gen>
std::vector<ppcalib::Point> uniform_points(Gen& gen, std::size_t n, const ppcalib::Window& w) {
  std::uniform_real_distribution<double> ux(w.x_min(), w.x_max());
  std::uniform_real_distribution<double> uy(w.y_min(), w.y_max());
  std::vector<ppcalib::Point> pts(n);
  for (auto& p : pts) p = {ux(gen), uy(gen)};
  return pts;
}

/// Minimal well-formedness check: balanced, properly nested tags, quoted
/// attributes, and a single root element.
bool well_formed_xml(const std::string& text);

/// Number of occurrences of `needle` in `text`.
std::size_t count_substr(const std::string& text, const std::string& needle);

/// Fresh empty directory under the system temp directory.
std::string temp_dir(const std::string& name);

}  // namespace test

#endif  // PPCALIB_TESTS_SUPPORT_HPP
