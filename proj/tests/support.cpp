#include "support.hpp"

#include <cctype>
#include <filesystem>

namespace test {

bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t roots = 0;
  std::size_t i = 0;
  while ((i = s.find('<', i)) != std::string::npos) {
    const std::size_t end = s.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.starts_with("?") || tag.starts_with("!")) continue;
    if (tag.starts_with("/")) {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.ends_with("/");
    if (self_closing) tag.pop_back();
    std::size_t k = 0;
    while (k < tag.size() && !std::isspace(static_cast<unsigned char>(tag[k]))) ++k;
    const std::string name = tag.substr(0, k);
    if (name.empty()) return false;
    // Attributes: name="value" pairs.
    std::size_t quotes = 0;
    for (const char c : tag.substr(k)) {
      if (c == '<') return false;
      if (c == '"') ++quotes;
    }
    if (quotes % 2 != 0) return false;
    if (stack.empty()) ++roots;
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty() && roots == 1;
}

std::size_t count_substr(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t i = text.find(needle); i != std::string::npos; i = text.find(needle, i + needle.size())) ++n;
  return n;
}

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ppcalib_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace test
