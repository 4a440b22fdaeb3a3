#pragma once

#include <regex>
#include <string>
#include <vector>

// Text-level SVG inspection, independent of the writer.
namespace svgscan {

// Whole opening tag of the first element with the given id.
inline std::string element_with_id(const std::string& svg, const std::string& id) {
  const auto at = svg.find("id=\"" + id + "\"");
  if (at == std::string::npos) return {};
  const auto open = svg.rfind('<', at);
  const auto close = svg.find('>', at);
  return svg.substr(open, close - open + 1);
}

inline std::string attribute(const std::string& tag, const std::string& name) {
  const std::regex re("\\s" + name + "=\"([^\"]*)\"");
  std::smatch m;
  return std::regex_search(tag, m, re) ? m[1].str() : std::string{};
}

inline std::size_t vertex_count(const std::string& points) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : points) {
    if (c == ' ') in_token = false;
    else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

inline std::vector<std::string> tags(const std::string& svg, const std::string& must_contain) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = svg.find('<', pos)) != std::string::npos) {
    const auto end = svg.find('>', pos);
    std::string tag = svg.substr(pos, end - pos + 1);
    if (tag.find(must_contain) != std::string::npos) out.push_back(tag);
    pos = end;
  }
  return out;
}

}  // namespace svgscan
