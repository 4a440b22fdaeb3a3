#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace genatk {

// Provenance for one CLI invocation. Every artifact a command writes names
// the manifest that sits beside it.
struct RunManifest {
  std::string command;
  std::string config;  // effective configuration, re-loadable with --config
  std::uint64_t seed = 0;
  std::string git_describe;
  std::string started_utc;
  std::string finished_utc;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

std::string utc_now();
std::string git_describe();

}  // namespace genatk
