#include "genatk/manifest.hpp"

#include <chrono>
#include <ctime>

#include "genatk/digest.hpp"
#include "genatk/errors.hpp"

#ifndef GENATK_GIT_DESCRIBE
#define GENATK_GIT_DESCRIBE "unknown"
#endif

namespace genatk {

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string git_describe() { return GENATK_GIT_DESCRIBE; }

void RunManifest::add_input(const std::filesystem::path& path) { inputs[path.string()] = sha256_file(path); }

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs[path.filename().string()] = sha256_file(path);
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},         {"config", config},       {"seed", seed},
          {"git_describe", git_describe}, {"started_utc", started_utc},
          {"finished_utc", finished_utc}, {"inputs", inputs},       {"outputs", outputs}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.git_describe = j.at("git_describe").get<std::string>();
    m.started_utc = j.at("started_utc").get<std::string>();
    m.finished_utc = j.at("finished_utc").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

}  // namespace genatk
