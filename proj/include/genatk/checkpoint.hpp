#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "genatk/encoder.hpp"
#include "genatk/soft_prompt.hpp"

namespace genatk {

// File layout: 8-byte magic "GENATKCK", u32 format version, u64 header
// length, JSON header, then little-endian f32 tensor data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind { kModel, kSoftPrompt };

std::string to_string(CheckpointKind kind);

struct TensorEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;  // bytes from the start of the payload
  std::size_t count = 0;   // f32 elements
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kModel;
  EncoderConfig config;
  TensorMap tensors;
  std::string vocab_digest;
  std::string manifest;  // manifest file name, relative to the checkpoint
};

Checkpoint model_checkpoint(const ModelParams& params, std::string manifest = {});
Checkpoint prompt_checkpoint(const SoftPrompt& prompt, const EncoderConfig& config,
                             std::string manifest = {});

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Rejects bad magic, unknown versions, vocab mismatches, directories that do
// not tile the payload, and non-finite values.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Loads a model checkpoint and checks its tensor set against the config.
ModelParams load_model(const std::filesystem::path& path);
SoftPrompt load_prompt(const std::filesystem::path& path);

nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

}  // namespace genatk
