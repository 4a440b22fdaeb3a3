#include "genatk/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "genatk/errors.hpp"
#include "genatk/io.hpp"

namespace genatk {

namespace {

constexpr std::string_view kMagic = "GENATKCK";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

CheckpointKind kind_from_string(const std::string& s) {
  if (s == "model") return CheckpointKind::kModel;
  if (s == "soft_prompt") return CheckpointKind::kSoftPrompt;
  throw FormatError("unknown checkpoint kind '" + s + "'");
}

}  // namespace

std::string to_string(CheckpointKind kind) {
  return kind == CheckpointKind::kModel ? "model" : "soft_prompt";
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},       {"max_len", c.max_len},   {"dropout", c.dropout},
          {"tied_head", c.tied_head}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.tied_head = j.at("tied_head").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad encoder config: ") + e.what());
  }
  return c;
}

Checkpoint model_checkpoint(const ModelParams& params, std::string manifest) {
  return {CheckpointKind::kModel, params.config, params.tensors, vocab::digest(), std::move(manifest)};
}

Checkpoint prompt_checkpoint(const SoftPrompt& prompt, const EncoderConfig& config, std::string manifest) {
  return {CheckpointKind::kSoftPrompt, config, {{"prompt", prompt.embeddings()}}, vocab::digest(),
          std::move(manifest)};
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string payload;
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}, {"count", t.size()}});
    for (double v : t.data()) put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"kind", to_string(ckpt.kind)},
                           {"encoder", to_json(ckpt.config)},
                           {"vocab_digest", ckpt.vocab_digest},
                           {"manifest", ckpt.manifest},
                           {"payload_bytes", payload.size()},
                           {"tensors", dir}};
  const std::string h = header.dump();
  std::string out(kMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, h.size());
  out += h;
  out += payload;
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const std::size_t fixed = kMagic.size() + 12;
  if (bytes.size() < fixed || bytes.substr(0, kMagic.size()) != kMagic)
    throw FormatError("not a checkpoint (bad magic)");
  const auto version = get_le(bytes, kMagic.size(), 4);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le(bytes, kMagic.size() + 4, 8);
  if (header_len > bytes.size() - fixed) throw FormatError("checkpoint header truncated");
  const std::string_view payload = bytes.substr(fixed + header_len);

  Checkpoint ckpt;
  std::vector<TensorEntry> entries;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(fixed, header_len));
    if (header.at("format_version").get<std::uint32_t>() != version)
      throw FormatError("header and preamble disagree on the format version");
    ckpt.kind = kind_from_string(header.at("kind").get<std::string>());
    ckpt.config = encoder_config_from_json(header.at("encoder"));
    ckpt.vocab_digest = header.at("vocab_digest").get<std::string>();
    ckpt.manifest = header.at("manifest").get<std::string>();
    if (header.at("payload_bytes").get<std::size_t>() != payload.size())
      throw FormatError("payload is " + std::to_string(payload.size()) + " bytes, header says " +
                        header.at("payload_bytes").dump());
    for (const auto& e : header.at("tensors")) {
      entries.push_back({e.at("name").get<std::string>(), e.at("shape").get<std::vector<std::size_t>>(),
                         e.at("offset").get<std::size_t>(), e.at("count").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  if (ckpt.vocab_digest != vocab::digest())
    throw FormatError("checkpoint was written with a different vocabulary");

  // The directory must tile the payload: sorted by offset, no gaps, no overlap.
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });
  std::size_t cursor = 0;
  for (const auto& e : sorted) {
    if (e.offset != cursor) throw FormatError("tensor '" + e.name + "' does not start where the previous one ends");
    std::size_t n = 1;
    for (auto d : e.shape) n *= d;
    if (n != e.count) throw FormatError("tensor '" + e.name + "' count disagrees with its shape");
    cursor += 4 * e.count;
  }
  if (cursor != payload.size()) throw FormatError("tensor directory does not cover the payload");

  for (const auto& e : entries) {
    std::vector<double> data(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      const float f = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(payload, e.offset + 4 * i, 4)));
      if (!std::isfinite(f)) throw NumericError("non-finite value in tensor '" + e.name + "'");
      data[i] = f;
    }
    if (!ckpt.tensors.emplace(e.name, Tensor(e.shape, std::move(data))).second)
      throw FormatError("duplicate tensor '" + e.name + "'");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ModelParams load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != CheckpointKind::kModel) throw FormatError(path.string() + " holds a soft prompt, not a model");
  ckpt.config.validate();
  const ModelParams expected = ModelParams::init(ckpt.config, 0);
  if (expected.tensors.size() != ckpt.tensors.size())
    throw FormatError(path.string() + ": tensor set does not match the encoder config");
  for (const auto& [name, t] : expected.tensors) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end() || !it->second.same_shape(t))
      throw FormatError(path.string() + ": tensor '" + name + "' missing or misshapen");
  }
  return {ckpt.config, std::move(ckpt.tensors)};
}

SoftPrompt load_prompt(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != CheckpointKind::kSoftPrompt || !ckpt.tensors.contains("prompt"))
    throw FormatError(path.string() + " is not a soft-prompt checkpoint");
  return SoftPrompt(std::move(ckpt.tensors.at("prompt")));
}

}  // namespace genatk
