#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "genatk/tensor.hpp"

namespace genatk {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
// Digest over names, shapes and exact bit patterns of every tensor.
std::string tensor_map_digest(const TensorMap& tensors);

}  // namespace genatk
