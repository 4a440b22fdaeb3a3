#pragma once

#include <cstdint>

#include "genatk/tensor.hpp"

namespace genatk {

// n trainable embedding rows prepended to both Siamese branches.
class SoftPrompt {
 public:
  SoftPrompt() = default;
  explicit SoftPrompt(Tensor embeddings);

  // Xavier uniform with fan_in = n, fan_out = d: U(−√(6/(n+d)), +√(6/(n+d))).
  static SoftPrompt xavier_uniform(std::size_t n, std::size_t d, std::uint64_t seed);
  static double xavier_bound(std::size_t n, std::size_t d);

  const Tensor& embeddings() const { return embeddings_; }
  Tensor& embeddings() { return embeddings_; }
  std::size_t length() const { return embeddings_.rows(); }
  std::size_t dim() const { return embeddings_.cols(); }

 private:
  Tensor embeddings_;
};

}  // namespace genatk
