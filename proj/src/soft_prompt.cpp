#include "genatk/soft_prompt.hpp"

#include <cmath>
#include <random>

#include "genatk/errors.hpp"

namespace genatk {

SoftPrompt::SoftPrompt(Tensor embeddings) : embeddings_(std::move(embeddings)) {
  if (embeddings_.rank() != 2 || embeddings_.rows() < 1) {
    throw ContractError("soft prompt needs at least one row, got " + embeddings_.shape_str());
  }
}

double SoftPrompt::xavier_bound(std::size_t n, std::size_t d) {
  return std::sqrt(6.0 / static_cast<double>(n + d));
}

SoftPrompt SoftPrompt::xavier_uniform(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw ContractError("soft prompt dimensions must be positive");
  const double bound = xavier_bound(n, d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({n, d});
  for (auto& v : t.raw()) v = dist(rng);
  return SoftPrompt(std::move(t));
}

}  // namespace genatk
