#pragma once

#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace gradcheck {

struct OpCase {
  std::string name;
  Fn fn;
  std::function<std::vector<Tensor>(std::mt19937_64&)> inputs;
};

// Inputs for kinked ops are kept away from the kink so central differences
// with h = 1e-5 never straddle it.
inline Tensor away_from_zero(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.raw()) v = sign(rng) ? v : -v;
  return t;
}

inline std::vector<OpCase> all_op_cases() {
  using V = std::vector<ad::Var>;
  std::vector<OpCase> cases;
  auto add = [&](std::string name, Fn fn, std::function<std::vector<Tensor>(std::mt19937_64&)> in) {
    cases.push_back({std::move(name), std::move(fn), std::move(in)});
  };

  add("matmul", [](ad::Tape&, const V& v) { return ad::matmul(v[0], v[1]); },
      [](auto& r) { return std::vector{random_tensor({3, 4}, r), random_tensor({4, 5}, r)}; });
  add("transpose", [](ad::Tape&, const V& v) { return ad::transpose(v[0]); },
      [](auto& r) { return std::vector{random_tensor({3, 5}, r)}; });
  add("add", [](ad::Tape&, const V& v) { return ad::add(v[0], v[1]); },
      [](auto& r) { return std::vector{random_tensor({2, 3}, r), random_tensor({2, 3}, r)}; });
  add("add_same_input", [](ad::Tape&, const V& v) { return ad::add(v[0], v[0]); },
      [](auto& r) { return std::vector{random_tensor({2, 3}, r)}; });
  add("sub", [](ad::Tape&, const V& v) { return ad::sub(v[0], v[1]); },
      [](auto& r) { return std::vector{random_tensor({2, 3}, r), random_tensor({2, 3}, r)}; });
  add("mul", [](ad::Tape&, const V& v) { return ad::mul(v[0], v[1]); },
      [](auto& r) { return std::vector{random_tensor({3, 2}, r), random_tensor({3, 2}, r)}; });
  add("mul_square", [](ad::Tape&, const V& v) { return ad::mul(v[0], v[0]); },
      [](auto& r) { return std::vector{random_tensor({4}, r)}; });
  add("scale", [](ad::Tape&, const V& v) { return ad::scale(v[0], -2.5); },
      [](auto& r) { return std::vector{random_tensor({2, 2}, r)}; });
  add("add_scalar", [](ad::Tape&, const V& v) { return ad::add_scalar(v[0], 0.7); },
      [](auto& r) { return std::vector{random_tensor({3}, r)}; });
  add("add_row_bias", [](ad::Tape&, const V& v) { return ad::add_row_bias(v[0], v[1]); },
      [](auto& r) { return std::vector{random_tensor({4, 3}, r), random_tensor({3}, r)}; });
  add("gelu", [](ad::Tape&, const V& v) { return ad::gelu(v[0]); },
      [](auto& r) { return std::vector{random_tensor({3, 4}, r, -3.0, 3.0)}; });
  add("layer_norm", [](ad::Tape&, const V& v) { return ad::layer_norm(v[0], v[1], v[2]); },
      [](auto& r) {
        return std::vector{random_tensor({3, 6}, r, -2.0, 2.0), random_tensor({6}, r, 0.5, 1.5),
                           random_tensor({6}, r)};
      });
  add("softmax_rows", [](ad::Tape&, const V& v) { return ad::softmax_rows(v[0]); },
      [](auto& r) { return std::vector{random_tensor({3, 5}, r, -2.0, 2.0)}; });
  add("softmax_rows_masked",
      [](ad::Tape&, const V& v) { return ad::softmax_rows(v[0], {false, true, true, false, true}); },
      [](auto& r) { return std::vector{random_tensor({3, 5}, r, -2.0, 2.0)}; });
  add("log_softmax_rows", [](ad::Tape&, const V& v) { return ad::log_softmax_rows(v[0]); },
      [](auto& r) { return std::vector{random_tensor({4, 6}, r, -3.0, 3.0)}; });
  add("gather_rows",
      [](ad::Tape&, const V& v) {
        const std::size_t ids[] = {2, 0, 2, 4};
        return ad::gather_rows(v[0], ids);
      },
      [](auto& r) { return std::vector{random_tensor({5, 3}, r)}; });
  add("slice_rows", [](ad::Tape&, const V& v) { return ad::slice_rows(v[0], 1, 2); },
      [](auto& r) { return std::vector{random_tensor({4, 3}, r)}; });
  add("slice_cols", [](ad::Tape&, const V& v) { return ad::slice_cols(v[0], 2, 3); },
      [](auto& r) { return std::vector{random_tensor({3, 6}, r)}; });
  add("concat_rows",
      [](ad::Tape&, const V& v) {
        const ad::Var parts[] = {v[0], v[1], v[0]};
        return ad::concat_rows(parts);
      },
      [](auto& r) { return std::vector{random_tensor({2, 3}, r), random_tensor({1, 3}, r)}; });
  add("concat_cols",
      [](ad::Tape&, const V& v) {
        const ad::Var parts[] = {v[0], v[1]};
        return ad::concat_cols(parts);
      },
      [](auto& r) { return std::vector{random_tensor({3, 2}, r), random_tensor({3, 4}, r)}; });
  add("select_sum",
      [](ad::Tape&, const V& v) {
        const std::size_t rows[] = {0, 2, 2, 1};
        const std::size_t cols[] = {1, 0, 0, 3};
        return ad::select_sum(v[0], rows, cols);
      },
      [](auto& r) { return std::vector{random_tensor({3, 4}, r)}; });
  add("sum", [](ad::Tape&, const V& v) { return ad::sum(v[0]); },
      [](auto& r) { return std::vector{random_tensor({3, 3}, r)}; });
  add("add_all", [](ad::Tape&, const V& v) { return ad::add_all(v); },
      [](auto& r) {
        return std::vector{random_tensor({1}, r), random_tensor({1}, r), random_tensor({1}, r)};
      });
  add("abs", [](ad::Tape&, const V& v) { return ad::abs(v[0]); },
      [](auto& r) { return std::vector{away_from_zero({2, 4}, r)}; });
  add("sigmoid", [](ad::Tape&, const V& v) { return ad::sigmoid(v[0]); },
      [](auto& r) { return std::vector{random_tensor({5}, r, -4.0, 4.0)}; });
  add("log_floor", [](ad::Tape&, const V& v) { return ad::log_floor(v[0], 1e-12); },
      [](auto& r) { return std::vector{random_tensor({2, 3}, r, 0.05, 2.0)}; });
  add("attention_block",
      [](ad::Tape&, const V& v) {
        ad::Var scores = ad::scale(ad::matmul(v[0], ad::transpose(v[1])), 0.5);
        return ad::matmul(ad::softmax_rows(scores), v[2]);
      },
      [](auto& r) {
        return std::vector{random_tensor({4, 3}, r), random_tensor({4, 3}, r), random_tensor({4, 3}, r)};
      });
  return cases;
}

}  // namespace gradcheck
