#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "genatk/tensor.hpp"

namespace genatk::ad {

using NodeId = std::size_t;

enum class OpKind {
  kLeaf,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAddRowBias,
  kGelu,
  kLayerNorm,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kGatherRows,
  kSliceRows,
  kSliceCols,
  kConcatRows,
  kConcatCols,
  kSelectSum,
  kSum,
  kAbs,
  kSigmoid,
  kLog,
};

const char* op_name(OpKind op);

// What a leaf represents. Only trainable and perturbable leaves are reported
// by backward(); constants still receive adjoints internally.
enum class LeafKind { kConstant, kTrainable, kPerturbable };

struct TapeNode {
  OpKind op = OpKind::kLeaf;
  LeafKind leaf = LeafKind::kConstant;
  std::vector<NodeId> inputs;
  Tensor value;
  std::vector<Tensor> saved;
  std::vector<std::size_t> index;  // gather ids, slice offsets, select coordinates
  std::vector<bool> mask;          // softmax column mask (true = attend)
  double scalar = 0.0;             // scale factor, clamp floor, epsilon
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  explicit operator bool() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

class Gradients {
 public:
  Gradients(const Tape* tape, std::vector<Tensor> adjoints)
      : tape_(tape), adjoints_(std::move(adjoints)) {}

  // Zero tensor of the node's shape when the node was not reached.
  Tensor wrt(Var v) const;
  bool reached(Var v) const { return !adjoints_.at(v.id()).empty(); }
  // Leaves marked trainable or perturbable, in creation order.
  std::vector<Var> reported_leaves() const;

 private:
  const Tape* tape_;
  std::vector<Tensor> adjoints_;
};

// Append-only record of a forward computation. backward() walks the nodes in
// strict reverse creation order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, LeafKind kind);
  Var constant(Tensor value) { return leaf(std::move(value), LeafKind::kConstant); }
  Var trainable(Tensor value) { return leaf(std::move(value), LeafKind::kTrainable); }
  Var perturbable(Tensor value) { return leaf(std::move(value), LeafKind::kPerturbable); }

  Var push(TapeNode node);
  const TapeNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  // Loss must be a single-element tensor produced on this tape.
  Gradients backward(Var loss) const;

 private:
  std::vector<TapeNode> nodes_;
};

// ---- Operations. No broadcasting except add_row_bias. ----

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var add_row_bias(Var x, Var bias);
Var gelu(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
// Optional column mask: masked-out columns receive probability exactly 0.
Var softmax_rows(Var x, const std::vector<bool>& column_mask = {});
Var log_softmax_rows(Var x);
Var gather_rows(Var table, std::span<const std::size_t> ids);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
// Scalar Σ_k x[rows[k], cols[k]].
Var select_sum(Var x, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
Var sum(Var x);
// Sum of same-shaped terms as a chain of add nodes.
Var add_all(std::span<const Var> terms);
Var abs(Var x);
Var sigmoid(Var x);
// Natural log of max(x, floor); the gradient is zero where the floor binds.
Var log_floor(Var x, double floor);

// ---- Eager kernels shared with inference-only code and tests. ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

}  // namespace genatk::ad
