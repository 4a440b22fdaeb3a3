#include "genatk/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "genatk/errors.hpp"

namespace genatk::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + t.shape_str());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

Tape* common_tape(Var a, Var b) {
  if (!a || !b || a.tape() != b.tape()) {
    throw ContractError("operands must live on the same tape");
  }
  return a.tape();
}

Tape* tape_of(Var a) {
  if (!a) throw ContractError("operand is not attached to a tape");
  return a.tape();
}

TapeNode make_node(OpKind op, std::vector<NodeId> inputs, Tensor value) {
  TapeNode n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  return n;
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor softmax_impl(const Tensor& x, const std::vector<bool>& mask) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (!mask.empty() && mask.size() != n) {
    throw DimensionError("softmax_rows: mask length " + std::to_string(mask.size()) +
                         " does not match " + std::to_string(n) + " columns");
  }
  auto on = [&](std::size_t j) { return mask.empty() || mask[j]; };
  Tensor y(x.shape(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (on(j)) mx = std::max(mx, x(i, j));
    if (!std::isfinite(mx)) throw ContractError("softmax_rows: every column is masked");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!on(j)) continue;
      y(i, j) = std::exp(x(i, j) - mx);
      total += y(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) y(i, j) /= total;
  }
  return y;
}

class Accumulator {
 public:
  explicit Accumulator(std::vector<Tensor>& adj) : adj_(adj) {}
  void add(NodeId id, Tensor g) {
    if (adj_[id].empty()) {
      adj_[id] = std::move(g);
    } else {
      adj_[id] += g;
    }
  }
  Tensor& slot(NodeId id, const Tensor& like) {
    if (adj_[id].empty()) adj_[id] = like.zeros_like();
    return adj_[id];
  }

 private:
  std::vector<Tensor>& adj_;
};

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kAddRowBias: return "add_row_bias";
    case OpKind::kGelu: return "gelu";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kLogSoftmaxRows: return "log_softmax_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSelectSum: return "select_sum";
    case OpKind::kSum: return "sum";
    case OpKind::kAbs: return "abs";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("detached Var has no value");
  return tape_->node(id_).value;
}

Tensor Gradients::wrt(Var v) const {
  const Tensor& g = adjoints_.at(v.id());
  if (g.empty()) return tape_->node(v.id()).value.zeros_like();
  return g;
}

std::vector<Var> Gradients::reported_leaves() const {
  std::vector<Var> out;
  for (NodeId i = 0; i < tape_->size(); ++i) {
    const auto& n = tape_->node(i);
    if (n.op == OpKind::kLeaf && n.leaf != LeafKind::kConstant) {
      out.emplace_back(const_cast<Tape*>(tape_), i);
    }
  }
  return out;
}

Var Tape::leaf(Tensor value, LeafKind kind) {
  TapeNode n = make_node(OpKind::kLeaf, {}, std::move(value));
  n.leaf = kind;
  return push(std::move(n));
}

Var Tape::push(TapeNode node) {
  if (!node.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(node.op));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw ContractError("loss does not belong to this tape");
  const Tensor& lv = node(loss.id()).value;
  if (lv.size() != 1) {
    throw ContractError("backward requires a scalar loss, got " + lv.shape_str());
  }
  std::vector<Tensor> adj(nodes_.size());
  Accumulator acc(adj);
  adj[loss.id()] = Tensor(lv.shape(), 1.0);

  for (NodeId id = loss.id() + 1; id-- > 0;) {
    if (adj[id].empty()) continue;
    const TapeNode& n = nodes_[id];
    const Tensor& g = adj[id];
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor ga(a.shape()), gb(b.shape());
        as_matrix(ga).noalias() = as_matrix(g) * as_matrix(b).transpose();
        as_matrix(gb).noalias() = as_matrix(a).transpose() * as_matrix(g);
        acc.add(n.inputs[0], std::move(ga));
        acc.add(n.inputs[1], std::move(gb));
        break;
      }
      case OpKind::kTranspose: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        Tensor ga(a.shape());
        as_matrix(ga) = as_matrix(g).transpose();
        acc.add(n.inputs[0], std::move(ga));
        break;
      }
      case OpKind::kAdd:
        acc.add(n.inputs[0], g);
        acc.add(n.inputs[1], g);
        break;
      case OpKind::kSub: {
        acc.add(n.inputs[0], g);
        Tensor neg = g;
        for (auto& v : neg.raw()) v = -v;
        acc.add(n.inputs[1], std::move(neg));
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor ga = g, gb = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] *= b[i];
          gb[i] *= a[i];
        }
        acc.add(n.inputs[0], std::move(ga));
        acc.add(n.inputs[1], std::move(gb));
        break;
      }
      case OpKind::kScale: {
        Tensor ga = g;
        for (auto& v : ga.raw()) v *= n.scalar;
        acc.add(n.inputs[0], std::move(ga));
        break;
      }
      case OpKind::kAddScalar:
        acc.add(n.inputs[0], g);
        break;
      case OpKind::kAddRowBias: {
        acc.add(n.inputs[0], g);
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor gb(b.shape(), 0.0);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
        acc.add(n.inputs[1], std::move(gb));
        break;
      }
      case OpKind::kGelu: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= gelu_slope(x[i]);
        acc.add(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kLayerNorm: {
        const Tensor& xhat = n.saved[0];
        const Tensor& rstd = n.saved[1];
        const Tensor& gamma = nodes_[n.inputs[1]].value;
        const std::size_t m = xhat.rows(), d = xhat.cols();
        Tensor gx(xhat.shape()), gg(gamma.shape(), 0.0), gbeta(gamma.shape(), 0.0);
        std::vector<double> dxhat(d);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            gg[j] += g(i, j) * xhat(i, j);
            gbeta[j] += g(i, j);
            dxhat[j] = g(i, j) * gamma[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat(i, j);
          }
          mean_d /= static_cast<double>(d);
          mean_dx /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            gx(i, j) = rstd[i] * (dxhat[j] - mean_d - xhat(i, j) * mean_dx);
          }
        }
        acc.add(n.inputs[0], std::move(gx));
        acc.add(n.inputs[1], std::move(gg));
        acc.add(n.inputs[2], std::move(gbeta));
        break;
      }
      case OpKind::kSoftmaxRows: {
        const Tensor& y = n.value;
        Tensor gx(y.shape());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) = y(i, j) * (g(i, j) - dot);
        }
        acc.add(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kLogSoftmaxRows: {
        const Tensor& y = n.value;
        Tensor gx(y.shape());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double total = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) total += g(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j)
            gx(i, j) = g(i, j) - std::exp(y(i, j)) * total;
        }
        acc.add(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kGatherRows: {
        const Tensor& table = nodes_[n.inputs[0]].value;
        Tensor& gt = acc.slot(n.inputs[0], table);
        const std::size_t d = table.cols();
        for (std::size_t r = 0; r < n.index.size(); ++r)
          for (std::size_t j = 0; j < d; ++j) gt(n.index[r], j) += g(r, j);
        break;
      }
      case OpKind::kSliceRows: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& gx = acc.slot(n.inputs[0], x);
        const std::size_t begin = n.index[0], d = x.cols();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < d; ++j) gx(begin + r, j) += g(r, j);
        break;
      }
      case OpKind::kSliceCols: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& gx = acc.slot(n.inputs[0], x);
        const std::size_t begin = n.index[0];
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < g.cols(); ++j) gx(r, begin + j) += g(r, j);
        break;
      }
      case OpKind::kConcatRows: {
        std::size_t offset = 0;
        for (NodeId in : n.inputs) {
          const Tensor& part = nodes_[in].value;
          Tensor gp(part.shape());
          std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(offset * g.cols()),
                      part.size(), gp.data().begin());
          offset += part.rows();
          acc.add(in, std::move(gp));
        }
        break;
      }
      case OpKind::kConcatCols: {
        std::size_t offset = 0;
        for (NodeId in : n.inputs) {
          const Tensor& part = nodes_[in].value;
          Tensor gp(part.shape());
          for (std::size_t r = 0; r < part.rows(); ++r)
            for (std::size_t j = 0; j < part.cols(); ++j) gp(r, j) = g(r, offset + j);
          offset += part.cols();
          acc.add(in, std::move(gp));
        }
        break;
      }
      case OpKind::kSelectSum: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& gx = acc.slot(n.inputs[0], x);
        const std::size_t k = n.index.size() / 2;
        const double gs = g.item();
        for (std::size_t t = 0; t < k; ++t) gx(n.index[t], n.index[k + t]) += gs;
        break;
      }
      case OpKind::kSum: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        acc.add(n.inputs[0], Tensor(x.shape(), g.item()));
        break;
      }
      case OpKind::kAbs: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
          gx[i] *= (x[i] > 0) ? 1.0 : (x[i] < 0 ? -1.0 : 0.0);
        acc.add(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kSigmoid: {
        const Tensor& y = n.value;
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= y[i] * (1.0 - y[i]);
        acc.add(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kLog: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = x[i] > n.scalar ? gx[i] / x[i] : 0.0;
        acc.add(n.inputs[0], std::move(gx));
        break;
      }
    }
  }
  return Gradients(this, std::move(adj));
}

// ---- eager kernels ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree for " + a.shape_str() + " and " +
                         b.shape_str());
  }
  Tensor c({a.rows(), b.cols()});
  as_matrix(c).noalias() = as_matrix(a) * as_matrix(b);
  return c;
}

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, {}); }

Tensor log_softmax_rows(const Tensor& x) {
  require_matrix(x, "log_softmax_rows");
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) total += std::exp(x(i, j) - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) - lse;
  }
  return y;
}

// ---- taped operations ----

Var matmul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  return t->push(make_node(OpKind::kMatMul, {a.id(), b.id()}, matmul(a.value(), b.value())));
}

Var transpose(Var a) {
  Tape* t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "transpose");
  Tensor y({x.cols(), x.rows()});
  as_matrix(y) = as_matrix(x).transpose();
  return t->push(make_node(OpKind::kTranspose, {a.id()}, std::move(y)));
}

Var add(Var a, Var b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  y += b.value();
  return t->push(make_node(OpKind::kAdd, {a.id(), b.id()}, std::move(y)));
}

Var sub(Var a, Var b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return t->push(make_node(OpKind::kSub, {a.id(), b.id()}, std::move(y)));
}

Var mul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return t->push(make_node(OpKind::kMul, {a.id(), b.id()}, std::move(y)));
}

Var scale(Var a, double factor) {
  Tape* t = tape_of(a);
  Tensor y = a.value();
  for (auto& v : y.raw()) v *= factor;
  TapeNode n = make_node(OpKind::kScale, {a.id()}, std::move(y));
  n.scalar = factor;
  return t->push(std::move(n));
}

Var add_scalar(Var a, double c) {
  Tape* t = tape_of(a);
  Tensor y = a.value();
  for (auto& v : y.raw()) v += c;
  TapeNode n = make_node(OpKind::kAddScalar, {a.id()}, std::move(y));
  n.scalar = c;
  return t->push(std::move(n));
}

Var add_row_bias(Var x, Var bias) {
  Tape* t = common_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "add_row_bias");
  if (bv.rank() != 1 || bv.size() != xv.cols()) {
    throw DimensionError("add_row_bias: bias " + bv.shape_str() + " does not fit rows of " +
                         xv.shape_str());
  }
  Tensor y = xv;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += bv[j];
  return t->push(make_node(OpKind::kAddRowBias, {x.id(), bias.id()}, std::move(y)));
}

Var gelu(Var x) {
  Tape* t = tape_of(x);
  Tensor y = x.value();
  for (auto& v : y.raw()) v = gelu_value(v);
  return t->push(make_node(OpKind::kGelu, {x.id()}, std::move(y)));
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape* t = common_tape(x, gamma);
  common_tape(x, beta);
  const Tensor& xv = x.value();
  require_matrix(xv, "layer_norm");
  const std::size_t m = xv.rows(), d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("layer_norm: affine parameters do not match width " + std::to_string(d));
  }
  Tensor xhat(xv.shape()), rstd({m}), y(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
    var /= static_cast<double>(d);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (xv(i, j) - mean) * rstd[i];
      y(i, j) = xhat(i, j) * gv[j] + bv[j];
    }
  }
  TapeNode n = make_node(OpKind::kLayerNorm, {x.id(), gamma.id(), beta.id()}, std::move(y));
  n.saved = {std::move(xhat), std::move(rstd)};
  n.scalar = eps;
  return t->push(std::move(n));
}

Var softmax_rows(Var x, const std::vector<bool>& column_mask) {
  Tape* t = tape_of(x);
  TapeNode n = make_node(OpKind::kSoftmaxRows, {x.id()}, softmax_impl(x.value(), column_mask));
  n.mask = column_mask;
  return t->push(std::move(n));
}

Var log_softmax_rows(Var x) {
  Tape* t = tape_of(x);
  return t->push(make_node(OpKind::kLogSoftmaxRows, {x.id()}, log_softmax_rows(x.value())));
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  Tape* t = tape_of(table);
  const Tensor& tv = table.value();
  require_matrix(tv, "gather_rows");
  if (ids.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t d = tv.cols();
  Tensor y({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= tv.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(ids[r]) + " outside table " +
                           tv.shape_str());
    }
    std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(ids[r] * d), d,
                y.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  TapeNode n = make_node(OpKind::kGatherRows, {table.id()}, std::move(y));
  n.index.assign(ids.begin(), ids.end());
  return t->push(std::move(n));
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Tape* t = tape_of(x);
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_rows");
  if (count == 0 || begin + count > xv.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") outside " + xv.shape_str());
  }
  const std::size_t d = xv.cols();
  std::vector<double> data(xv.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                           xv.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * d));
  TapeNode n = make_node(OpKind::kSliceRows, {x.id()}, Tensor({count, d}, std::move(data)));
  n.index = {begin, count};
  return t->push(std::move(n));
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Tape* t = tape_of(x);
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_cols");
  if (count == 0 || begin + count > xv.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") outside " + xv.shape_str());
  }
  Tensor y({xv.rows(), count});
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t j = 0; j < count; ++j) y(r, j) = xv(r, begin + j);
  TapeNode n = make_node(OpKind::kSliceCols, {x.id()}, std::move(y));
  n.index = {begin, count};
  return t->push(std::move(n));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  Tape* t = tape_of(parts[0]);
  const std::size_t d = parts[0].value().cols();
  std::vector<NodeId> ids;
  std::vector<double> data;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    common_tape(parts[0], p);
    const Tensor& v = p.value();
    require_matrix(v, "concat_rows");
    if (v.cols() != d) {
      throw DimensionError("concat_rows: width " + std::to_string(v.cols()) + " vs " +
                           std::to_string(d));
    }
    data.insert(data.end(), v.data().begin(), v.data().end());
    rows += v.rows();
    ids.push_back(p.id());
  }
  return t->push(make_node(OpKind::kConcatRows, std::move(ids), Tensor({rows, d}, std::move(data))));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  Tape* t = tape_of(parts[0]);
  const std::size_t m = parts[0].value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    common_tape(parts[0], p);
    require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != m) {
      throw DimensionError("concat_cols: height " + std::to_string(p.value().rows()) + " vs " +
                           std::to_string(m));
    }
    cols += p.value().cols();
  }
  Tensor y({m, cols});
  std::vector<NodeId> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < v.cols(); ++j) y(r, offset + j) = v(r, j);
    offset += v.cols();
    ids.push_back(p.id());
  }
  return t->push(make_node(OpKind::kConcatCols, std::move(ids), std::move(y)));
}

Var select_sum(Var x, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  Tape* t = tape_of(x);
  const Tensor& xv = x.value();
  require_matrix(xv, "select_sum");
  if (rows.size() != cols.size()) throw DimensionError("select_sum: coordinate lists differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= xv.rows() || cols[k] >= xv.cols()) {
      throw DimensionError("select_sum: coordinate outside " + xv.shape_str());
    }
    total += xv(rows[k], cols[k]);
  }
  TapeNode n = make_node(OpKind::kSelectSum, {x.id()}, Tensor::scalar(total));
  n.index.assign(rows.begin(), rows.end());
  n.index.insert(n.index.end(), cols.begin(), cols.end());
  return t->push(std::move(n));
}

Var sum(Var x) {
  Tape* t = tape_of(x);
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return t->push(make_node(OpKind::kSum, {x.id()}, Tensor::scalar(total)));
}

Var add_all(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("add_all: no terms");
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

Var abs(Var x) {
  Tape* t = tape_of(x);
  Tensor y = x.value();
  for (auto& v : y.raw()) v = std::fabs(v);
  return t->push(make_node(OpKind::kAbs, {x.id()}, std::move(y)));
}

Var sigmoid(Var x) {
  Tape* t = tape_of(x);
  Tensor y = x.value();
  for (auto& v : y.raw()) v = stable_sigmoid(v);
  return t->push(make_node(OpKind::kSigmoid, {x.id()}, std::move(y)));
}

Var log_floor(Var x, double floor) {
  Tape* t = tape_of(x);
  Tensor y = x.value();
  for (auto& v : y.raw()) v = std::log(std::max(v, floor));
  TapeNode n = make_node(OpKind::kLog, {x.id()}, std::move(y));
  n.scalar = floor;
  return t->push(std::move(n));
}

}  // namespace genatk::ad
