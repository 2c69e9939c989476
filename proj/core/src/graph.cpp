#include "asap/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace asap {

namespace {

template <class N>
N make_node_impl(Primitive kind, Tensor value, std::vector<std::size_t> inputs) {
  N n;
  n.kind = kind;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  return n;
}

}  // namespace

namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(
      fmt::format("{}: incompatible shapes {} and {}", op, shape_str(a), shape_str(b)));
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a, std::string_view why) {
  throw std::invalid_argument(fmt::format("{}: bad shape {} ({})", op, shape_str(a), why));
}

// Rank-1 tensors act as a single row for the row-wise primitives.
std::size_t row_count(const Tensor& t) { return t.rank() == 1 ? 1 : t.shape()[0]; }
std::size_t col_count(const Tensor& t) { return t.shape().back(); }

}  // namespace

std::string_view primitive_name(Primitive p) noexcept {
  switch (p) {
    case Primitive::kConstant: return "constant";
    case Primitive::kParameter: return "parameter";
    case Primitive::kMatmul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kScale: return "scale";
    case Primitive::kMulScalar: return "mul_scalar";
    case Primitive::kRelu: return "relu";
    case Primitive::kTanh: return "tanh";
    case Primitive::kMaximum: return "maximum";
    case Primitive::kPermuteCols: return "permute_cols";
    case Primitive::kConcatCols: return "concat_cols";
    case Primitive::kIndex: return "index";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kSoftmax: return "softmax";
    case Primitive::kLogSoftmax: return "log_softmax";
    case Primitive::kCrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw std::logic_error("var: not bound to a graph");
  return graph->value(*this);
}

Var Graph::push(Node node) {
  if (backward_done_) throw std::logic_error("graph: cannot record after backward()");
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Graph::check_owned(Var v, std::string_view op) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw std::invalid_argument(fmt::format("{}: operand belongs to another graph", op));
  }
}

const Tensor& Graph::value(Var v) const {
  check_owned(v, "value");
  return nodes_[v.id].value;
}

Primitive Graph::kind(Var v) const {
  check_owned(v, "kind");
  return nodes_[v.id].kind;
}

const std::vector<std::size_t>& Graph::inputs(Var v) const {
  check_owned(v, "inputs");
  return nodes_[v.id].inputs;
}

Tensor Graph::grad(Var v) const {
  check_owned(v, "grad");
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return Tensor(n.value.shape(), n.grad);
}

std::vector<double>& Graph::grad_of(std::size_t id) {
  auto& g = nodes_[id].grad;
  if (g.empty()) g.assign(nodes_[id].value.numel(), 0.0);
  return g;
}

Var Graph::constant(Tensor value) {
  return push(make_node_impl<Node>(Primitive::kConstant, std::move(value), {}));
}

Var Graph::parameter(Parameter& p) {
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
  Node n = make_node_impl<Node>(Primitive::kParameter, p.value, {});
  n.param = &p;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  check_owned(a, "matmul");
  check_owned(b, "matmul");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.shape()[1] != B.shape()[0]) {
    shape_error("matmul", A.shape(), B.shape());
  }
  const std::size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
  Tensor out({m, n});
  auto o = out.data();
  auto ad = A.data();
  auto bd = B.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bd[p * n];
      double* orow = &o[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return push(make_node_impl<Node>(Primitive::kMatmul, std::move(out), {a.id, b.id}));
}

Var Graph::add(Var a, Var b) {
  check_owned(a, "add");
  check_owned(b, "add");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Tensor out = A;
  if (A.shape() == B.shape()) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  } else if (A.rank() == 2 && B.rank() == 1 && B.shape()[0] == A.shape()[1]) {
    const std::size_t cols = A.shape()[1];
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i % cols];
  } else {
    shape_error("add", A.shape(), B.shape());
  }
  return push(make_node_impl<Node>(Primitive::kAdd, std::move(out), {a.id, b.id}));
}

Var Graph::sub(Var a, Var b) {
  check_owned(a, "sub");
  check_owned(b, "sub");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error("sub", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
  return push(make_node_impl<Node>(Primitive::kSub, std::move(out), {a.id, b.id}));
}

Var Graph::mul(Var a, Var b) {
  check_owned(a, "mul");
  check_owned(b, "mul");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error("mul", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
  return push(make_node_impl<Node>(Primitive::kMul, std::move(out), {a.id, b.id}));
}

Var Graph::scale(Var a, double c) {
  check_owned(a, "scale");
  Tensor out = value(a);
  for (double& x : out.data()) x *= c;
  Node n = make_node_impl<Node>(Primitive::kScale, std::move(out), {a.id});
  n.aux_scalar = c;
  return push(std::move(n));
}

Var Graph::mul_scalar(Var a, Var s) {
  check_owned(a, "mul_scalar");
  check_owned(s, "mul_scalar");
  const Tensor& S = value(s);
  if (S.numel() != 1) shape_error("mul_scalar", value(a).shape(), S.shape());
  const double c = S[0];
  Tensor out = value(a);
  for (double& x : out.data()) x *= c;
  return push(make_node_impl<Node>(Primitive::kMulScalar, std::move(out), {a.id, s.id}));
}

Var Graph::relu(Var a) {
  check_owned(a, "relu");
  Tensor out = value(a);
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return push(make_node_impl<Node>(Primitive::kRelu, std::move(out), {a.id}));
}

Var Graph::tanh(Var a) {
  check_owned(a, "tanh");
  Tensor out = value(a);
  for (double& x : out.data()) x = std::tanh(x);
  return push(make_node_impl<Node>(Primitive::kTanh, std::move(out), {a.id}));
}

Var Graph::maximum(Var a, Var b) {
  check_owned(a, "maximum");
  check_owned(b, "maximum");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) shape_error("maximum", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(A[i], B[i]);
  return push(make_node_impl<Node>(Primitive::kMaximum, std::move(out), {a.id, b.id}));
}

Var Graph::permute_cols(Var a, std::vector<std::size_t> perm) {
  check_owned(a, "permute_cols");
  const Tensor& A = value(a);
  if (A.rank() > 2) shape_error("permute_cols", A.shape(), "rank must be 1 or 2");
  const std::size_t cols = col_count(A);
  if (perm.size() != cols) shape_error("permute_cols", A.shape(), "permutation length != cols");
  std::vector<bool> seen(cols, false);
  for (auto p : perm) {
    if (p >= cols || seen[p]) shape_error("permute_cols", A.shape(), "not a permutation");
    seen[p] = true;
  }
  Tensor out(A.shape());
  const std::size_t rows = row_count(A);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = A[r * cols + perm[j]];
  }
  Node n = make_node_impl<Node>(Primitive::kPermuteCols, std::move(out), {a.id});
  n.aux_index = std::move(perm);
  return push(std::move(n));
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  std::size_t rows = 0;
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    check_owned(parts[i], "concat_cols");
    const Tensor& P = value(parts[i]);
    if (P.rank() != 2) shape_error("concat_cols", P.shape(), "operands must be rank 2");
    if (i == 0) rows = P.shape()[0];
    if (P.shape()[0] != rows) shape_error("concat_cols", value(parts[0]).shape(), P.shape());
    total += P.shape()[1];
    ids.push_back(parts[i].id);
    widths.push_back(P.shape()[1]);
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& P = value(parts[i]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < widths[i]; ++j) out[r * total + offset + j] = P[r * widths[i] + j];
    }
    offset += widths[i];
  }
  Node n = make_node_impl<Node>(Primitive::kConcatCols, std::move(out), std::move(ids));
  n.aux_index = std::move(widths);
  return push(std::move(n));
}

Var Graph::index(Var a, std::size_t k) {
  check_owned(a, "index");
  const Tensor& A = value(a);
  if (k >= A.numel()) shape_error("index", A.shape(), "index out of range");
  Node n = make_node_impl<Node>(Primitive::kIndex, Tensor::scalar(A[k]), {a.id});
  n.aux_index = {k};
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  check_owned(a, "sum");
  double s = 0.0;
  for (double x : value(a).data()) s += x;
  return push(make_node_impl<Node>(Primitive::kSum, Tensor::scalar(s), {a.id}));
}

Var Graph::mean(Var a) {
  check_owned(a, "mean");
  const Tensor& A = value(a);
  double s = 0.0;
  for (double x : A.data()) s += x;
  return push(make_node_impl<Node>(Primitive::kMean, Tensor::scalar(s / static_cast<double>(A.numel())), {a.id}));
}

namespace {

void softmax_rows(const Tensor& in, Tensor& out) {
  const std::size_t rows = row_count(in), cols = col_count(in);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = &in.data()[r * cols];
    double* y = &out.data()[r * cols];
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
}

void log_softmax_rows(const Tensor& in, Tensor& out) {
  const std::size_t rows = row_count(in), cols = col_count(in);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = &in.data()[r * cols];
    double* y = &out.data()[r * cols];
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
  }
}

}  // namespace

Var Graph::softmax(Var a) {
  check_owned(a, "softmax");
  const Tensor& A = value(a);
  if (A.rank() > 2) shape_error("softmax", A.shape(), "rank must be 1 or 2");
  Tensor out(A.shape());
  softmax_rows(A, out);
  return push(make_node_impl<Node>(Primitive::kSoftmax, std::move(out), {a.id}));
}

Var Graph::log_softmax(Var a) {
  check_owned(a, "log_softmax");
  const Tensor& A = value(a);
  if (A.rank() > 2) shape_error("log_softmax", A.shape(), "rank must be 1 or 2");
  Tensor out(A.shape());
  log_softmax_rows(A, out);
  return push(make_node_impl<Node>(Primitive::kLogSoftmax, std::move(out), {a.id}));
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& labels) {
  check_owned(logits, "cross_entropy");
  const Tensor& L = value(logits);
  if (L.rank() != 2) shape_error("cross_entropy", L.shape(), "logits must be rank 2");
  const std::size_t rows = L.shape()[0], cols = L.shape()[1];
  if (labels.size() != rows) {
    shape_error("cross_entropy", L.shape(), Shape{labels.size()});
  }
  Tensor logp(L.shape());
  log_softmax_rows(L, logp);
  double loss = 0.0;
  std::vector<std::size_t> idx(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= cols) {
      throw std::invalid_argument(
          fmt::format("cross_entropy: label {} outside [0, {})", labels[r], cols));
    }
    idx[r] = static_cast<std::size_t>(labels[r]);
    loss -= logp[r * cols + idx[r]];
  }
  Node n = make_node_impl<Node>(Primitive::kCrossEntropy, Tensor::scalar(loss / static_cast<double>(rows)), {logits.id});
  n.aux_index = std::move(idx);
  return push(std::move(n));
}

void Graph::backward(Var loss) {
  check_owned(loss, "backward");
  if (backward_done_) throw std::logic_error("backward: graph already consumed; run a new forward pass");
  if (value(loss).numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(value(loss).shape()));
  }

  // Only nodes that depend on a parameter receive gradient storage.
  std::vector<bool> needs(nodes_.size(), false);
  for (std::size_t i = 0; i <= loss.id; ++i) {
    const Node& n = nodes_[i];
    if (n.kind == Primitive::kParameter) {
      needs[i] = true;
      continue;
    }
    for (auto in : n.inputs) {
      if (needs[in]) {
        needs[i] = true;
        break;
      }
    }
  }
  backward_done_ = true;
  if (!needs[loss.id]) return;

  grad_of(loss.id)[0] = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!needs[id] || n.grad.empty()) continue;
    const std::vector<double>& g = n.grad;
    auto want = [&](std::size_t k) { return needs[n.inputs[k]]; };

    switch (n.kind) {
      case Primitive::kConstant:
        break;
      case Primitive::kParameter: {
        auto pg = n.param->grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        break;
      }
      case Primitive::kMatmul: {
        const Tensor& A = nodes_[n.inputs[0]].value;
        const Tensor& B = nodes_[n.inputs[1]].value;
        const std::size_t m = A.shape()[0], k = A.shape()[1], c = B.shape()[1];
        if (want(0)) {
          auto& ga = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += g[i * c + j] * B[p * c + j];
              ga[i * k + p] += s;
            }
          }
        }
        if (want(1)) {
          auto& gb = grad_of(n.inputs[1]);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = A[i * k + p];
              if (aip == 0.0) continue;
              for (std::size_t j = 0; j < c; ++j) gb[p * c + j] += aip * g[i * c + j];
            }
          }
        }
        break;
      }
      case Primitive::kAdd: {
        if (want(0)) {
          auto& ga = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (want(1)) {
          auto& gb = grad_of(n.inputs[1]);
          const std::size_t bn = gb.size();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % bn] += g[i];
        }
        break;
      }
      case Primitive::kSub: {
        if (want(0)) {
          auto& ga = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (want(1)) {
          auto& gb = grad_of(n.inputs[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case Primitive::kMul: {
        const Tensor& A = nodes_[n.inputs[0]].value;
        const Tensor& B = nodes_[n.inputs[1]].value;
        if (want(0)) {
          auto& ga = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
        }
        if (want(1)) {
          auto& gb = grad_of(n.inputs[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
        }
        break;
      }
      case Primitive::kScale: {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux_scalar;
        break;
      }
      case Primitive::kMulScalar: {
        const Tensor& A = nodes_[n.inputs[0]].value;
        const double s = nodes_[n.inputs[1]].value[0];
        if (want(0)) {
          auto& ga = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        }
        if (want(1)) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
          grad_of(n.inputs[1])[0] += acc;
        }
        break;
      }
      case Primitive::kRelu: {
        const Tensor& A = nodes_[n.inputs[0]].value;
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (A[i] > 0.0) ga[i] += g[i];
        }
        break;
      }
      case Primitive::kTanh: {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          ga[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Primitive::kMaximum: {
        const Tensor& A = nodes_[n.inputs[0]].value;
        const Tensor& B = nodes_[n.inputs[1]].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t to = A[i] >= B[i] ? 0 : 1;
          if (want(to)) grad_of(n.inputs[to])[i] += g[i];
        }
        break;
      }
      case Primitive::kPermuteCols: {
        auto& ga = grad_of(n.inputs[0]);
        const auto& perm = n.aux_index;
        const std::size_t cols = perm.size();
        const std::size_t rows = g.size() / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < cols; ++j) ga[r * cols + perm[j]] += g[r * cols + j];
        }
        break;
      }
      case Primitive::kConcatCols: {
        const std::size_t total = n.value.shape()[1];
        const std::size_t rows = n.value.shape()[0];
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t w = n.aux_index[k];
          if (want(k)) {
            auto& gk = grad_of(n.inputs[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < w; ++j) gk[r * w + j] += g[r * total + offset + j];
            }
          }
          offset += w;
        }
        break;
      }
      case Primitive::kIndex: {
        grad_of(n.inputs[0])[n.aux_index[0]] += g[0];
        break;
      }
      case Primitive::kSum: {
        auto& ga = grad_of(n.inputs[0]);
        for (double& x : ga) x += g[0];
        break;
      }
      case Primitive::kMean: {
        auto& ga = grad_of(n.inputs[0]);
        const double share = g[0] / static_cast<double>(ga.size());
        for (double& x : ga) x += share;
        break;
      }
      case Primitive::kSoftmax: {
        auto& ga = grad_of(n.inputs[0]);
        const std::size_t cols = col_count(n.value);
        const std::size_t rows = row_count(n.value);
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += g[r * cols + j] * n.value[r * cols + j];
          for (std::size_t j = 0; j < cols; ++j) {
            ga[r * cols + j] += n.value[r * cols + j] * (g[r * cols + j] - dot);
          }
        }
        break;
      }
      case Primitive::kLogSoftmax: {
        auto& ga = grad_of(n.inputs[0]);
        const std::size_t cols = col_count(n.value);
        const std::size_t rows = row_count(n.value);
        for (std::size_t r = 0; r < rows; ++r) {
          double gsum = 0.0;
          for (std::size_t j = 0; j < cols; ++j) gsum += g[r * cols + j];
          for (std::size_t j = 0; j < cols; ++j) {
            ga[r * cols + j] += g[r * cols + j] - std::exp(n.value[r * cols + j]) * gsum;
          }
        }
        break;
      }
      case Primitive::kCrossEntropy: {
        const Tensor& L = nodes_[n.inputs[0]].value;
        const std::size_t rows = L.shape()[0], cols = L.shape()[1];
        Tensor p(L.shape());
        softmax_rows(L, p);
        auto& ga = grad_of(n.inputs[0]);
        const double share = g[0] / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < cols; ++j) {
            const double target = j == n.aux_index[r] ? 1.0 : 0.0;
            ga[r * cols + j] += share * (p[r * cols + j] - target);
          }
        }
        break;
      }
    }
  }
}

}  // namespace asap
