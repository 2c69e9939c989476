#include "asap/op_registry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace asap {

std::size_t OpDescriptor::parameter_count(std::size_t d) const {
  switch (kind) {
    case OpKind::kDense:
    case OpKind::kReluDense:
    case OpKind::kTanhDense:
      return d * d + d;
    case OpKind::kDenseDense:
      return 2 * (d * d + d);
    default:
      return 0;
  }
}

const std::vector<OpDescriptor>& op_catalog() {
  static const std::vector<OpDescriptor> catalog = {
      {"identity", OpKind::kIdentity, false},
      {"zero", OpKind::kZero, false},
      {"dense", OpKind::kDense, true},
      {"relu_dense", OpKind::kReluDense, true},
      {"tanh_dense", OpKind::kTanhDense, true},
      {"dense_dense", OpKind::kDenseDense, true},
      {"max_pool", OpKind::kMaxPool, false},
      {"mean_pool", OpKind::kMeanPool, false},
  };
  return catalog;
}

const OpDescriptor& find_op(std::string_view name) {
  for (const auto& op : op_catalog()) {
    if (op.name == name) return op;
  }
  throw std::invalid_argument(fmt::format("unknown operation '{}'", name));
}

OpSet::OpSet(std::vector<OpDescriptor> ops) : ops_(std::move(ops)) {
  if (ops_.size() < 2) throw std::invalid_argument("opset: needs at least two operations");
  std::set<std::string> seen;
  for (const auto& op : ops_) {
    if (!seen.insert(op.name).second) {
      throw std::invalid_argument(fmt::format("opset: duplicate operation '{}'", op.name));
    }
  }
}

std::size_t OpSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (ops_[i].name == name) return i;
  }
  throw std::invalid_argument(fmt::format("opset: no operation named '{}'", name));
}

std::vector<std::string> OpSet::names() const {
  std::vector<std::string> out;
  out.reserve(ops_.size());
  for (const auto& op : ops_) out.push_back(op.name);
  return out;
}

OpSet default_opset(std::size_t d) {
  if (d < 1) throw std::invalid_argument("default_opset: width must be >= 1");
  return make_opset({"identity", "dense", "relu_dense", "tanh_dense", "dense_dense", "max_pool",
                     "mean_pool"});
}

OpSet make_opset(const std::vector<std::string>& names) {
  std::vector<OpDescriptor> ops;
  ops.reserve(names.size());
  for (const auto& n : names) ops.push_back(find_op(n));
  return OpSet(std::move(ops));
}

void init_dense(Parameter& weight, Parameter& bias, std::size_t fan_in, std::size_t fan_out,
                Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w({fan_in, fan_out});
  for (double& x : w.data()) x = u(rng);
  Tensor b({fan_out});
  for (double& x : b.data()) x = u(rng);
  weight = Parameter(std::move(w));
  bias = Parameter(std::move(b));
}

std::vector<std::size_t> pool_permutation(std::size_t d) {
  std::vector<std::size_t> perm(d);
  for (std::size_t j = 0; j < d; ++j) perm[j] = (j + 1) % d;
  return perm;
}

OpInstance::OpInstance(const OpDescriptor& desc, std::size_t width, Rng& rng)
    : desc_(desc), width_(width) {
  if (width == 0) throw std::invalid_argument("op: width must be >= 1");
  const std::size_t layers = desc.kind == OpKind::kDenseDense ? 2 : (desc.parameterized ? 1 : 0);
  params_.resize(2 * layers);
  for (std::size_t l = 0; l < layers; ++l) init_dense(params_[2 * l], params_[2 * l + 1], width, width, rng);
}

Var OpInstance::apply(Graph& g, Var x) {
  const Shape& s = x.shape();
  if (s.size() != 2 || s[1] != width_) {
    throw std::invalid_argument(fmt::format("{}: expected (batch x {}) input, got {}", desc_.name,
                                            width_, shape_str(s)));
  }
  ++calls_;
  auto dense = [&](Var in, std::size_t layer) {
    return g.add(g.matmul(in, g.parameter(params_[2 * layer])), g.parameter(params_[2 * layer + 1]));
  };
  switch (desc_.kind) {
    case OpKind::kIdentity:
      return x;
    case OpKind::kZero:
      return g.constant(Tensor(s));
    case OpKind::kDense:
      return dense(x, 0);
    case OpKind::kReluDense:
      return dense(g.relu(x), 0);
    case OpKind::kTanhDense:
      return dense(g.tanh(x), 0);
    case OpKind::kDenseDense:
      return dense(g.relu(dense(g.relu(x), 0)), 1);
    case OpKind::kMaxPool:
      return g.maximum(x, g.permute_cols(x, pool_permutation(width_)));
    case OpKind::kMeanPool:
      return g.scale(g.add(x, g.permute_cols(x, pool_permutation(width_))), 0.5);
  }
  throw std::logic_error("op: unhandled kind");
}

}  // namespace asap
