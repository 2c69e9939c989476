#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asap/graph.hpp"
#include "asap/tensor.hpp"

namespace asap {

using Rng = std::mt19937_64;

/// Width-preserving toy analogs of the convolution/pooling candidates.
enum class OpKind : std::uint8_t {
  kIdentity,
  kZero,
  kDense,       // x W + b
  kReluDense,   // relu(x) W + b
  kTanhDense,   // tanh(x) W + b
  kDenseDense,  // relu(relu(x) W1 + b1) W2 + b2, the "applied twice" analog
  kMaxPool,     // max(x, shift(x))
  kMeanPool,    // (x + shift(x)) / 2
};

struct OpDescriptor {
  std::string name;
  OpKind kind;
  bool parameterized;

  /// Number of scalar parameters at width d.
  std::size_t parameter_count(std::size_t d) const;
};

/// One materialized candidate: descriptor plus its own parameters.
class OpInstance {
 public:
  OpInstance(const OpDescriptor& desc, std::size_t width, Rng& rng);

  const OpDescriptor& descriptor() const noexcept { return desc_; }
  std::size_t width() const noexcept { return width_; }
  std::span<Parameter> parameters() noexcept { return params_; }
  std::span<const Parameter> parameters() const noexcept { return params_; }

  /// Records the op on `g`. x must be (batch x width).
  Var apply(Graph& g, Var x);

  /// Forward invocations since construction.
  std::uint64_t calls() const noexcept { return calls_; }

 private:
  OpDescriptor desc_;
  std::size_t width_;
  std::vector<Parameter> params_;
  std::uint64_t calls_ = 0;
};

/// Ordered candidate list. Names are unique and there are at least two ops.
class OpSet {
 public:
  explicit OpSet(std::vector<OpDescriptor> ops);

  std::size_t size() const noexcept { return ops_.size(); }
  const OpDescriptor& operator[](std::size_t i) const { return ops_[i]; }
  const std::vector<OpDescriptor>& ops() const noexcept { return ops_; }
  /// Index of `name`, or throws.
  std::size_t index_of(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<OpDescriptor> ops_;
};

/// Every registered op, including `zero`.
const std::vector<OpDescriptor>& op_catalog();
const OpDescriptor& find_op(std::string_view name);

/// The seven non-zero candidates at width d.
OpSet default_opset(std::size_t d);
OpSet make_opset(const std::vector<std::string>& names);

/// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights and bias.
void init_dense(Parameter& weight, Parameter& bias, std::size_t fan_in, std::size_t fan_out,
                Rng& rng);

/// Cyclic shift used by the pooling analogs; identity only when d == 1.
std::vector<std::size_t> pool_permutation(std::size_t d);

}  // namespace asap
