#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asap/graph.hpp"
#include "asap/op_registry.hpp"

namespace asap {

/// Temperature-scaled softmax over architecture weights.
///
/// phi_k = exp((a_k - max a) / T) / sum_j exp((a_j - max a) / T). Subtracting the
/// max first keeps every exponent <= 0, which matters once T has annealed to
/// ~0.1 and a / T would overflow. Rejects T <= 0 and non-finite weights.
std::vector<double> gibbs(std::span<const double> alpha, double temperature);

/// Shannon entropy of `phi` divided by ln(initial_count); 0 when phi has one entry.
double normalized_entropy(std::span<const double> phi, std::size_t initial_count);

/// Values captured by the most recent mixed forward, for the closed-form alpha gradient.
struct EdgeForward {
  const Graph* graph = nullptr;
  double temperature = 1.0;
  std::vector<Var> op_outputs;  // one per live op, same order as live ops
  Var mixed;
};

/// A mixed operation on edge (source -> target) over a shrinking set of live candidates.
class MixedEdge {
 public:
  MixedEdge(std::size_t source, std::size_t target, const OpSet& ops,
            std::span<const std::size_t> candidates, std::size_t width, Rng& rng);

  std::size_t source() const noexcept { return source_; }
  std::size_t target() const noexcept { return target_; }
  std::size_t live_count() const noexcept { return live_.size(); }
  std::size_t initial_count() const noexcept { return initial_count_; }
  /// OpSet indices of the live ops in live order.
  std::vector<std::size_t> live_indices() const;
  const OpInstance& live_op(std::size_t pos) const { return live_[pos].op; }
  OpInstance& live_op(std::size_t pos) { return live_[pos].op; }
  const std::string& live_name(std::size_t pos) const { return live_[pos].op.descriptor().name; }

  Parameter& alpha() noexcept { return alpha_; }
  const Parameter& alpha() const noexcept { return alpha_; }
  std::vector<double> phi(double temperature) const;
  double entropy(double temperature) const;

  /// Sum over live ops of phi_o * o(x); with a single live op returns o(x) unscaled.
  Var forward(Graph& g, Var x, double temperature);
  const std::optional<EdgeForward>& last_forward() const noexcept { return last_; }

  /// Removes the op with OpSet index `op_index`, discarding its weight and
  /// parameters. Returns its former live position. Rejects the last live op.
  std::size_t prune_op(std::size_t op_index);
  /// Same, addressed by live position.
  std::size_t prune_at(std::size_t pos);

  /// Forward calls per OpSet index, including pruned ops.
  const std::vector<std::uint64_t>& op_calls() const noexcept { return calls_; }

 private:
  struct LiveOp {
    std::size_t op_index;
    OpInstance op;
  };

  std::size_t source_;
  std::size_t target_;
  std::size_t initial_count_;
  std::vector<LiveOp> live_;
  Parameter alpha_;
  std::optional<EdgeForward> last_;
  std::vector<std::uint64_t> calls_;
};

struct GenotypeEdge {
  std::size_t source;
  std::size_t target;
  std::string op;

  friend bool operator==(const GenotypeEdge&, const GenotypeEdge&) = default;
};

/// Discrete cell: which single op each kept edge carries.
/// Nodes 0 and 1 are the cell inputs; intermediate nodes are 2 .. steps+1.
struct Genotype {
  std::size_t steps = 0;
  std::vector<GenotypeEdge> edges;

  friend bool operator==(const Genotype&, const Genotype&) = default;
};

/// Line-oriented genotype text:
///
///     # comment
///     steps 4
///     edge 0 2 relu_dense
///
/// `steps` must come before any edge. parse_genotype throws with the
/// offending line number.
std::string format_genotype(const Genotype& genotype);
Genotype parse_genotype(const std::string& text);
Genotype read_genotype(const std::string& path);
void write_genotype(const std::string& path, const Genotype& genotype);

/// DAG cell of `steps` intermediate nodes fed by two inputs; every node
/// connects to all earlier nodes through a MixedEdge. Output is the
/// concatenation of the intermediate nodes followed by a dense map back to width.
class Cell {
 public:
  Cell(std::size_t steps, std::size_t width, const OpSet& ops, Rng& rng);
  /// Fixed cell: one live op per genotype edge. Op names must exist in `ops`.
  static Cell from_genotype(const Genotype& genotype, std::size_t width, const OpSet& ops,
                            Rng& rng);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t width() const noexcept { return width_; }
  const OpSet& ops() const noexcept { return ops_; }
  std::vector<MixedEdge>& edges() noexcept { return edges_; }
  const std::vector<MixedEdge>& edges() const noexcept { return edges_; }
  Parameter& projection_weight() noexcept { return proj_w_; }
  Parameter& projection_bias() noexcept { return proj_b_; }

  Var forward(Graph& g, Var s0, Var s1, double temperature);

  std::size_t live_ops() const;
  std::size_t initial_ops() const;
  /// Hard prune in place: keeps only the genotype's edges, each reduced to its
  /// chosen op. Trained weights of the kept ops are preserved.
  void restrict_to(const Genotype& genotype);

  /// True when every edge carries exactly one live op.
  bool converged() const;
  double mean_entropy(double temperature) const;

  /// Every weight parameter (op parameters and projection), excluding alpha.
  std::vector<Parameter*> weight_parameters();
  std::vector<Parameter*> alpha_parameters();

 private:
  Cell(std::size_t steps, std::size_t width, OpSet ops);

  std::size_t steps_;
  std::size_t width_;
  OpSet ops_;
  std::vector<MixedEdge> edges_;
  Parameter proj_w_;
  Parameter proj_b_;
};

/// Number of edges in a cell with `steps` intermediate nodes and two inputs.
std::size_t cell_edge_count(std::size_t steps);

struct EdgeChoice {
  std::size_t edge;        // index into cell.edges()
  std::string op;
  double phi_kept;
  double phi_runner_up;    // 0 when only one op was live
  bool tie;                // argmax decided by lowest live position
};

/// Argmax-phi op per edge, then the top `keep_per_node` incoming edges per node by
/// that phi (0 keeps all). Edges whose chosen op is `zero` are dropped.
Genotype derive_genotype(const Cell& cell, double temperature, std::size_t keep_per_node,
                         std::vector<EdgeChoice>* choices = nullptr);

}  // namespace asap
