#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "asap/data_synth.hpp"
#include "asap/graph.hpp"
#include "asap/schedules.hpp"
#include "asap/search_space.hpp"

namespace asap {

enum class PrunerKind { kAsap, kMagnitude, kAccumGrad, kDartsHard };
enum class GraceMode { kTemperature, kEpochs };
enum class Granularity { kEpoch, kStep };

PrunerKind parse_pruner_kind(std::string_view s);
GraceMode parse_grace_mode(std::string_view s);
Granularity parse_granularity(std::string_view s);
std::string_view to_string(PrunerKind k);
std::string_view to_string(GraceMode m);
std::string_view to_string(Granularity g);

struct SearchConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::size_t steps = 4;   // intermediate nodes per cell
  std::size_t width = 8;
  std::vector<std::string> ops;  // empty: default_opset

  // Network weights: SGD with momentum, cosine-annealed learning rate.
  double weight_lr = 0.025;
  double weight_lr_min = 0.001;
  double weight_momentum = 0.9;
  double weight_decay = 3e-4;
  double grad_clip = 5.0;  // global norm; 0 disables

  // Architecture weights: Adam.
  double alpha_lr = 1e-3;
  double alpha_beta1 = 0.5;
  double alpha_beta2 = 0.999;
  double alpha_eps = 1e-8;

  SchedulePolicy schedule;
  ThresholdPolicy threshold;

  GraceMode grace = GraceMode::kEpochs;
  double grace_temperature = std::numeric_limits<double>::infinity();  // tau
  std::size_t grace_epochs = 5;

  PrunerKind pruner = PrunerKind::kAsap;
  Granularity granularity = Granularity::kEpoch;

  // magnitude / accum_grad pruning follow the sparsity schedule from epoch sparsity_t0.
  double sparsity_t0 = 20.0;
  int sparsity_power = 3;

  std::size_t keep_per_node = 2;  // final hard prune; 0 keeps all edges
  std::uint64_t seed = 0;

  void validate() const;
  OpSet opset() const;
};

struct PruneEvent {
  std::size_t epoch = 0;
  std::size_t edge = 0;
  std::size_t source = 0;
  std::size_t target = 0;
  std::string op;
  double phi = 0.0;        // Gibbs weight over the then-live set
  double threshold = 0.0;  // theta_t for asap; the pruning score otherwise
};

struct EpochRecord {
  std::size_t epoch = 0;
  double temperature = 0.0;
  double threshold = 0.0;
  double sparsity = 1.0;  // live ops / initial ops
  double entropy = 0.0;   // mean normalized edge entropy
  double train_loss = 0.0;
  double val_acc = 0.0;
  double epoch_seconds = 0.0;
  std::uint64_t graph_nodes = 0;  // primitives recorded during the epoch
  bool grace = true;
  bool alpha_updated = false;
  std::vector<PruneEvent> prunes;
};

struct SearchTrace {
  PrunerKind pruner = PrunerKind::kAsap;
  GraceMode grace = GraceMode::kEpochs;
  std::vector<EpochRecord> epochs;
};

struct SearchResult {
  Genotype genotype;
  SearchTrace trace;
  bool converged = false;  // every edge reached one live op before the cap
  std::vector<EdgeChoice> choices;  // per kept edge, from the final extraction
  double val_acc_before_extract = 0.0;
  double val_acc_after_extract = 0.0;
  std::size_t ties = 0;
};

/// Stems, one searchable cell and a linear classifier.
class SearchModel {
 public:
  SearchModel(std::size_t in_dims, std::size_t classes, Cell cell, Rng& rng);

  Cell& cell() noexcept { return cell_; }
  const Cell& cell() const noexcept { return cell_; }

  /// Logits for `x` at temperature T.
  Var forward(Graph& g, const Tensor& x, double temperature);

  std::vector<Parameter*> weight_parameters();
  std::vector<Parameter*> alpha_parameters() { return cell_.alpha_parameters(); }

 private:
  Parameter stem0_w_, stem0_b_, stem1_w_, stem1_b_, head_w_, head_b_;
  Cell cell_;
};

double accuracy(SearchModel& model, const Dataset& data, double temperature);

class Sgd {
 public:
  Sgd(double momentum, double weight_decay, double clip) : momentum_(momentum), decay_(weight_decay), clip_(clip) {}
  void step(const std::vector<Parameter*>& params, double lr) const;

 private:
  double momentum_, decay_, clip_;
};

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(const std::vector<Parameter*>& params) const;

 private:
  double lr_, b1_, b2_, eps_;
};

/// Closed-form gradient of the loss w.r.t. the edge's live alpha:
/// (1/T) phi_k <G, o_k - o_bar>, where G is the upstream gradient at the mixed output.
/// Requires a recorded forward; the graph-reading overload also requires backward.
std::vector<double> alpha_grad(const MixedEdge& edge, const Tensor& upstream);
std::vector<double> alpha_grad(const MixedEdge& edge);

/// Removes every live op with phi < theta, keeping the argmax when all would go.
std::vector<PruneEvent> prune_threshold(Cell& cell, double temperature, double theta, std::size_t epoch);

/// Removes the `count` live ops with the smallest score globally, never emptying an edge.
/// `scores[e][k]` is aligned with edge e's live ops; pruned entries are erased from it.
std::vector<PruneEvent> prune_lowest(Cell& cell, std::vector<std::vector<double>>& scores,
                                     std::size_t count, double temperature, std::size_t epoch);
/// prune_lowest scored by raw alpha.
std::vector<PruneEvent> prune_magnitude(Cell& cell, std::size_t count, double temperature,
                                        std::size_t epoch);

/// Argmax op per edge plus top-k incoming edges per node; also hard-prunes `cell` to it.
Genotype prune_hard_final(Cell& cell, double temperature, std::size_t keep_per_node,
                          std::vector<EdgeChoice>* choices = nullptr);

/// Runs the search on a train/val pair of equal size.
SearchResult search(const SearchConfig& config, const Dataset& train, const Dataset& val);

struct ChildConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  std::size_t width = 8;
  double lr = 0.025;
  double lr_min = 0.001;
  double momentum = 0.9;
  double weight_decay = 3e-4;
  double grad_clip = 5.0;
  std::uint64_t seed = 0;
};

struct ChildResult {
  double train_acc = 0.0;
  double test_acc = 0.0;
  double final_loss = 0.0;
};

/// Trains the fixed genotype cell from scratch and scores it on `test`.
ChildResult train_child(const Genotype& genotype, const OpSet& ops, const Dataset& train,
                        const Dataset& test, const ChildConfig& config);

/// Softmax regression on the raw features with the same optimizer and schedule.
ChildResult train_linear(const Dataset& train, const Dataset& test, const ChildConfig& config);

/// DARTS-shaped random cell: each node keeps `keep_per_node` random incoming
/// edges with a uniformly drawn non-zero op.
Genotype random_genotype(std::size_t steps, const OpSet& ops, std::size_t keep_per_node, Rng& rng);

/// CSV with header epoch,temperature,threshold,sparsity,entropy,train_loss,val_acc,epoch_seconds,prunes.
/// prunes is a `;`-separated list of source-target:op@phi.
std::string format_trace_csv(const SearchTrace& trace, bool include_seconds = true);

}  // namespace asap
