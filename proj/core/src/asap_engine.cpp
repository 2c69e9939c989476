#include "asap/asap_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace asap {

namespace {

Tensor rows_of(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t d = x.cols();
  Tensor out({idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t j = 0; j < d; ++j) out.at(r, j) = x.at(idx[r], j);
  }
  return out;
}

std::vector<int> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data.labels[i]);
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  }
  return out;
}

double cosine_lr(double lr, double lr_min, std::size_t epoch, std::size_t epochs) {
  const double frac = static_cast<double>(epoch) / static_cast<double>(epochs);
  return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

// Forward + backward on one batch; returns the loss and the number of recorded nodes.
std::pair<double, std::size_t> loss_and_grad(SearchModel& model, const Dataset& data,
                                             std::span<const std::size_t> idx, double temperature) {
  Graph g;
  const Var logits = model.forward(g, rows_of(data.features, idx), temperature);
  const Var loss = g.cross_entropy(logits, labels_of(data, idx));
  const double value = loss.value().item();
  if (!std::isfinite(value)) return {value, g.size()};
  g.backward(loss);
  return {value, g.size()};
}

}  // namespace

PrunerKind parse_pruner_kind(std::string_view s) {
  if (s == "asap") return PrunerKind::kAsap;
  if (s == "magnitude") return PrunerKind::kMagnitude;
  if (s == "accum_grad") return PrunerKind::kAccumGrad;
  if (s == "darts_hard") return PrunerKind::kDartsHard;
  throw std::invalid_argument(fmt::format("unknown pruner '{}' (expected asap, magnitude, accum_grad, darts_hard)", s));
}

GraceMode parse_grace_mode(std::string_view s) {
  if (s == "temperature") return GraceMode::kTemperature;
  if (s == "epochs") return GraceMode::kEpochs;
  throw std::invalid_argument(fmt::format("unknown grace mode '{}' (expected temperature, epochs)", s));
}

Granularity parse_granularity(std::string_view s) {
  if (s == "epoch") return Granularity::kEpoch;
  if (s == "step") return Granularity::kStep;
  throw std::invalid_argument(fmt::format("unknown granularity '{}' (expected epoch, step)", s));
}

std::string_view to_string(PrunerKind k) {
  switch (k) {
    case PrunerKind::kAsap: return "asap";
    case PrunerKind::kMagnitude: return "magnitude";
    case PrunerKind::kAccumGrad: return "accum_grad";
    case PrunerKind::kDartsHard: return "darts_hard";
  }
  return "?";
}

std::string_view to_string(GraceMode m) {
  return m == GraceMode::kTemperature ? "temperature" : "epochs";
}

std::string_view to_string(Granularity g) { return g == Granularity::kEpoch ? "epoch" : "step"; }

void SearchConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("search config: ") + what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(steps >= 1, "steps must be >= 1");
  require(width >= 1, "width must be >= 1");
  require(weight_lr > 0.0 && weight_lr_min > 0.0 && weight_lr_min <= weight_lr,
          "weight learning rates must satisfy 0 < lr_min <= lr");
  require(weight_momentum >= 0.0 && weight_momentum < 1.0, "momentum must be in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(grad_clip >= 0.0, "grad_clip must be >= 0");
  require(alpha_lr > 0.0, "alpha learning rate must be > 0");
  require(alpha_beta1 >= 0.0 && alpha_beta1 < 1.0 && alpha_beta2 >= 0.0 && alpha_beta2 < 1.0,
          "alpha betas must be in [0, 1)");
  require(alpha_eps > 0.0, "alpha eps must be > 0");
  require(!(grace_temperature <= 0.0), "grace temperature must be > 0");
  require(sparsity_power == 1 || sparsity_power == 3, "sparsity power must be 1 or 3");
  require(sparsity_t0 >= 0.0, "sparsity t0 must be >= 0");
  schedule.validate();
  (void)opset();
}

OpSet SearchConfig::opset() const { return ops.empty() ? default_opset(width) : make_opset(ops); }

// ---------------------------------------------------------------------------
// Model and optimizers

SearchModel::SearchModel(std::size_t in_dims, std::size_t classes, Cell cell, Rng& rng) : cell_(std::move(cell)) {
  if (in_dims < 1 || classes < 2) throw std::invalid_argument("model: bad input or class count");
  const std::size_t d = cell_.width();
  init_dense(stem0_w_, stem0_b_, in_dims, d, rng);
  init_dense(stem1_w_, stem1_b_, in_dims, d, rng);
  init_dense(head_w_, head_b_, d, classes, rng);
}

Var SearchModel::forward(Graph& g, const Tensor& x, double temperature) {
  const Var in = g.constant(x);
  const Var s0 = g.add(g.matmul(in, g.parameter(stem0_w_)), g.parameter(stem0_b_));
  const Var s1 = g.add(g.matmul(in, g.parameter(stem1_w_)), g.parameter(stem1_b_));
  const Var h = cell_.forward(g, s0, s1, temperature);
  return g.add(g.matmul(h, g.parameter(head_w_)), g.parameter(head_b_));
}

std::vector<Parameter*> SearchModel::weight_parameters() {
  std::vector<Parameter*> out{&stem0_w_, &stem0_b_, &stem1_w_, &stem1_b_};
  for (auto* p : cell_.weight_parameters()) out.push_back(p);
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

double accuracy(SearchModel& model, const Dataset& data, double temperature) {
  constexpr std::size_t kChunk = 512;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    idx.resize(std::min(kChunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Graph g;
    const Tensor& logits = model.forward(g, rows_of(data.features, idx), temperature).value();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c) {
        if (logits.at(r, c) > logits.at(r, best)) best = c;
      }
      if (static_cast<int>(best) == data.labels[idx[r]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void Sgd::step(const std::vector<Parameter*>& params, double lr) const {
  double scale = 1.0;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (const auto* p : params) {
      for (double g : p->grad.data()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_) scale = clip_ / norm;
  }
  for (auto* p : params) {
    auto& v = p->slots.first;
    if (v.numel() != p->value.numel()) v = Tensor(p->value.shape());
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = scale * p->grad[i] + decay_ * p->value[i];
      v[i] = momentum_ * v[i] + g;
      p->value[i] -= lr * v[i];
    }
    ++p->slots.steps;
  }
}

void Adam::step(const std::vector<Parameter*>& params) const {
  for (auto* p : params) {
    auto& m = p->slots.first;
    auto& v = p->slots.second;
    if (m.numel() != p->value.numel()) m = Tensor(p->value.shape());
    if (v.numel() != p->value.numel()) v = Tensor(p->value.shape());
    const auto t = static_cast<double>(++p->slots.steps);
    const double c1 = 1.0 - std::pow(b1_, t);
    const double c2 = 1.0 - std::pow(b2_, t);
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad[i];
      m[i] = b1_ * m[i] + (1.0 - b1_) * g;
      v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
      p->value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Architecture gradient and pruners

std::vector<double> alpha_grad(const MixedEdge& edge, const Tensor& upstream) {
  const auto& rec = edge.last_forward();
  if (!rec.has_value()) throw std::logic_error("alpha_grad: no forward recorded on this edge");
  if (rec->op_outputs.size() != edge.live_count()) {
    throw std::logic_error("alpha_grad: edge changed since its last forward");
  }
  const std::size_t n = edge.live_count();
  if (n == 1) return {0.0};
  const auto phi = edge.phi(rec->temperature);
  std::vector<double> dots(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor& o = rec->op_outputs[k].value();
    if (o.numel() != upstream.numel()) throw std::invalid_argument("alpha_grad: upstream shape mismatch");
    for (std::size_t i = 0; i < o.numel(); ++i) dots[k] += upstream[i] * o[i];
  }
  double mixed = 0.0;
  for (std::size_t k = 0; k < n; ++k) mixed += phi[k] * dots[k];
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = phi[k] * (dots[k] - mixed) / rec->temperature;
  return out;
}

std::vector<double> alpha_grad(const MixedEdge& edge) {
  const auto& rec = edge.last_forward();
  if (!rec.has_value()) throw std::logic_error("alpha_grad: no forward recorded on this edge");
  if (!rec->graph->has_backward_run()) throw std::logic_error("alpha_grad: backward has not run");
  return alpha_grad(edge, rec->graph->grad(rec->mixed));
}

std::vector<PruneEvent> prune_threshold(Cell& cell, double temperature, double theta, std::size_t epoch) {
  std::vector<PruneEvent> events;
  for (std::size_t ei = 0; ei < cell.edges().size(); ++ei) {
    MixedEdge& e = cell.edges()[ei];
    if (e.live_count() < 2) continue;
    const auto phi = e.phi(temperature);
    const auto best = static_cast<std::size_t>(std::max_element(phi.begin(), phi.end()) - phi.begin());
    std::vector<std::size_t> doomed;
    for (std::size_t pos = 0; pos < phi.size(); ++pos) {
      if (pos != best && phi[pos] < theta) doomed.push_back(pos);
    }
    for (auto pos : doomed) events.push_back({epoch, ei, e.source(), e.target(), e.live_name(pos), phi[pos], theta});
    for (auto it = doomed.rbegin(); it != doomed.rend(); ++it) e.prune_at(*it);
  }
  return events;
}

std::vector<PruneEvent> prune_lowest(Cell& cell, std::vector<std::vector<double>>& scores, std::size_t count,
                                     double temperature, std::size_t epoch) {
  auto& edges = cell.edges();
  if (scores.size() != edges.size()) throw std::invalid_argument("prune: score table does not match the cell");
  std::size_t removable = 0;
  for (std::size_t ei = 0; ei < edges.size(); ++ei) {
    if (scores[ei].size() != edges[ei].live_count()) throw std::invalid_argument("prune: score row does not match edge");
    removable += edges[ei].live_count() - 1;
  }
  if (count > removable) {
    throw std::invalid_argument(fmt::format("prune: cannot remove {} ops, only {} removable", count, removable));
  }
  struct Candidate {
    double score;
    std::size_t edge, pos;
  };
  std::vector<Candidate> all;
  for (std::size_t ei = 0; ei < edges.size(); ++ei) {
    for (std::size_t k = 0; k < scores[ei].size(); ++k) all.push_back({scores[ei][k], ei, k});
  }
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) { return a.score < b.score; });
  std::vector<std::size_t> remaining(edges.size());
  for (std::size_t ei = 0; ei < edges.size(); ++ei) remaining[ei] = edges[ei].live_count();
  std::vector<Candidate> chosen;
  for (const auto& c : all) {
    if (chosen.size() == count) break;
    if (remaining[c.edge] <= 1) continue;
    --remaining[c.edge];
    chosen.push_back(c);
  }
  std::vector<std::vector<double>> phis(edges.size());
  for (std::size_t ei = 0; ei < edges.size(); ++ei) phis[ei] = edges[ei].phi(temperature);

  std::vector<PruneEvent> events;
  for (const auto& c : chosen) {
    const MixedEdge& e = edges[c.edge];
    events.push_back({epoch, c.edge, e.source(), e.target(), e.live_name(c.pos), phis[c.edge][c.pos], c.score});
  }
  // Erase from the back so earlier positions stay valid.
  std::sort(chosen.begin(), chosen.end(), [](const Candidate& a, const Candidate& b) {
    return a.edge != b.edge ? a.edge < b.edge : a.pos > b.pos;
  });
  for (const auto& c : chosen) {
    edges[c.edge].prune_at(c.pos);
    scores[c.edge].erase(scores[c.edge].begin() + static_cast<std::ptrdiff_t>(c.pos));
  }
  return events;
}

std::vector<PruneEvent> prune_magnitude(Cell& cell, std::size_t count, double temperature, std::size_t epoch) {
  std::vector<std::vector<double>> scores;
  for (const auto& e : cell.edges()) {
    const auto a = e.alpha().value.data();
    scores.emplace_back(a.begin(), a.end());
  }
  return prune_lowest(cell, scores, count, temperature, epoch);
}

Genotype prune_hard_final(Cell& cell, double temperature, std::size_t keep_per_node,
                          std::vector<EdgeChoice>* choices) {
  Genotype g = derive_genotype(cell, temperature, keep_per_node, choices);
  cell.restrict_to(g);
  return g;
}

// ---------------------------------------------------------------------------
// Search

SearchResult search(const SearchConfig& config, const Dataset& train, const Dataset& val) {
  config.validate();
  if (train.size() == 0 || val.size() == 0) throw std::invalid_argument("search: empty dataset");
  if (train.size() != val.size()) {
    throw std::invalid_argument(fmt::format("search: train and validation halves differ in size ({} vs {})",
                                            train.size(), val.size()));
  }
  if (train.dims() != val.dims() || train.classes != val.classes) {
    throw std::invalid_argument("search: train and validation sets are incompatible");
  }

  Rng init_rng(config.seed);
  Rng batch_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const OpSet ops = config.opset();
  SearchModel model(train.dims(), train.classes, Cell(config.steps, config.width, ops, init_rng), init_rng);
  Cell& cell = model.cell();
  const std::size_t n_ops = ops.size();
  const std::size_t initial = cell.initial_ops();
  const std::size_t edge_count = cell.edges().size();

  const Sgd sgd(config.weight_momentum, config.weight_decay, config.grad_clip);
  const Adam adam(config.alpha_lr, config.alpha_beta1, config.alpha_beta2, config.alpha_eps);

  const bool uses_schedule_pruning =
      config.pruner == PrunerKind::kMagnitude || config.pruner == PrunerKind::kAccumGrad;
  std::vector<std::vector<double>> accum(edge_count);
  for (std::size_t ei = 0; ei < edge_count; ++ei) accum[ei].assign(cell.edges()[ei].live_count(), 0.0);

  auto temperature_at = [&](double t) { return config.schedule.temperature(t, n_ops); };
  auto threshold_at = [&](double t) {
    return config.pruner == PrunerKind::kAsap ? config.threshold.at(t, n_ops) : 0.0;
  };
  auto in_grace = [&](std::size_t epoch, double temperature) {
    return config.grace == GraceMode::kEpochs ? epoch < config.grace_epochs
                                              : !(temperature < config.grace_temperature);
  };

  SearchResult result;
  result.trace.pruner = config.pruner;
  result.trace.grace = config.grace;
  double last_temperature = temperature_at(0.0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.temperature = temperature_at(static_cast<double>(epoch));
    rec.threshold = threshold_at(static_cast<double>(epoch));
    rec.grace = in_grace(epoch, rec.temperature);
    const double lr = cosine_lr(config.weight_lr, config.weight_lr_min, epoch, config.epochs);

    const auto train_batches = batches(train.size(), config.batch_size, batch_rng);
    const auto val_batches = batches(val.size(), config.batch_size, batch_rng);
    const auto weights = model.weight_parameters();
    double loss_sum = 0.0;

    const auto start = std::chrono::steady_clock::now();
    for (std::size_t b = 0; b < train_batches.size(); ++b) {
      double temperature = rec.temperature;
      double theta = rec.threshold;
      if (config.granularity == Granularity::kStep) {
        const double t = static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(train_batches.size());
        temperature = temperature_at(t);
        theta = threshold_at(t);
      }

      zero_grads(weights);
      const auto [loss, nodes] = loss_and_grad(model, train, train_batches[b], temperature);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(fmt::format("search: non-finite training loss at epoch {} batch {}", epoch, b));
      }
      rec.graph_nodes += nodes;
      loss_sum += loss;
      sgd.step(weights, lr);

      if (in_grace(epoch, temperature)) continue;
      const auto alphas = model.alpha_parameters();
      zero_grads(alphas);
      const auto [vloss, vnodes] = loss_and_grad(model, val, val_batches[b % val_batches.size()], temperature);
      if (!std::isfinite(vloss)) {
        throw std::runtime_error(fmt::format("search: non-finite validation loss at epoch {} batch {}", epoch, b));
      }
      rec.graph_nodes += vnodes;
      if (config.pruner == PrunerKind::kAccumGrad) {
        for (std::size_t ei = 0; ei < edge_count; ++ei) {
          const auto& grad = cell.edges()[ei].alpha().grad;
          for (std::size_t k = 0; k < accum[ei].size(); ++k) accum[ei][k] += std::abs(grad[k]);
        }
      }
      adam.step(alphas);
      rec.alpha_updated = true;

      if (config.pruner == PrunerKind::kAsap && config.granularity == Granularity::kStep) {
        auto ev = prune_threshold(cell, temperature, theta, epoch);
        rec.prunes.insert(rec.prunes.end(), ev.begin(), ev.end());
      }
    }
    rec.train_loss = loss_sum / static_cast<double>(train_batches.size());

    if (config.pruner == PrunerKind::kAsap && config.granularity == Granularity::kEpoch && !rec.grace) {
      rec.prunes = prune_threshold(cell, rec.temperature, rec.threshold, epoch);
    }
    if (uses_schedule_pruning && config.epochs > config.sparsity_t0 &&
        static_cast<double>(epoch + 1) >= config.sparsity_t0) {
      const double n = static_cast<double>(config.epochs) - config.sparsity_t0;
      const double s_f = static_cast<double>(initial - edge_count) / static_cast<double>(initial);
      const double s = sparsity_schedule(0.0, s_f, config.sparsity_t0, n, 1.0, config.sparsity_power,
                                         static_cast<double>(epoch + 1));
      const auto target = static_cast<std::size_t>(std::llround(s * static_cast<double>(initial)));
      const std::size_t pruned = initial - cell.live_ops();
      if (target > pruned) {
        if (config.pruner == PrunerKind::kMagnitude) {
          rec.prunes = prune_magnitude(cell, target - pruned, rec.temperature, epoch);
          for (std::size_t ei = 0; ei < edge_count; ++ei) accum[ei].resize(cell.edges()[ei].live_count());
        } else {
          rec.prunes = prune_lowest(cell, accum, target - pruned, rec.temperature, epoch);
        }
      }
    }
    rec.epoch_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    rec.sparsity = static_cast<double>(cell.live_ops()) / static_cast<double>(initial);
    rec.entropy = cell.mean_entropy(rec.temperature);
    rec.val_acc = accuracy(model, val, rec.temperature);
    last_temperature = rec.temperature;
    result.trace.epochs.push_back(std::move(rec));

    if (config.pruner == PrunerKind::kAsap && cell.converged()) {
      result.converged = true;
      break;
    }
  }

  result.val_acc_before_extract = result.trace.epochs.back().val_acc;
  const std::size_t keep = result.converged ? 0 : config.keep_per_node;
  result.genotype = prune_hard_final(cell, last_temperature, keep, &result.choices);
  for (const auto& c : result.choices) result.ties += c.tie ? 1 : 0;
  result.val_acc_after_extract = accuracy(model, val, last_temperature);
  return result;
}

// ---------------------------------------------------------------------------
// Child training

ChildResult train_child(const Genotype& genotype, const OpSet& ops, const Dataset& train, const Dataset& test,
                        const ChildConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("child: epochs and batch size must be >= 1");
  if (train.size() == 0 || test.size() == 0) throw std::invalid_argument("child: empty dataset");
  if (train.dims() != test.dims()) throw std::invalid_argument("child: train and test dims differ");
  Rng init_rng(config.seed);
  Rng batch_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  SearchModel model(train.dims(), std::max(train.classes, test.classes),
                    Cell::from_genotype(genotype, config.width, ops, init_rng), init_rng);
  const Sgd sgd(config.momentum, config.weight_decay, config.grad_clip);
  const auto weights = model.weight_parameters();
  ChildResult out;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(config.lr, config.lr_min, epoch, config.epochs);
    double loss_sum = 0.0;
    const auto bs = batches(train.size(), config.batch_size, batch_rng);
    for (const auto& b : bs) {
      zero_grads(weights);
      const auto [loss, nodes] = loss_and_grad(model, train, b, 1.0);
      (void)nodes;
      if (!std::isfinite(loss)) throw std::runtime_error(fmt::format("child: non-finite loss at epoch {}", epoch));
      loss_sum += loss;
      sgd.step(weights, lr);
    }
    out.final_loss = loss_sum / static_cast<double>(bs.size());
  }
  out.train_acc = accuracy(model, train, 1.0);
  out.test_acc = accuracy(model, test, 1.0);
  return out;
}

ChildResult train_linear(const Dataset& train, const Dataset& test, const ChildConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("linear: epochs and batch size must be >= 1");
  if (train.size() == 0 || test.size() == 0) throw std::invalid_argument("linear: empty dataset");
  if (train.dims() != test.dims()) throw std::invalid_argument("linear: train and test dims differ");
  Rng init_rng(config.seed);
  Rng batch_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t classes = std::max(train.classes, test.classes);
  Parameter w, b;
  init_dense(w, b, train.dims(), classes, init_rng);
  const std::vector<Parameter*> params{&w, &b};
  const Sgd sgd(config.momentum, config.weight_decay, config.grad_clip);
  auto logits = [&](Graph& g, const Tensor& x) {
    return g.add(g.matmul(g.constant(x), g.parameter(w)), g.parameter(b));
  };
  auto score = [&](const Dataset& d) {
    Graph g;
    const Tensor& out = logits(g, d.features).value();
    std::size_t correct = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < out.cols(); ++c) {
        if (out.at(r, c) > out.at(r, best)) best = c;
      }
      correct += static_cast<int>(best) == d.labels[r];
    }
    return static_cast<double>(correct) / static_cast<double>(d.size());
  };
  ChildResult out;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(config.lr, config.lr_min, epoch, config.epochs);
    double loss_sum = 0.0;
    const auto bs = batches(train.size(), config.batch_size, batch_rng);
    for (const auto& idx : bs) {
      zero_grads(params);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.labels[idx[i]];
      Graph g;
      const Var loss = g.cross_entropy(logits(g, rows_of(train.features, idx)), labels);
      g.backward(loss);
      const double v = loss.value()[0];
      if (!std::isfinite(v)) throw std::runtime_error(fmt::format("linear: non-finite loss at epoch {}", epoch));
      loss_sum += v;
      sgd.step(params, lr);
    }
    out.final_loss = loss_sum / static_cast<double>(bs.size());
  }
  out.train_acc = score(train);
  out.test_acc = score(test);
  return out;
}

Genotype random_genotype(std::size_t steps, const OpSet& ops, std::size_t keep_per_node, Rng& rng) {
  std::vector<std::string> names;
  for (const auto& d : ops.ops()) {
    if (d.kind != OpKind::kZero) names.push_back(d.name);
  }
  if (names.empty()) throw std::invalid_argument("random_genotype: op set has no non-zero op");
  Genotype g;
  g.steps = steps;
  for (std::size_t node = 2; node < steps + 2; ++node) {
    std::vector<std::size_t> sources(node);
    std::iota(sources.begin(), sources.end(), 0);
    std::shuffle(sources.begin(), sources.end(), rng);
    const std::size_t k = keep_per_node == 0 ? node : std::min(keep_per_node, node);
    sources.resize(k);
    std::sort(sources.begin(), sources.end());
    for (auto s : sources) {
      std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
      g.edges.push_back({s, node, names[pick(rng)]});
    }
  }
  return g;
}

std::string format_trace_csv(const SearchTrace& trace, bool include_seconds) {
  std::string out = include_seconds
                        ? "epoch,temperature,threshold,sparsity,entropy,train_loss,val_acc,epoch_seconds,prunes\n"
                        : "epoch,temperature,threshold,sparsity,entropy,train_loss,val_acc,prunes\n";
  for (const auto& r : trace.epochs) {
    std::string prunes;
    for (const auto& p : r.prunes) {
      if (!prunes.empty()) prunes += ';';
      prunes += fmt::format("{}-{}:{}@{:.6g}", p.source, p.target, p.op, p.phi);
    }
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},", r.epoch, r.temperature, r.threshold,
                       r.sparsity, r.entropy, r.train_loss, r.val_acc);
    if (include_seconds) out += fmt::format("{:.6f},", r.epoch_seconds);
    out += prunes;
    out += '\n';
  }
  return out;
}

}  // namespace asap
