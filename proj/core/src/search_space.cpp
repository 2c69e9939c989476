#include "asap/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace asap {

std::vector<double> gibbs(std::span<const double> alpha, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument(fmt::format("gibbs: temperature must be positive, got {}", temperature));
  }
  if (alpha.empty()) throw std::invalid_argument("gibbs: empty weight vector");
  for (double a : alpha) {
    if (!std::isfinite(a)) throw std::invalid_argument("gibbs: non-finite architecture weight");
  }
  const double mx = *std::max_element(alpha.begin(), alpha.end());
  std::vector<double> phi(alpha.size());
  double z = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    phi[k] = std::exp((alpha[k] - mx) / temperature);
    z += phi[k];
  }
  for (double& p : phi) p /= z;
  return phi;
}

double normalized_entropy(std::span<const double> phi, std::size_t initial_count) {
  if (phi.size() <= 1 || initial_count <= 1) return 0.0;
  double h = 0.0;
  for (double p : phi) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(initial_count)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// MixedEdge

MixedEdge::MixedEdge(std::size_t source, std::size_t target, const OpSet& ops,
                     std::span<const std::size_t> candidates, std::size_t width, Rng& rng)
    : source_(source), target_(target), initial_count_(candidates.size()), calls_(ops.size(), 0) {
  if (source >= target) throw std::invalid_argument("edge: source must precede target");
  if (candidates.empty()) throw std::invalid_argument("edge: needs at least one candidate");
  live_.reserve(candidates.size());
  for (auto idx : candidates) {
    if (idx >= ops.size()) throw std::invalid_argument("edge: candidate index out of range");
    live_.push_back(LiveOp{idx, OpInstance(ops[idx], width, rng)});
  }
  alpha_ = Parameter(Tensor({candidates.size()}, 0.0));
}

std::vector<std::size_t> MixedEdge::live_indices() const {
  std::vector<std::size_t> out;
  out.reserve(live_.size());
  for (const auto& l : live_) out.push_back(l.op_index);
  return out;
}

std::vector<double> MixedEdge::phi(double temperature) const {
  return gibbs(alpha_.value.data(), temperature);
}

double MixedEdge::entropy(double temperature) const {
  if (live_.size() == 1) return 0.0;
  return normalized_entropy(phi(temperature), initial_count_);
}

Var MixedEdge::forward(Graph& g, Var x, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("mixed_forward: temperature must be positive");
  EdgeForward rec;
  rec.graph = &g;
  rec.temperature = temperature;
  rec.op_outputs.reserve(live_.size());
  for (auto& l : live_) {
    rec.op_outputs.push_back(l.op.apply(g, x));
    ++calls_[l.op_index];
  }
  if (live_.size() == 1) {
    rec.mixed = rec.op_outputs.front();
  } else {
    const Var phi = g.softmax(g.scale(g.parameter(alpha_), 1.0 / temperature));
    Var acc = g.mul_scalar(rec.op_outputs[0], g.index(phi, 0));
    for (std::size_t k = 1; k < live_.size(); ++k) {
      acc = g.add(acc, g.mul_scalar(rec.op_outputs[k], g.index(phi, k)));
    }
    rec.mixed = acc;
  }
  last_ = std::move(rec);
  return last_->mixed;
}

std::size_t MixedEdge::prune_op(std::size_t op_index) {
  for (std::size_t pos = 0; pos < live_.size(); ++pos) {
    if (live_[pos].op_index == op_index) return prune_at(pos);
  }
  throw std::invalid_argument(fmt::format("prune: op {} is not live on edge {}->{}", op_index,
                                          source_, target_));
}

std::size_t MixedEdge::prune_at(std::size_t pos) {
  if (pos >= live_.size()) throw std::invalid_argument("prune: position out of range");
  if (live_.size() == 1) {
    throw std::logic_error(fmt::format("prune: refusing to remove the last live op on edge {}->{}",
                                       source_, target_));
  }
  live_.erase(live_.begin() + static_cast<std::ptrdiff_t>(pos));
  std::vector<double> kept;
  kept.reserve(live_.size());
  for (std::size_t k = 0; k < alpha_.value.numel(); ++k) {
    if (k != pos) kept.push_back(alpha_.value[k]);
  }
  auto drop = [pos](const Tensor& t) {
    std::vector<double> v;
    for (std::size_t k = 0; k < t.numel(); ++k) {
      if (k != pos) v.push_back(t[k]);
    }
    const Shape shape{v.size()};
    return Tensor(shape, std::move(v));
  };
  OptimizerSlots slots;
  slots.steps = alpha_.slots.steps;
  if (alpha_.slots.first.numel() == alpha_.value.numel()) slots.first = drop(alpha_.slots.first);
  if (alpha_.slots.second.numel() == alpha_.value.numel()) slots.second = drop(alpha_.slots.second);
  const Shape shape{kept.size()};
  alpha_ = Parameter(Tensor(shape, std::move(kept)));
  alpha_.slots = std::move(slots);
  last_.reset();
  return pos;
}

// ---------------------------------------------------------------------------
// Genotype text format

std::string format_genotype(const Genotype& genotype) {
  std::string out = "# asap genotype v1\n";
  out += fmt::format("steps {}\n", genotype.steps);
  for (const auto& e : genotype.edges) out += fmt::format("edge {} {} {}\n", e.source, e.target, e.op);
  return out;
}

Genotype parse_genotype(const std::string& text) {
  Genotype g;
  bool have_steps = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument(fmt::format("genotype line {}: {}", lineno, why));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string keyword;
    if (!(ls >> keyword)) continue;
    if (keyword == "steps") {
      long long steps = -1;
      if (have_steps) fail("duplicate 'steps'");
      if (!(ls >> steps) || steps < 1) fail("expected 'steps <positive integer>'");
      g.steps = static_cast<std::size_t>(steps);
      have_steps = true;
    } else if (keyword == "edge") {
      if (!have_steps) fail("'edge' before 'steps'");
      long long src = -1, dst = -1;
      std::string op;
      if (!(ls >> src >> dst >> op)) fail("expected 'edge <source> <target> <op>'");
      if (src < 0 || dst < 2 || src >= dst || static_cast<std::size_t>(dst) > g.steps + 1) {
        fail(fmt::format("edge {} -> {} is not a forward edge of a {}-step cell", src, dst, g.steps));
      }
      try {
        find_op(op);
      } catch (const std::invalid_argument&) {
        fail(fmt::format("unknown operation '{}'", op));
      }
      for (const auto& e : g.edges) {
        if (e.source == static_cast<std::size_t>(src) && e.target == static_cast<std::size_t>(dst)) {
          fail(fmt::format("duplicate edge {} -> {}", src, dst));
        }
      }
      g.edges.push_back({static_cast<std::size_t>(src), static_cast<std::size_t>(dst), op});
    } else {
      fail(fmt::format("unknown keyword '{}'", keyword));
    }
    std::string extra;
    if (ls >> extra) fail(fmt::format("trailing token '{}'", extra));
  }
  if (!have_steps) throw std::invalid_argument("genotype: missing 'steps' line");
  return g;
}

Genotype read_genotype(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open genotype file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_genotype(ss.str());
}

void write_genotype(const std::string& path, const Genotype& genotype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write genotype file " + path);
  out << format_genotype(genotype);
  if (!out) throw std::runtime_error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Cell

std::size_t cell_edge_count(std::size_t steps) { return 2 * steps + steps * (steps - 1) / 2; }

Cell::Cell(std::size_t steps, std::size_t width, OpSet ops)
    : steps_(steps), width_(width), ops_(std::move(ops)) {
  if (steps < 1) throw std::invalid_argument("cell: needs at least one intermediate node");
  if (width < 1) throw std::invalid_argument("cell: width must be >= 1");
}

Cell::Cell(std::size_t steps, std::size_t width, const OpSet& ops, Rng& rng)
    : Cell(steps, width, ops) {
  std::vector<std::size_t> all(ops_.size());
  std::iota(all.begin(), all.end(), 0);
  edges_.reserve(cell_edge_count(steps));
  for (std::size_t node = 2; node < steps + 2; ++node) {
    for (std::size_t src = 0; src < node; ++src) edges_.emplace_back(src, node, ops_, all, width, rng);
  }
  init_dense(proj_w_, proj_b_, steps * width, width, rng);
}

Cell Cell::from_genotype(const Genotype& genotype, std::size_t width, const OpSet& ops, Rng& rng) {
  Cell cell(genotype.steps, width, ops);
  for (const auto& e : genotype.edges) {
    if (e.source >= e.target || e.target < 2 || e.target > genotype.steps + 1) {
      throw std::invalid_argument(fmt::format("cell: invalid genotype edge {} -> {}", e.source, e.target));
    }
    const std::size_t idx[] = {cell.ops_.index_of(e.op)};
    cell.edges_.emplace_back(e.source, e.target, cell.ops_, idx, width, rng);
  }
  std::stable_sort(cell.edges_.begin(), cell.edges_.end(), [](const MixedEdge& a, const MixedEdge& b) {
    return a.target() != b.target() ? a.target() < b.target() : a.source() < b.source();
  });
  init_dense(cell.proj_w_, cell.proj_b_, genotype.steps * width, width, rng);
  return cell;
}

Var Cell::forward(Graph& g, Var s0, Var s1, double temperature) {
  for (Var s : {s0, s1}) {
    const Shape& sh = s.shape();
    if (sh.size() != 2 || sh[1] != width_) {
      throw std::invalid_argument(
          fmt::format("cell: expected inputs of width {}, got {}", width_, shape_str(sh)));
    }
  }
  if (s0.shape() != s1.shape()) {
    throw std::invalid_argument(fmt::format("cell: input shapes differ: {} vs {}",
                                            shape_str(s0.shape()), shape_str(s1.shape())));
  }
  std::vector<std::optional<Var>> nodes(steps_ + 2);
  nodes[0] = s0;
  nodes[1] = s1;
  // Edges are stored grouped by ascending target, so sources are always ready.
  for (auto& e : edges_) {
    const Var in = nodes[e.source()].has_value() ? *nodes[e.source()] : g.constant(Tensor(s0.shape()));
    const Var out = e.forward(g, in, temperature);
    auto& slot = nodes[e.target()];
    slot = slot.has_value() ? g.add(*slot, out) : out;
  }
  std::vector<Var> parts;
  parts.reserve(steps_);
  for (std::size_t n = 2; n < steps_ + 2; ++n) {
    parts.push_back(nodes[n].has_value() ? *nodes[n] : g.constant(Tensor(s0.shape())));
  }
  const Var cat = parts.size() == 1 ? parts.front() : g.concat_cols(parts);
  return g.add(g.matmul(cat, g.parameter(proj_w_)), g.parameter(proj_b_));
}

void Cell::restrict_to(const Genotype& genotype) {
  if (genotype.steps != steps_) {
    throw std::invalid_argument(fmt::format("cell: genotype has {} steps, cell has {}", genotype.steps, steps_));
  }
  std::vector<MixedEdge> kept;
  for (auto& e : edges_) {
    const auto it = std::find_if(genotype.edges.begin(), genotype.edges.end(), [&](const GenotypeEdge& g) {
      return g.source == e.source() && g.target == e.target();
    });
    if (it == genotype.edges.end()) continue;
    const std::size_t op = ops_.index_of(it->op);
    const auto live = e.live_indices();
    if (std::find(live.begin(), live.end(), op) == live.end()) {
      throw std::invalid_argument(fmt::format("cell: op '{}' is not live on edge {}->{}", it->op,
                                              e.source(), e.target()));
    }
    for (std::size_t pos = e.live_count(); pos-- > 0;) {
      if (e.live_indices()[pos] != op) e.prune_at(pos);
    }
    kept.push_back(std::move(e));
  }
  edges_ = std::move(kept);
}

std::size_t Cell::live_ops() const {
  std::size_t n = 0;
  for (const auto& e : edges_) n += e.live_count();
  return n;
}

std::size_t Cell::initial_ops() const {
  std::size_t n = 0;
  for (const auto& e : edges_) n += e.initial_count();
  return n;
}

bool Cell::converged() const {
  return std::all_of(edges_.begin(), edges_.end(),
                     [](const MixedEdge& e) { return e.live_count() == 1; });
}

double Cell::mean_entropy(double temperature) const {
  if (edges_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : edges_) s += e.entropy(temperature);
  return s / static_cast<double>(edges_.size());
}

std::vector<Parameter*> Cell::weight_parameters() {
  std::vector<Parameter*> out;
  for (auto& e : edges_) {
    for (std::size_t k = 0; k < e.live_count(); ++k) {
      for (auto& p : e.live_op(k).parameters()) out.push_back(&p);
    }
  }
  out.push_back(&proj_w_);
  out.push_back(&proj_b_);
  return out;
}

std::vector<Parameter*> Cell::alpha_parameters() {
  std::vector<Parameter*> out;
  out.reserve(edges_.size());
  for (auto& e : edges_) out.push_back(&e.alpha());
  return out;
}

Genotype derive_genotype(const Cell& cell, double temperature, std::size_t keep_per_node,
                         std::vector<EdgeChoice>* choices) {
  constexpr double kTieTol = 1e-12;
  std::vector<EdgeChoice> picked;
  for (std::size_t ei = 0; ei < cell.edges().size(); ++ei) {
    const MixedEdge& e = cell.edges()[ei];
    const auto phi = e.phi(temperature);
    // `zero` never wins while a real op is still live.
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < e.live_count(); ++k) {
      if (e.live_op(k).descriptor().kind != OpKind::kZero) order.push_back(k);
    }
    if (order.empty()) continue;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return phi[a] > phi[b]; });
    EdgeChoice c{ei, e.live_name(order[0]), phi[order[0]], 0.0, false};
    if (order.size() > 1) {
      c.phi_runner_up = phi[order[1]];
      c.tie = std::abs(c.phi_kept - c.phi_runner_up) <= kTieTol;
    }
    picked.push_back(std::move(c));
  }

  Genotype g;
  g.steps = cell.steps();
  std::vector<EdgeChoice> kept;
  for (std::size_t node = 2; node < cell.steps() + 2; ++node) {
    std::vector<EdgeChoice> incoming;
    for (const auto& c : picked) {
      if (cell.edges()[c.edge].target() == node) incoming.push_back(c);
    }
    std::stable_sort(incoming.begin(), incoming.end(),
                     [](const EdgeChoice& a, const EdgeChoice& b) { return a.phi_kept > b.phi_kept; });
    if (keep_per_node > 0 && incoming.size() > keep_per_node) incoming.resize(keep_per_node);
    std::sort(incoming.begin(), incoming.end(),
              [](const EdgeChoice& a, const EdgeChoice& b) { return a.edge < b.edge; });
    for (auto& c : incoming) {
      const MixedEdge& e = cell.edges()[c.edge];
      g.edges.push_back({e.source(), e.target(), c.op});
      kept.push_back(std::move(c));
    }
  }
  if (choices != nullptr) *choices = std::move(kept);
  return g;
}

}  // namespace asap
