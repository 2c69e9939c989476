#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "asap/asap_engine.hpp"
#include "grad_check.hpp"

using namespace asap;
using asap::testing::grad_check;
using asap::testing::probe;
using asap::testing::random_tensor;
using asap::testing::rel_error;

namespace {

MixedEdge full_edge(const OpSet& ops, std::size_t width, Rng& rng) {
  std::vector<std::size_t> all(ops.size());
  std::iota(all.begin(), all.end(), 0);
  return MixedEdge(0, 2, ops, all, width, rng);
}

SearchConfig small_config(std::uint64_t seed) {
  SearchConfig c;
  c.epochs = 20;
  c.steps = 2;
  c.width = 4;
  c.batch_size = 32;
  c.weight_lr = 0.05;
  c.alpha_lr = 0.02;
  c.grace_epochs = 2;
  c.schedule.t0 = 1.3;
  c.schedule.decay = 0.85;
  c.seed = seed;
  return c;
}

std::pair<Dataset, Dataset> halves(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  return split_half(make_dataset(kind, n, 2, 2, 0.1, seed), seed);
}

}  // namespace

TEST_CASE("alpha gradient closed form") {
  Rng rng(51);
  std::mt19937_64 data_rng(52);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  SUBCASE("matches autodiff and central differences") {
    for (double t : {0.15, 0.7, 1.0, 2.5}) {
      MixedEdge e = full_edge(default_opset(3), 3, rng);
      for (auto& v : e.alpha().value.data()) v = u(data_rng);
      const Tensor x = random_tensor({5, 3}, data_rng, 0.05);
      Graph g;
      const Var loss = probe(g, e.forward(g, g.constant(x), t));
      e.alpha().zero_grad();
      g.backward(loss);
      const auto closed = alpha_grad(e);
      const Tensor autodiff = e.alpha().grad;
      for (std::size_t k = 0; k < closed.size(); ++k) CHECK(rel_error(closed[k], autodiff[k], 1e-12) < 1e-9);
      CHECK(grad_check({&e.alpha()}, [&](Graph& h) { return probe(h, e.forward(h, h.constant(x), t)); }) < 1e-4);
      // Recompute from the recorded outputs after the check rebuilt the graph.
      Graph g2;
      const Var out = e.forward(g2, g2.constant(x), t);
      g2.backward(probe(g2, out));
      const auto again = alpha_grad(e, g2.grad(out));
      for (std::size_t k = 0; k < closed.size(); ++k) CHECK(again[k] == doctest::Approx(closed[k]).epsilon(1e-12));
    }
  }

  SUBCASE("identical outputs give zero gradient") {
    const OpSet ops = make_opset({"identity", "dense"});
    MixedEdge e = full_edge(ops, 3, rng);
    e.live_op(1).parameters()[0].value = Tensor::identity(3);
    e.live_op(1).parameters()[1].value.fill(0.0);
    e.alpha().value = Tensor::vector({0.4, -0.3});
    Graph g;
    const Var out = e.forward(g, g.constant(random_tensor({2, 3}, data_rng)), 0.8);
    g.backward(probe(g, out));
    for (double v : alpha_grad(e)) CHECK(v == doctest::Approx(0.0).scale(1e-15));
  }

  SUBCASE("uniform phi gradient sums to zero") {
    MixedEdge e = full_edge(default_opset(4), 4, rng);
    Graph g;
    const Var out = e.forward(g, g.constant(random_tensor({3, 4}, data_rng)), 1.3);
    g.backward(probe(g, out));
    const auto grad = alpha_grad(e);
    CHECK(std::abs(std::accumulate(grad.begin(), grad.end(), 0.0)) <= 1e-12);
  }

  SUBCASE("needs a recorded pass") {
    MixedEdge e = full_edge(default_opset(2), 2, rng);
    CHECK_THROWS_AS(alpha_grad(e), std::logic_error);
    Graph g;
    e.forward(g, g.constant(Tensor({1, 2}, 1.0)), 1.0);
    CHECK_THROWS_AS(alpha_grad(e), std::logic_error);
  }
}

TEST_CASE("threshold pruning") {
  Rng rng(53);
  Cell cell(1, 2, make_opset({"identity", "dense", "max_pool"}), rng);
  cell.edges()[0].alpha().value = Tensor::vector({2.0, 0.0, 0.1});
  cell.edges()[1].alpha().value = Tensor::vector({-3.0, -3.0, -3.0});
  const auto events = prune_threshold(cell, 0.5, 0.05, 7);
  REQUIRE(events.size() == 2);
  for (const auto& e : events) {
    CHECK(e.phi < 0.05);
    CHECK(e.edge == 0);
    CHECK(e.epoch == 7);
  }
  CHECK(events[0].op == "dense");
  CHECK(cell.edges()[0].live_count() == 1);
  CHECK(cell.edges()[1].live_count() == 3);

  // Everything below threshold: the argmax stays.
  Cell pair(1, 2, make_opset({"identity", "zero"}), rng);
  CHECK(prune_threshold(pair, 1.0, 0.9, 0).size() == 2);
  for (const auto& e : pair.edges()) CHECK(e.live_name(0) == "identity");
}

TEST_CASE("lowest-score pruning") {
  Rng rng(54);
  Cell cell(1, 2, make_opset({"identity", "dense", "max_pool"}), rng);
  cell.edges()[0].alpha().value = Tensor::vector({0.5, -1.0, 0.2});
  cell.edges()[1].alpha().value = Tensor::vector({-2.0, -3.0, 0.0});
  const auto events = prune_magnitude(cell, 3, 1.0, 4);
  REQUIRE(events.size() == 3);
  CHECK(events[0].edge == 1);
  CHECK(events[0].op == "dense");
  CHECK(events[0].threshold == -3.0);
  CHECK(events[1].edge == 1);
  CHECK(events[1].op == "identity");
  // Edge 1 is down to one op, so the next smallest comes from edge 0.
  CHECK(events[2].edge == 0);
  CHECK(events[2].op == "dense");
  CHECK(cell.live_ops() == 3);
  CHECK(cell.edges()[1].live_name(0) == "max_pool");

  CHECK_THROWS_AS(prune_magnitude(cell, 2, 1.0, 5), std::invalid_argument);
  std::vector<std::vector<double>> bad{{1.0}};
  CHECK_THROWS_AS(prune_lowest(cell, bad, 0, 1.0, 5), std::invalid_argument);

  std::vector<std::vector<double>> scores{{0.3, 0.1}, {7.0}};
  const auto more = prune_lowest(cell, scores, 1, 1.0, 5);
  REQUIRE(more.size() == 1);
  CHECK(more[0].op == "max_pool");
  CHECK(scores[0].size() == 1);
  CHECK(scores[0][0] == 0.3);
  CHECK(cell.converged());
}

TEST_CASE("hard prune leaves one op on the kept edges") {
  Rng rng(55);
  Cell cell(3, 3, default_opset(3), rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& e : cell.edges()) {
    for (auto& v : e.alpha().value.data()) v = u(rng);
  }
  std::vector<EdgeChoice> choices;
  const Genotype g = prune_hard_final(cell, 0.5, 2, &choices);
  CHECK(g.edges.size() == 6);
  CHECK(choices.size() == g.edges.size());
  CHECK(cell.edges().size() == g.edges.size());
  CHECK(cell.converged());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    CHECK(cell.edges()[i].live_name(0) == g.edges[i].op);
    CHECK(choices[i].phi_kept >= choices[i].phi_runner_up);
  }
}

TEST_CASE("search keeps its invariants") {
  const auto [train, val] = halves(DatasetKind::kBlobs, 400, 3);
  SearchConfig cfg = small_config(7);
  const SearchResult r = search(cfg, train, val);
  REQUIRE(!r.trace.epochs.empty());
  CHECK(r.trace.epochs.size() <= cfg.epochs);
  double prev = 1.0;
  std::size_t pruned = 0;
  for (const auto& rec : r.trace.epochs) {
    CHECK(rec.sparsity <= prev);
    CHECK(rec.entropy >= 0.0);
    CHECK(rec.entropy <= 1.0 + 1e-12);
    CHECK(rec.val_acc >= 0.0);
    CHECK(rec.val_acc <= 1.0);
    CHECK(rec.grace == (rec.epoch < cfg.grace_epochs));
    CHECK(rec.alpha_updated == !rec.grace);
    if (rec.grace) CHECK(rec.prunes.empty());
    for (const auto& p : rec.prunes) CHECK(p.phi < rec.threshold);
    CHECK(rec.temperature == doctest::Approx(temp_exponential(1.3, 0.85, static_cast<double>(rec.epoch))));
    pruned += rec.prunes.size();
    prev = rec.sparsity;
  }
  const std::size_t initial = cell_edge_count(cfg.steps) * default_opset(cfg.width).size();
  CHECK(static_cast<double>(initial - pruned) / static_cast<double>(initial) ==
        doctest::Approx(r.trace.epochs.back().sparsity));
  CHECK(!r.genotype.edges.empty());
  CHECK(r.genotype.steps == cfg.steps);
  if (r.converged) CHECK(r.trace.epochs.back().sparsity * static_cast<double>(initial) == doctest::Approx(5.0));

  // Bit-identical reruns.
  const SearchResult again = search(cfg, train, val);
  CHECK(again.genotype == r.genotype);
  CHECK(format_trace_csv(again.trace, false) == format_trace_csv(r.trace, false));
}

TEST_CASE("grace that never ends leaves alpha untouched") {
  const auto [train, val] = halves(DatasetKind::kBlobs, 200, 4);
  SearchConfig cfg = small_config(8);
  cfg.epochs = 6;
  cfg.grace = GraceMode::kTemperature;
  cfg.grace_temperature = 0.01;
  const SearchResult r = search(cfg, train, val);
  CHECK(r.trace.epochs.size() == 6);
  for (const auto& rec : r.trace.epochs) {
    CHECK(rec.grace);
    CHECK_FALSE(rec.alpha_updated);
    CHECK(rec.prunes.empty());
    CHECK(rec.sparsity == 1.0);
    CHECK(rec.entropy == doctest::Approx(1.0));
  }
  CHECK_FALSE(r.converged);
  for (const auto& c : r.choices) CHECK(c.tie);
}

TEST_CASE("a zero threshold never prunes") {
  const auto [train, val] = halves(DatasetKind::kXorGrid, 200, 5);
  SearchConfig cfg = small_config(9);
  cfg.epochs = 8;
  cfg.threshold.kind = ThresholdPolicy::Kind::kNone;
  const SearchResult r = search(cfg, train, val);
  CHECK(r.trace.epochs.size() == 8);
  for (const auto& rec : r.trace.epochs) {
    CHECK(rec.prunes.empty());
    CHECK(rec.sparsity == 1.0);
  }
}

TEST_CASE("zero is pruned against identity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    const auto [train, val] = halves(DatasetKind::kBlobs, 200, 100 + seed);
    SearchConfig cfg = small_config(seed);
    cfg.ops = {"zero", "identity"};
    cfg.steps = 1;
    cfg.epochs = 30;
    cfg.grace_epochs = 1;
    const SearchResult r = search(cfg, train, val);
    std::size_t zero_pruned = 0;
    for (const auto& rec : r.trace.epochs) {
      for (const auto& p : rec.prunes) {
        CHECK(p.op == "zero");
        ++zero_pruned;
      }
    }
    CHECK(zero_pruned == 2);
    CHECK(r.converged);
  }
}

TEST_CASE("schedule pruners reach one op per edge") {
  const auto [train, val] = halves(DatasetKind::kBlobs, 200, 6);
  for (auto pruner : {PrunerKind::kMagnitude, PrunerKind::kAccumGrad}) {
    CAPTURE(to_string(pruner));
    SearchConfig cfg = small_config(10);
    cfg.pruner = pruner;
    cfg.epochs = 8;
    cfg.sparsity_t0 = 3;
    const SearchResult r = search(cfg, train, val);
    CHECK(r.trace.epochs.size() == 8);
    CHECK(r.trace.epochs.back().sparsity * static_cast<double>(5 * 7) == doctest::Approx(5.0));
    for (std::size_t e = 0; e + 1 < 3; ++e) CHECK(r.trace.epochs[e].prunes.empty());
  }
}

TEST_CASE("search rejects bad inputs") {
  const auto [train, val] = halves(DatasetKind::kBlobs, 200, 7);
  SearchConfig cfg = small_config(1);
  CHECK_THROWS_AS(search(cfg, Dataset{}, val), std::invalid_argument);
  CHECK_THROWS_AS(search(cfg, train, val.subset({0, 1, 2})), std::invalid_argument);
  SearchConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(search(bad, train, val), std::invalid_argument);
  bad = cfg;
  bad.ops = {"identity", "conv3x3"};
  CHECK_THROWS_AS(search(bad, train, val), std::invalid_argument);

  Dataset poisoned = train;
  poisoned.features.data()[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(search(cfg, poisoned, val), doctest::Contains("non-finite"), std::runtime_error);

  CHECK(parse_pruner_kind("darts_hard") == PrunerKind::kDartsHard);
  CHECK_THROWS_AS(parse_pruner_kind("lottery"), std::invalid_argument);
  CHECK(parse_grace_mode("temperature") == GraceMode::kTemperature);
  CHECK(parse_granularity("step") == Granularity::kStep);
}

TEST_CASE("child training and random cells") {
  const Dataset data = make_dataset(DatasetKind::kBlobs, 400, 2, 2, 0.2, 8);
  const auto [train, test] = split_half(data, 8);
  const OpSet ops = default_opset(4);
  Rng rng(12);
  const Genotype g = random_genotype(3, ops, 2, rng);
  CHECK(g.steps == 3);
  CHECK(g.edges.size() == 6);
  for (const auto& e : g.edges) {
    CHECK(e.op != "zero");
    CHECK(e.source < e.target);
  }
  Rng same(12);
  CHECK(random_genotype(3, ops, 2, same) == g);
  CHECK_THROWS_AS(random_genotype(2, make_opset({"zero"}), 2, rng), std::invalid_argument);

  ChildConfig cfg;
  cfg.width = 4;
  cfg.epochs = 10;
  cfg.seed = 3;
  const ChildResult a = train_child(g, ops, train, test, cfg);
  CHECK(a.test_acc > 0.9);
  CHECK(std::isfinite(a.final_loss));
  const ChildResult b = train_child(g, ops, train, test, cfg);
  CHECK(a.test_acc == b.test_acc);
  CHECK(a.final_loss == b.final_loss);
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_child(g, ops, train, test, cfg), std::invalid_argument);
}

TEST_CASE("trace csv") {
  SearchTrace t;
  EpochRecord r;
  r.epoch = 3;
  r.temperature = 0.5;
  r.epoch_seconds = 1.25;
  r.prunes.push_back({3, 0, 0, 2, "dense", 0.01, 0.05});
  r.prunes.push_back({3, 1, 1, 2, "zero", 0.02, 0.05});
  t.epochs.push_back(r);
  const std::string with = format_trace_csv(t);
  CHECK(with.rfind("epoch,temperature,threshold,sparsity,entropy,train_loss,val_acc,epoch_seconds,prunes\n", 0) == 0);
  CHECK(with.find("1.250000,0-2:dense@0.01;1-2:zero@0.02\n") != std::string::npos);
  const std::string without = format_trace_csv(t, false);
  CHECK(without.rfind("epoch,temperature,threshold,sparsity,entropy,train_loss,val_acc,prunes\n", 0) == 0);
  CHECK(without.find("1.25") == std::string::npos);
}
