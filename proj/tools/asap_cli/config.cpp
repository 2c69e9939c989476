#include "config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace asap::cli {
namespace {

using Handler = std::function<void(const YAML::Node&)>;

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    const auto mark = at.Mark();
    if (mark.line >= 0) throw ConfigError(fmt::format("{}:{}: {}", source_, mark.line + 1, message));
    throw ConfigError(fmt::format("{}: {}", source_, message));
  }

  void section(const YAML::Node& node, const std::string& name, const std::map<std::string, Handler>& keys) const {
    if (!node.IsMap()) fail(node, fmt::format("section '{}' must be a mapping", name));
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      const auto it = keys.find(key);
      if (it == keys.end()) {
        std::string expected;
        for (const auto& [k, h] : keys) expected += (expected.empty() ? "" : ", ") + k;
        fail(kv.first, fmt::format("unknown key '{}' in section '{}' (expected one of: {})", key, name, expected));
      }
      it->second(kv.second);
    }
  }

  double number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, fmt::format("'{}' must be a number", key));
    const std::string& s = n.Scalar();
    if (s == ".inf" || s == "inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
      fail(n, fmt::format("'{}' must be a number, got '{}'", key, s));
    }
    return v;
  }

  double positive(const YAML::Node& n, const std::string& key) const {
    const double v = number(n, key);
    if (!(v > 0.0)) fail(n, fmt::format("'{}' must be > 0", key));
    return v;
  }

  double non_negative(const YAML::Node& n, const std::string& key) const {
    const double v = number(n, key);
    if (v < 0.0) fail(n, fmt::format("'{}' must be >= 0", key));
    return v;
  }

  std::uint64_t count(const YAML::Node& n, const std::string& key, std::uint64_t min = 0) const {
    if (!n.IsScalar()) fail(n, fmt::format("'{}' must be an integer", key));
    const std::string& s = n.Scalar();
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      fail(n, fmt::format("'{}' must be a non-negative integer, got '{}'", key, s));
    }
    if (v < min) fail(n, fmt::format("'{}' must be >= {}", key, min));
    return v;
  }

  std::string text(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, fmt::format("'{}' must be a string", key));
    return n.Scalar();
  }

  template <class Parse>
  auto choice(const YAML::Node& n, const std::string& key, Parse parse) const {
    const std::string s = text(n, key);
    try {
      return parse(s);
    } catch (const std::invalid_argument& e) {
      fail(n, e.what());
    }
  }

  template <class F>
  void list(const YAML::Node& n, const std::string& key, F each) const {
    if (!n.IsSequence()) fail(n, fmt::format("'{}' must be a list", key));
    if (n.size() == 0) fail(n, fmt::format("'{}' must not be empty", key));
    for (const auto& item : n) each(item);
  }

 private:
  std::string source_;
};

std::map<std::string, Handler> nu_keys(const Reader& r, NuSequence& nu) {
  return {
      {"kind", [&](const YAML::Node& n) {
         const std::string s = r.text(n, "nu.kind");
         if (s == "constant") nu.kind = NuSequence::Kind::kConstant;
         else if (s == "power") nu.kind = NuSequence::Kind::kPower;
         else r.fail(n, fmt::format("unknown nu kind '{}' (expected constant, power)", s));
       }},
      {"scale", [&](const YAML::Node& n) { nu.scale = r.non_negative(n, "nu.scale"); }},
      {"power", [&](const YAML::Node& n) { nu.power = r.positive(n, "nu.power"); }},
  };
}

}  // namespace

void RunConfig::require(const std::string& section) const {
  if (!sections.count(section)) {
    throw ConfigError(fmt::format("{}: missing required section '{}'", source, section));
  }
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  // Toy-scale defaults; every one can be overridden in the file.
  cfg.data.spec.n = 2000;
  cfg.data.spec.seed = 1000;
  cfg.search.batch_size = 64;
  cfg.child.width = cfg.search.width;

  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}: {}", source, e.mark.line + 1, e.msg));
  }
  const Reader r(source);
  if (root.IsNull()) throw ConfigError(fmt::format("{}: empty configuration", source));

  bool child_width_set = false;
  bool child_lr_set = false;
  bool child_batch_set = false;
  auto& s = cfg.search;
  auto& d = cfg.data.spec;

  std::map<std::string, Handler> top{
      {"name", [&](const YAML::Node& n) {
         cfg.name = r.text(n, "name");
         const bool ok = !cfg.name.empty() && std::all_of(cfg.name.begin(), cfg.name.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
         });
         if (!ok) r.fail(n, "'name' may only use letters, digits, '_', '-' and '.'");
       }},
      {"dataset", [&](const YAML::Node& n) {
         r.section(n, "dataset", {
             {"kind", [&](const YAML::Node& v) { d.kind = r.choice(v, "kind", parse_dataset_kind); }},
             {"n", [&](const YAML::Node& v) { d.n = r.count(v, "n", 1); }},
             {"dims", [&](const YAML::Node& v) { d.dims = r.count(v, "dims", 2); }},
             {"classes", [&](const YAML::Node& v) { d.classes = r.count(v, "classes", 2); }},
             {"noise", [&](const YAML::Node& v) { d.noise = r.non_negative(v, "noise"); }},
             {"seed", [&](const YAML::Node& v) { d.seed = r.count(v, "seed"); }},
         });
       }},
      {"cell", [&](const YAML::Node& n) {
         r.section(n, "cell", {
             {"steps", [&](const YAML::Node& v) { s.steps = r.count(v, "steps", 1); }},
             {"width", [&](const YAML::Node& v) { s.width = r.count(v, "width", 1); }},
             {"ops", [&](const YAML::Node& v) {
                s.ops.clear();
                r.list(v, "ops", [&](const YAML::Node& item) { s.ops.push_back(r.text(item, "ops")); });
                try {
                  (void)make_opset(s.ops);
                } catch (const std::invalid_argument& e) {
                  r.fail(v, e.what());
                }
              }},
         });
       }},
      {"schedule", [&](const YAML::Node& n) {
         auto& p = s.schedule;
         r.section(n, "schedule", {
             {"kind", [&](const YAML::Node& v) { p.kind = r.choice(v, "kind", parse_schedule_kind); }},
             {"t0", [&](const YAML::Node& v) { p.t0 = r.positive(v, "t0"); }},
             {"decay", [&](const YAML::Node& v) {
                p.decay = r.positive(v, "decay");
                if (p.decay >= 1.0) r.fail(v, "'decay' must be in (0, 1)");
              }},
             {"eta_l", [&](const YAML::Node& v) { p.eta_l = r.positive(v, "eta_l"); }},
             {"delta", [&](const YAML::Node& v) {
                p.delta = r.positive(v, "delta");
                if (p.delta >= 1.0) r.fail(v, "'delta' must be in (0, 1)");
              }},
             {"nu", [&](const YAML::Node& v) { r.section(v, "schedule.nu", nu_keys(r, p.nu)); }},
             {"granularity", [&](const YAML::Node& v) { s.granularity = r.choice(v, "granularity", parse_granularity); }},
         });
       }},
      {"threshold", [&](const YAML::Node& n) {
         auto& t = s.threshold;
         r.section(n, "threshold", {
             {"kind", [&](const YAML::Node& v) { t.kind = r.choice(v, "kind", parse_threshold_kind); }},
             {"numerator", [&](const YAML::Node& v) { t.numerator = r.non_negative(v, "numerator"); }},
             {"nu", [&](const YAML::Node& v) { r.section(v, "threshold.nu", nu_keys(r, t.nu)); }},
         });
       }},
      {"pruner", [&](const YAML::Node& n) {
         r.section(n, "pruner", {
             {"kind", [&](const YAML::Node& v) { s.pruner = r.choice(v, "kind", parse_pruner_kind); }},
             {"grace", [&](const YAML::Node& v) { s.grace = r.choice(v, "grace", parse_grace_mode); }},
             {"grace_epochs", [&](const YAML::Node& v) { s.grace_epochs = r.count(v, "grace_epochs"); }},
             {"grace_temperature", [&](const YAML::Node& v) { s.grace_temperature = r.positive(v, "grace_temperature"); }},
             {"keep_per_node", [&](const YAML::Node& v) { s.keep_per_node = r.count(v, "keep_per_node"); }},
             {"sparsity_t0", [&](const YAML::Node& v) { s.sparsity_t0 = r.non_negative(v, "sparsity_t0"); }},
             {"sparsity_power", [&](const YAML::Node& v) {
                const auto p = r.count(v, "sparsity_power", 1);
                if (p != 1 && p != 3) r.fail(v, "'sparsity_power' must be 1 or 3");
                s.sparsity_power = static_cast<int>(p);
              }},
         });
       }},
      {"optimizer", [&](const YAML::Node& n) {
         r.section(n, "optimizer", {
             {"batch_size", [&](const YAML::Node& v) { s.batch_size = r.count(v, "batch_size", 1); }},
             {"weight_lr", [&](const YAML::Node& v) { s.weight_lr = r.positive(v, "weight_lr"); }},
             {"weight_lr_min", [&](const YAML::Node& v) { s.weight_lr_min = r.positive(v, "weight_lr_min"); }},
             {"momentum", [&](const YAML::Node& v) { s.weight_momentum = r.non_negative(v, "momentum"); }},
             {"weight_decay", [&](const YAML::Node& v) { s.weight_decay = r.non_negative(v, "weight_decay"); }},
             {"grad_clip", [&](const YAML::Node& v) { s.grad_clip = r.non_negative(v, "grad_clip"); }},
             {"alpha_lr", [&](const YAML::Node& v) { s.alpha_lr = r.positive(v, "alpha_lr"); }},
             {"alpha_beta1", [&](const YAML::Node& v) { s.alpha_beta1 = r.non_negative(v, "alpha_beta1"); }},
             {"alpha_beta2", [&](const YAML::Node& v) { s.alpha_beta2 = r.non_negative(v, "alpha_beta2"); }},
             {"alpha_eps", [&](const YAML::Node& v) { s.alpha_eps = r.positive(v, "alpha_eps"); }},
         });
       }},
      {"epochs", [&](const YAML::Node& n) { s.epochs = r.count(n, "epochs", 1); }},
      {"child", [&](const YAML::Node& n) {
         auto& c = cfg.child;
         r.section(n, "child", {
             {"epochs", [&](const YAML::Node& v) { c.epochs = r.count(v, "epochs", 1); }},
             {"batch_size", [&](const YAML::Node& v) {
                c.batch_size = r.count(v, "batch_size", 1);
                child_batch_set = true;
              }},
             {"width", [&](const YAML::Node& v) {
                c.width = r.count(v, "width", 1);
                child_width_set = true;
              }},
             {"lr", [&](const YAML::Node& v) {
                c.lr = r.positive(v, "lr");
                child_lr_set = true;
              }},
             {"lr_min", [&](const YAML::Node& v) { c.lr_min = r.positive(v, "lr_min"); }},
             {"momentum", [&](const YAML::Node& v) { c.momentum = r.non_negative(v, "momentum"); }},
             {"weight_decay", [&](const YAML::Node& v) { c.weight_decay = r.non_negative(v, "weight_decay"); }},
             {"grad_clip", [&](const YAML::Node& v) { c.grad_clip = r.non_negative(v, "grad_clip"); }},
         });
       }},
      {"seeds", [&](const YAML::Node& n) {
         cfg.seeds.clear();
         r.list(n, "seeds", [&](const YAML::Node& item) {
           const auto seed = r.count(item, "seeds");
           if (std::find(cfg.seeds.begin(), cfg.seeds.end(), seed) != cfg.seeds.end()) {
             r.fail(item, fmt::format("duplicate seed {}", seed));
           }
           cfg.seeds.push_back(seed);
         });
       }},
      {"output", [&](const YAML::Node& n) { cfg.output = r.text(n, "output"); }},
      {"jobs", [&](const YAML::Node& n) { cfg.jobs = r.count(n, "jobs", 1); }},
      {"simulation", [&](const YAML::Node& n) {
         auto& m = cfg.simulation.emplace();
         r.section(n, "simulation", {
             {"arms", [&](const YAML::Node& v) {
                m.arms.clear();
                r.list(v, "arms", [&](const YAML::Node& i) { m.arms.push_back(r.count(i, "arms", 2)); });
              }},
             {"delta", [&](const YAML::Node& v) {
                m.deltas.clear();
                r.list(v, "delta", [&](const YAML::Node& i) {
                  const double x = r.positive(i, "delta");
                  if (x >= 1.0) r.fail(i, "'delta' must be in (0, 1)");
                  m.deltas.push_back(x);
                });
              }},
             {"gap", [&](const YAML::Node& v) {
                m.gaps.clear();
                r.list(v, "gap", [&](const YAML::Node& i) { m.gaps.push_back(r.positive(i, "gap")); });
              }},
             {"eta_l", [&](const YAML::Node& v) { m.eta_l = r.positive(v, "eta_l"); }},
             {"noise", [&](const YAML::Node& v) { m.noise = r.choice(v, "noise", parse_noise_law); }},
             {"sigma", [&](const YAML::Node& v) { m.sigma = r.positive(v, "sigma"); }},
             {"trials", [&](const YAML::Node& v) { m.trials = r.count(v, "trials", 1); }},
             {"max_steps", [&](const YAML::Node& v) { m.max_steps = r.count(v, "max_steps", 1); }},
             {"threads", [&](const YAML::Node& v) { m.threads = r.count(v, "threads"); }},
         });
         for (double g : m.gaps) {
           if (!(g / 2.0 < m.eta_l)) r.fail(n, fmt::format("gap {} needs |mean| = gap/2 below eta_l = {}", g, m.eta_l));
         }
       }},
      {"compare", [&](const YAML::Node& n) {
         r.section(n, "compare", {
             {"pruners", [&](const YAML::Node& v) {
                r.list(v, "pruners", [&](const YAML::Node& item) {
                  const std::string name = r.text(item, "pruners");
                  const auto& known = known_variants();
                  if (std::find(known.begin(), known.end(), name) == known.end()) {
                    r.fail(item, fmt::format("unknown pruner '{}' (expected asap, darts_mode, magnitude, accum_grad, random)", name));
                  }
                  cfg.compare.push_back(name);
                });
              }},
         });
       }},
  };

  r.section(root, "<top level>", top);
  for (const auto& kv : root) cfg.sections.insert(kv.first.as<std::string>());

  if (!child_width_set) cfg.child.width = s.width;
  if (!child_lr_set) cfg.child.lr = s.weight_lr;
  if (!child_batch_set) cfg.child.batch_size = s.batch_size;
  if (cfg.child.lr_min > cfg.child.lr) cfg.child.lr_min = cfg.child.lr;
  try {
    s.validate();
    (void)make_dataset(DatasetSpec{d.kind, d.n, d.dims, d.classes, d.noise, 0});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  if (d.n % 2 != 0) throw ConfigError(fmt::format("{}: dataset n must be even for the train/validation split", source));
  if (cfg.sections.count("compare") && cfg.compare.size() < 2) {
    throw ConfigError(fmt::format("{}: compare needs at least two pruners", source));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("{}: cannot open config", path));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || end != item.data() + item.size()) {
      throw ConfigError(fmt::format("--seeds: '{}' is not a non-negative integer", item));
    }
    if (std::find(out.begin(), out.end(), v) != out.end()) throw ConfigError(fmt::format("--seeds: duplicate seed {}", v));
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> names{"asap", "darts_mode", "magnitude", "accum_grad", "random"};
  return names;
}

SearchConfig apply_variant(const SearchConfig& base, const std::string& variant) {
  SearchConfig c = base;
  if (variant == "asap") {
    c.pruner = PrunerKind::kAsap;
  } else if (variant == "darts_mode") {
    c.pruner = PrunerKind::kDartsHard;
    c.schedule.kind = SchedulePolicy::Kind::kConstant;
    c.schedule.t0 = 1.0;
    c.threshold.kind = ThresholdPolicy::Kind::kNone;
    c.grace = GraceMode::kEpochs;
    c.grace_epochs = 0;
  } else if (variant == "magnitude" || variant == "accum_grad") {
    c.pruner = variant == "magnitude" ? PrunerKind::kMagnitude : PrunerKind::kAccumGrad;
    c.threshold.kind = ThresholdPolicy::Kind::kNone;
  } else if (variant != "random") {
    throw ConfigError(fmt::format("unknown compare variant '{}'", variant));
  }
  return c;
}

}  // namespace asap::cli
