#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nalu/dataset.hpp"
#include "nalu/metrics.hpp"
#include "nalu/model.hpp"
#include "nalu/random.hpp"
#include "nalu/trainer.hpp"

namespace nalu {

struct RangePair {
  RangeSpec interp;
  RangeSpec extrap;
};

struct ThresholdConfig {
  double epsilon = kThresholdEpsilon;
  std::size_t n_sim = kThresholdSamples;
  std::uint64_t seed = 0;
};

/// One cross-product block of a sweep.
struct SweepGrid {
  std::string name;
  std::vector<ModelKind> models;
  std::vector<Operation> ops;
  std::vector<RangePair> ranges;
  std::vector<std::size_t> input_sizes;
  std::vector<double> subset_ratios;
  std::vector<double> overlap_ratios;
  std::vector<std::size_t> hidden_sizes;
  std::vector<std::uint64_t> seeds;  // seed indices
};

struct SweepConfig {
  std::string name = "sweep";
  TrainConfig train;  // seed and hidden_size are filled per trial
  ThresholdConfig threshold;
  bool keep_traces = false;
  std::string output_dir;  // optional default for the CLI
  std::vector<SweepGrid> grids;
  nlohmann::json source;  // parsed document, kept for hashing and snapshots

  /// Hash of everything that changes a trial's outcome apart from its own
  /// descriptor (training protocol and threshold settings). Adding models,
  /// ops or seeds leaves it unchanged.
  std::string protocol_hash() const;
};

struct TrialDescriptor {
  std::string trial_id;
  ModelKind model = ModelKind::Linear;
  DatasetSpec spec;
  std::size_t hidden_size = kDefaultHiddenSize;
  std::uint64_t seed_index = 0;
  std::uint64_t seed = 0;
};

struct RejectedTrial {
  std::string trial_id;
  std::string reason;
};

struct SweepPlan {
  std::vector<TrialDescriptor> trials;
  std::vector<RejectedTrial> rejected;
  std::size_t duplicates = 0;  // identical trials listed by more than one grid
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline RangeSpec parse_range(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("range must be [lo, hi] or [[lo, hi], ...]");
  if (j[0].is_number()) {
    if (j.size() != 2) throw ConfigError("range must have two bounds");
    return RangeSpec(j[0].get<double>(), j[1].get<double>());
  }
  std::vector<Interval> parts;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ConfigError("range part must be [lo, hi]");
    parts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return RangeSpec(std::move(parts));
}

inline nlohmann::json range_json(const RangeSpec& r) {
  auto j = nlohmann::json::array();
  for (const auto& p : r.parts) j.push_back({p.lower, p.upper});
  return j;
}

template <typename T>
std::vector<T> number_list(const nlohmann::json& j, const char* key) {
  if (j.is_number()) return {j.get<T>()};
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(key) + ": expected a number or a list");
  return j.get<std::vector<T>>();
}

inline TrainConfig parse_train(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("train: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "iterations") base.iterations = value.get<std::uint64_t>();
    else if (key == "batch_size") base.batch_size = value.get<std::size_t>();
    else if (key == "eval_every") base.eval_every = value.get<std::uint64_t>();
    else if (key == "eval_size") base.eval_size = value.get<std::size_t>();
    else if (key == "layer_eps") base.layer_eps = value.get<double>();
    else if (key == "lr") base.adam.lr = value.get<double>();
    else if (key == "beta1") base.adam.beta1 = value.get<double>();
    else if (key == "beta2") base.adam.beta2 = value.get<double>();
    else if (key == "adam_eps") base.adam.eps = value.get<double>();
    else throw ConfigError("train: unknown key '" + key + "'");
  }
  base.validate();
  return base;
}

inline SweepGrid parse_grid(const nlohmann::json& j, const nlohmann::json& defaults,
                            std::size_t index) {
  auto field = [&](const char* key) -> const nlohmann::json* {
    if (j.contains(key)) return &j.at(key);
    if (defaults.contains(key)) return &defaults.at(key);
    return nullptr;
  };
  static const std::set<std::string> known = {
      "name", "models", "ops", "ranges", "input_size", "subset_ratio", "overlap_ratio",
      "hidden_size", "seeds"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("grid: unknown key '" + key + "'");
  }

  SweepGrid g;
  g.name = j.value("name", "grid" + std::to_string(index));
  if (const auto* m = field("models")) {
    for (const auto& s : *m) {
      const auto kind = parse_model_kind(s.get<std::string>());
      if (!kind) throw ConfigError("unknown model '" + s.get<std::string>() + "'");
      g.models.push_back(*kind);
    }
  }
  if (const auto* o = field("ops")) {
    for (const auto& s : *o) {
      const auto op = parse_operation(s.get<std::string>());
      if (!op) throw ConfigError("unknown op '" + s.get<std::string>() + "'");
      g.ops.push_back(*op);
    }
  }
  if (const auto* r = field("ranges")) {
    for (const auto& pair : *r) {
      if (!pair.contains("interp") || !pair.contains("extrap")) {
        throw ConfigError("range pair needs 'interp' and 'extrap'");
      }
      g.ranges.push_back({parse_range(pair.at("interp")), parse_range(pair.at("extrap"))});
    }
  } else {
    g.ranges.push_back({RangeSpec(1.0, 2.0), RangeSpec(2.0, 6.0)});
  }
  const auto* d = field("input_size");
  g.input_sizes = d ? number_list<std::size_t>(*d, "input_size") : std::vector<std::size_t>{100};
  const auto* s = field("subset_ratio");
  g.subset_ratios = s ? number_list<double>(*s, "subset_ratio") : std::vector<double>{0.25};
  const auto* o = field("overlap_ratio");
  g.overlap_ratios = o ? number_list<double>(*o, "overlap_ratio") : std::vector<double>{0.5};
  const auto* h = field("hidden_size");
  g.hidden_sizes = h ? number_list<std::size_t>(*h, "hidden_size")
                     : std::vector<std::size_t>{kDefaultHiddenSize};
  if (const auto* seeds = field("seeds")) {
    if (seeds->is_number()) {
      const auto n = seeds->get<std::uint64_t>();
      for (std::uint64_t i = 0; i < n; ++i) g.seeds.push_back(i);
    } else {
      g.seeds = seeds->get<std::vector<std::uint64_t>>();
    }
  }
  const std::set<std::uint64_t> distinct(g.seeds.begin(), g.seeds.end());
  if (distinct.size() != g.seeds.size()) throw ConfigError("grid '" + g.name + "': seeds must be distinct");
  if (g.models.empty() || g.ops.empty() || g.seeds.empty()) {
    throw ConfigError("grid '" + g.name + "': models, ops and seeds must be non-empty");
  }
  return g;
}

}  // namespace detail

inline std::string SweepConfig::protocol_hash() const {
  nlohmann::json protocol = {
      {"iterations", train.iterations}, {"batch_size", train.batch_size},
      {"eval_every", train.eval_every}, {"eval_size", train.eval_size},
      {"layer_eps", train.layer_eps},   {"lr", train.adam.lr},
      {"beta1", train.adam.beta1},      {"beta2", train.adam.beta2},
      {"adam_eps", train.adam.eps},     {"threshold_epsilon", threshold.epsilon},
      {"threshold_n_sim", threshold.n_sim}, {"threshold_seed", threshold.seed}};
  return detail::hex64(fnv1a64(protocol.dump()));
}

/// Parses a sweep document. Grid fields given at top level act as defaults
/// for every entry of "grids"; without "grids" the top level is the grid.
inline SweepConfig parse_sweep_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("sweep config must be a JSON object");
  static const std::set<std::string> known = {
      "name", "train", "threshold", "keep_traces", "output", "grids", "models", "ops", "ranges",
      "input_size", "subset_ratio", "overlap_ratio", "hidden_size", "seeds"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("sweep config: unknown key '" + key + "'");
  }
  SweepConfig cfg;
  cfg.source = doc;
  cfg.name = doc.value("name", std::string("sweep"));
  if (doc.contains("train")) cfg.train = detail::parse_train(doc.at("train"), cfg.train);
  if (doc.contains("threshold")) {
    const auto& t = doc.at("threshold");
    cfg.threshold.epsilon = t.value("epsilon", cfg.threshold.epsilon);
    cfg.threshold.n_sim = t.value("n_sim", cfg.threshold.n_sim);
    cfg.threshold.seed = t.value("seed", cfg.threshold.seed);
  }
  cfg.keep_traces = doc.value("keep_traces", false);
  cfg.output_dir = doc.value("output", std::string());

  nlohmann::json defaults = doc;
  defaults.erase("grids");
  for (const char* key : {"name", "train", "threshold", "keep_traces", "output"}) defaults.erase(key);
  if (doc.contains("grids")) {
    std::size_t i = 0;
    for (const auto& g : doc.at("grids")) cfg.grids.push_back(detail::parse_grid(g, defaults, i++));
  } else {
    nlohmann::json single = nlohmann::json::object();
    for (const char* key : {"models", "ops", "ranges", "input_size", "subset_ratio",
                            "overlap_ratio", "hidden_size", "seeds"}) {
      if (doc.contains(key)) single[key] = doc.at(key);
    }
    single["name"] = cfg.name;
    cfg.grids.push_back(detail::parse_grid(single, nlohmann::json::object(), 0));
  }
  if (cfg.grids.empty()) throw ConfigError("sweep config has no grids");
  return cfg;
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_sweep_config(doc);
}

/// Canonical identity of a trial; independent of which grid lists it.
inline std::string trial_id(ModelKind model, const DatasetSpec& spec, std::size_t hidden,
                            std::uint64_t seed_index) {
  std::ostringstream os;
  os << "model=" << to_string(model) << ";" << spec.key() << ";h=" << hidden
     << ";seed=" << seed_index;
  return os.str();
}

/// Trial seed: a pure function of the protocol hash and the trial identity.
inline std::uint64_t trial_seed(const std::string& protocol_hash, const std::string& id) {
  return derive_seed(fnv1a64(protocol_hash), fnv1a64(id));
}

/// Deterministic cross-product expansion (grid order, then model, op,
/// range, d, s, o, hidden, seed). Invalid dataset geometry is rejected
/// with a reason; a trial listed by several grids appears once.
inline SweepPlan expand_sweep(const SweepConfig& cfg) {
  SweepPlan plan;
  std::set<std::string> seen;
  const std::string protocol = cfg.protocol_hash();
  for (const auto& g : cfg.grids) {
    for (ModelKind model : g.models)
      for (Operation op : g.ops)
        for (const auto& range : g.ranges)
          for (std::size_t d : g.input_sizes)
            for (double s : g.subset_ratios)
              for (double o : g.overlap_ratios)
                for (std::size_t h : g.hidden_sizes)
                  for (std::uint64_t seed_index : g.seeds) {
                    TrialDescriptor t;
                    t.model = model;
                    t.spec.op = op;
                    t.spec.interp = range.interp;
                    t.spec.extrap = range.extrap;
                    t.spec.input_size = d;
                    t.spec.subset_ratio = s;
                    t.spec.overlap_ratio = o;
                    t.hidden_size = h;
                    t.seed_index = seed_index;
                    t.trial_id = trial_id(model, t.spec, h, seed_index);
                    try {
                      t.spec.validate();
                      if (h == 0) throw ConfigError("hidden_size must be >= 1");
                    } catch (const ConfigError& e) {
                      if (seen.insert(t.trial_id).second) {
                        plan.rejected.push_back({t.trial_id, e.what()});
                      }
                      continue;
                    }
                    if (!seen.insert(t.trial_id).second) {
                      ++plan.duplicates;
                      continue;
                    }
                    t.seed = trial_seed(protocol, t.trial_id);
                    plan.trials.push_back(std::move(t));
                  }
  }
  return plan;
}

}  // namespace nalu
