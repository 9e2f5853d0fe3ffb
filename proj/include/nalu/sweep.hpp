#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "nalu/store.hpp"
#include "nalu/sweep_config.hpp"
#include "nalu/trainer.hpp"

namespace nalu {

struct SweepOptions {
  unsigned workers = 1;
  bool resume = false;
  std::optional<std::size_t> limit;  // stop after this many new trials
  std::function<void(const StoredRecord&, std::size_t done, std::size_t total)> on_trial;
};

struct SweepReport {
  std::size_t planned = 0;
  std::size_t rejected = 0;
  std::size_t skipped = 0;  // already in the store
  std::size_t executed = 0;
  std::size_t errored = 0;
  std::size_t thresholds_computed = 0;
};

/// File layout of a sweep output directory.
struct SweepPaths {
  std::filesystem::path dir;
  std::filesystem::path results() const { return dir / "results.jsonl"; }
  std::filesystem::path thresholds() const { return dir / "thresholds.jsonl"; }
  std::filesystem::path config() const { return dir / "config.json"; }
  std::filesystem::path rejected() const { return dir / "rejected.jsonl"; }
};

/// Computes and caches the success threshold of every dataset in the plan.
inline std::map<std::string, SuccessThreshold> prepare_thresholds(
    const SweepConfig& cfg, const SweepPlan& plan, ThresholdCache& cache, unsigned workers,
    std::size_t* computed = nullptr) {
  std::map<std::string, SuccessThreshold> out;
  if (computed) *computed = 0;
  for (const auto& t : plan.trials) {
    const std::string key = t.spec.key();
    if (out.contains(key)) continue;
    bool fresh = false;
    out.emplace(key, cache.get(t.spec, cfg.threshold, workers, &fresh));
    if (fresh && computed) ++*computed;
  }
  return out;
}

inline StoredRecord execute_trial(const SweepConfig& cfg, const TrialDescriptor& t,
                                  const SuccessThreshold& threshold,
                                  const std::string& config_hash) {
  StoredRecord s;
  s.config_hash = config_hash;
  s.trial_id = t.trial_id;
  s.seed_index = t.seed_index;
  s.threshold = threshold.value;
  try {
    TrainConfig train = cfg.train;
    train.hidden_size = t.hidden_size;
    train.seed = t.seed;
    s.record = run_trial(t.model, t.spec, train, threshold);
  } catch (const std::exception& e) {
    s.record = TrialRecord{};
    s.record.error = e.what();
  } catch (...) {
    s.record = TrialRecord{};
    s.record.error = "unknown exception";
  }
  s.record.model = t.model;
  s.record.spec = t.spec;
  s.record.hidden_size = t.hidden_size;
  s.record.seed = t.seed;
  return s;
}

/// Runs every pending trial of the sweep, at most `workers` at a time, and
/// appends each record to <dir>/results.jsonl as soon as it finishes.
/// Trials already in the store under the same protocol hash are skipped.
inline SweepReport run_sweep(const SweepConfig& cfg, const std::filesystem::path& dir,
                             const SweepOptions& options = {}) {
  if (options.workers == 0) throw ConfigError("run_sweep: workers must be >= 1");
  const SweepPaths paths{dir};
  ResultStore store(paths.results());
  const std::string config_hash = cfg.protocol_hash();

  std::set<std::string> done;
  if (store.exists()) {
    if (!options.resume) {
      throw ConfigError("store '" + paths.results().string() +
                        "' already has results; pass --resume to continue it");
    }
    store.repair();
    for (const auto& r : store.load()) {
      if (r.config_hash != config_hash) {
        throw ConfigError("store was written under a different training protocol (hash " +
                          r.config_hash + ", config has " + config_hash + ")");
      }
      done.insert(r.trial_id);
    }
  }

  std::filesystem::create_directories(dir);
  {
    std::ofstream snapshot(paths.config(), std::ios::binary | std::ios::trunc);
    snapshot << cfg.source.dump(2) << "\n";
  }

  const SweepPlan plan = expand_sweep(cfg);
  {
    std::ofstream rejected(paths.rejected(), std::ios::binary | std::ios::trunc);
    for (const auto& r : plan.rejected) {
      rejected << nlohmann::json{{"trial_id", r.trial_id}, {"reason", r.reason}}.dump() << "\n";
    }
  }

  SweepReport report;
  report.planned = plan.trials.size();
  report.rejected = plan.rejected.size();

  std::vector<const TrialDescriptor*> pending;
  for (const auto& t : plan.trials) {
    if (done.contains(t.trial_id)) {
      ++report.skipped;
    } else {
      pending.push_back(&t);
    }
  }
  if (options.limit && pending.size() > *options.limit) pending.resize(*options.limit);
  if (pending.empty()) return report;

  ThresholdCache cache(paths.thresholds());
  SweepPlan needed;
  for (const auto* t : pending) needed.trials.push_back(*t);
  const auto thresholds =
      prepare_thresholds(cfg, needed, cache, options.workers, &report.thresholds_computed);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::atomic<std::size_t> errored{0};
  std::mutex callback_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const TrialDescriptor& t = *pending[i];
      const StoredRecord s = execute_trial(cfg, t, thresholds.at(t.spec.key()), config_hash);
      store.append(s, cfg.keep_traces);
      if (!s.record.error.empty()) ++errored;
      const std::size_t n = ++finished;
      if (options.on_trial) {
        std::lock_guard lock(callback_mutex);
        options.on_trial(s, n, pending.size());
      }
    }
  };
  const unsigned n_workers =
      static_cast<unsigned>(std::min<std::size_t>(options.workers, pending.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  report.executed = finished;
  report.errored = errored;
  return report;
}

}  // namespace nalu
