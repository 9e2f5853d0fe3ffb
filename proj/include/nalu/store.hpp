#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nalu/metrics.hpp"
#include "nalu/sweep_config.hpp"
#include "nalu/trainer.hpp"

namespace nalu {

inline constexpr int kStoreSchemaVersion = 1;

struct StoredRecord {
  std::string config_hash;
  std::string trial_id;
  std::uint64_t seed_index = 0;
  double threshold = 0.0;
  TrialRecord record;
};

namespace detail {

// JSON has no infinity; non-finite values are written as null and read back as +inf.
inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_inf(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const StoredRecord& s, bool with_trace) {
  const TrialRecord& r = s.record;
  nlohmann::json j = {
      {"schema", kStoreSchemaVersion},
      {"config_hash", s.config_hash},
      {"trial_id", s.trial_id},
      {"model", to_string(r.model)},
      {"op", to_string(r.spec.op)},
      {"interp", detail::range_json(r.spec.interp)},
      {"extrap", detail::range_json(r.spec.extrap)},
      {"input_size", r.spec.input_size},
      {"subset_ratio", r.spec.subset_ratio},
      {"overlap_ratio", r.spec.overlap_ratio},
      {"hidden_size", r.hidden_size},
      {"seed_index", s.seed_index},
      {"seed", r.seed},
      {"offset", r.offset},
      {"threshold", s.threshold},
      {"success", r.success},
      {"solved_at", detail::optional_json(r.solved_at)},
      {"sparsity_error", detail::optional_json(r.sparsity_error)},
      {"gate_sparsity", detail::optional_json(r.gate_sparsity)},
      {"final_interp_mse", detail::finite_or_null(r.final_interp_mse)},
      {"final_extrap_mse", detail::finite_or_null(r.final_extrap_mse)},
      {"iterations_run", r.iterations_run},
      {"diverged", r.diverged},
      {"error", r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error)}};
  if (with_trace) {
    auto trace = nlohmann::json::array();
    for (const auto& c : r.trace) {
      trace.push_back({c.iteration, detail::finite_or_null(c.interp_mse),
                       detail::finite_or_null(c.extrap_mse), c.sparsity_error,
                       detail::optional_json(c.gate_sparsity)});
    }
    j["trace"] = std::move(trace);
  }
  return j;
}

inline StoredRecord stored_record_from_json(const nlohmann::json& j) {
  const int schema = j.at("schema").get<int>();
  if (schema != kStoreSchemaVersion) {
    throw ConfigError("unsupported record schema " + std::to_string(schema));
  }
  StoredRecord s;
  s.config_hash = j.at("config_hash").get<std::string>();
  s.trial_id = j.at("trial_id").get<std::string>();
  s.seed_index = j.at("seed_index").get<std::uint64_t>();
  s.threshold = j.at("threshold").get<double>();
  TrialRecord& r = s.record;
  const auto model = parse_model_kind(j.at("model").get<std::string>());
  const auto op = parse_operation(j.at("op").get<std::string>());
  if (!model || !op) throw ConfigError("record has unknown model or op");
  r.model = *model;
  r.spec.op = *op;
  r.spec.interp = detail::parse_range(j.at("interp"));
  r.spec.extrap = detail::parse_range(j.at("extrap"));
  r.spec.input_size = j.at("input_size").get<std::size_t>();
  r.spec.subset_ratio = j.at("subset_ratio").get<double>();
  r.spec.overlap_ratio = j.at("overlap_ratio").get<double>();
  r.hidden_size = j.at("hidden_size").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.offset = j.at("offset").get<double>();
  r.success = j.at("success").get<bool>();
  r.solved_at = detail::optional_from<std::uint64_t>(j, "solved_at");
  r.sparsity_error = detail::optional_from<double>(j, "sparsity_error");
  r.gate_sparsity = detail::optional_from<double>(j, "gate_sparsity");
  r.final_interp_mse = detail::number_or_inf(j.at("final_interp_mse"));
  r.final_extrap_mse = detail::number_or_inf(j.at("final_extrap_mse"));
  r.iterations_run = j.at("iterations_run").get<std::uint64_t>();
  r.diverged = j.at("diverged").get<bool>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  if (j.contains("trace")) {
    for (const auto& c : j.at("trace")) {
      Checkpoint cp;
      cp.iteration = c.at(0).get<std::uint64_t>();
      cp.interp_mse = detail::number_or_inf(c.at(1));
      cp.extrap_mse = detail::number_or_inf(c.at(2));
      cp.sparsity_error = c.at(3).get<double>();
      if (!c.at(4).is_null()) cp.gate_sparsity = c.at(4).get<double>();
      r.trace.push_back(cp);
    }
  }
  return s;
}

/// Reads a JSON-lines file. A final line without its newline is the
/// remnant of an interrupted write and is dropped; `valid_bytes` receives
/// the length of the intact prefix. A malformed complete line is an error.
inline std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path,
                                                   std::uintmax_t* valid_bytes = nullptr) {
  std::vector<nlohmann::json> out;
  if (valid_bytes) *valid_bytes = 0;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) break;
    ++line_no;
    const std::string_view line(content.data() + pos, nl - pos);
    if (!line.empty()) {
      try {
        out.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    pos = nl + 1;
  }
  if (valid_bytes) *valid_bytes = pos;
  return out;
}

/// Append-only JSON-lines log of trial records. Appends are serialized
/// and flushed one record at a time.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const { return path_; }

  bool exists() const {
    std::error_code ec;
    return std::filesystem::exists(path_, ec) && std::filesystem::file_size(path_, ec) > 0;
  }

  std::vector<StoredRecord> load() const {
    std::vector<StoredRecord> out;
    for (const auto& j : read_json_lines(path_)) out.push_back(stored_record_from_json(j));
    return out;
  }

  /// Cuts off a partially written final line so appends start on a fresh line.
  void repair() const {
    if (!std::filesystem::exists(path_)) return;
    std::uintmax_t valid = 0;
    read_json_lines(path_, &valid);
    if (valid != std::filesystem::file_size(path_)) std::filesystem::resize_file(path_, valid);
  }

  void append(const StoredRecord& record, bool with_trace) {
    const std::string line = to_json(record, with_trace).dump() + "\n";
    std::lock_guard lock(mutex_);
    if (!out_.is_open()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      out_.open(path_, std::ios::binary | std::ios::app);
      if (!out_) throw ConfigError("cannot open store '" + path_.string() + "'");
    }
    out_ << line;
    out_.flush();
  }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
};

/// thresholds.jsonl: one simulated threshold per (dataset, epsilon, n_sim, seed).
class ThresholdCache {
 public:
  explicit ThresholdCache(std::filesystem::path path) : path_(std::move(path)) {
    for (const auto& j : read_json_lines(path_)) {
      SuccessThreshold t;
      t.spec_key = j.at("spec_key").get<std::string>();
      t.epsilon = j.at("epsilon").get<double>();
      t.n_sim = j.at("n_sim").get<std::size_t>();
      t.sim_seed = j.at("seed").get<std::uint64_t>();
      t.value = j.at("value").get<double>();
      entries_.emplace(key(t.spec_key, t.epsilon, t.n_sim, t.sim_seed), t);
    }
  }

  std::optional<SuccessThreshold> find(const DatasetSpec& spec, const ThresholdConfig& c) const {
    const auto it = entries_.find(key(spec.key(), c.epsilon, c.n_sim, c.seed));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  /// Cached value, or simulates, appends and returns it.
  SuccessThreshold get(const DatasetSpec& spec, const ThresholdConfig& c, unsigned workers,
                       bool* computed = nullptr) {
    if (computed) *computed = false;
    if (auto hit = find(spec, c)) return *hit;
    const SuccessThreshold t = simulate_threshold(spec, c.epsilon, c.n_sim, c.seed, workers);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    const nlohmann::json j = {{"spec_key", t.spec_key}, {"epsilon", t.epsilon},
                              {"n_sim", t.n_sim},       {"seed", t.sim_seed},
                              {"value", t.value}};
    out << j.dump() << "\n";
    out.flush();
    entries_.emplace(key(t.spec_key, t.epsilon, t.n_sim, t.sim_seed), t);
    if (computed) *computed = true;
    return t;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  static std::string key(const std::string& spec_key, double eps, std::size_t n,
                         std::uint64_t seed) {
    return spec_key + "|" + nlohmann::json(eps).dump() + "|" + std::to_string(n) + "|" +
           std::to_string(seed);
  }

  std::filesystem::path path_;
  std::map<std::string, SuccessThreshold> entries_;
};

}  // namespace nalu
