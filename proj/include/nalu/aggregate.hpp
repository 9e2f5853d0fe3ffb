#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nalu/store.hpp"
#include "nalu/summary.hpp"

namespace nalu {

inline const std::vector<std::string>& aggregate_keys() {
  static const std::vector<std::string> keys = {
      "model", "op", "range", "interp", "extrap", "input_size", "subset_ratio",
      "overlap_ratio", "hidden_size"};
  return keys;
}

struct GroupValue {
  nlohmann::json order;  // compared when sorting rows
  std::string text;
  nlohmann::json value;  // emitted in structured output
};

struct AggregateRow {
  std::vector<GroupValue> keys;
  SummaryRow summary;
};

struct AggregateTable {
  std::vector<std::string> group_by;
  std::vector<AggregateRow> rows;
  std::vector<std::string> warnings;
  double confidence = kDefaultConfidence;
};

namespace detail {

inline std::string number_text(double v) { return nlohmann::json(v).dump(); }

inline GroupValue group_value(const std::string& key, const TrialRecord& r) {
  if (key == "model") {
    return {static_cast<int>(r.model), std::string(to_string(r.model)), std::string(to_string(r.model))};
  }
  if (key == "op") {
    return {static_cast<int>(r.spec.op), std::string(to_string(r.spec.op)),
            std::string(to_string(r.spec.op))};
  }
  if (key == "interp" || key == "extrap") {
    const RangeSpec& range = key == "interp" ? r.spec.interp : r.spec.extrap;
    return {nlohmann::json::array({range.lower(), range.upper(), range.to_string()}),
            range.to_string(), range.to_string()};
  }
  if (key == "range") {
    const std::string text = r.spec.interp.to_string() + " -> " + r.spec.extrap.to_string();
    return {nlohmann::json::array({r.spec.interp.lower(), r.spec.interp.upper(), text}), text, text};
  }
  if (key == "input_size") {
    return {r.spec.input_size, std::to_string(r.spec.input_size), r.spec.input_size};
  }
  if (key == "subset_ratio") return {r.spec.subset_ratio, number_text(r.spec.subset_ratio), r.spec.subset_ratio};
  if (key == "overlap_ratio") {
    return {r.spec.overlap_ratio, number_text(r.spec.overlap_ratio), r.spec.overlap_ratio};
  }
  if (key == "hidden_size") return {r.hidden_size, std::to_string(r.hidden_size), r.hidden_size};
  throw ConfigError("unknown group-by key '" + key + "'");
}

}  // namespace detail

/// Groups records by the given keys and summarizes each group. Rows are
/// sorted by key (models and ops in declaration order, numbers numerically)
/// so the output does not depend on record order.
inline AggregateTable aggregate(const std::vector<StoredRecord>& records,
                                const std::vector<std::string>& group_by,
                                double confidence = kDefaultConfidence) {
  if (records.empty()) throw ConfigError("aggregate: store has no records");
  for (const auto& k : group_by) {
    if (std::find(aggregate_keys().begin(), aggregate_keys().end(), k) == aggregate_keys().end()) {
      throw ConfigError("unknown group-by key '" + k + "'");
    }
  }
  struct Group {
    std::vector<GroupValue> keys;
    std::vector<std::pair<std::string, TrialRecord>> members;
  };
  std::map<nlohmann::json, Group> groups;
  std::set<std::string> hashes;
  for (const auto& s : records) {
    hashes.insert(s.config_hash);
    std::vector<GroupValue> keys;
    nlohmann::json order = nlohmann::json::array();
    for (const auto& k : group_by) {
      keys.push_back(detail::group_value(k, s.record));
      order.push_back(keys.back().order);
    }
    auto& g = groups[order];
    if (g.members.empty()) g.keys = std::move(keys);
    g.members.emplace_back(s.trial_id, s.record);
  }

  AggregateTable table;
  table.group_by = group_by;
  table.confidence = confidence;
  if (hashes.size() > 1) {
    table.warnings.push_back("records span " + std::to_string(hashes.size()) +
                             " training protocols");
  }
  for (auto& [order, g] : groups) {
    std::sort(g.members.begin(), g.members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<TrialRecord> trials;
    trials.reserve(g.members.size());
    for (auto& m : g.members) trials.push_back(std::move(m.second));
    table.rows.push_back({std::move(g.keys), summarize(trials, confidence)});
  }
  return table;
}

inline std::string format_table(const AggregateTable& t) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = t.group_by;
  for (const char* h : {"Success Rate", "Solved at", "Sparsity error", "N"}) header.emplace_back(h);
  cells.push_back(header);
  for (const auto& row : t.rows) {
    std::vector<std::string> line;
    for (const auto& k : row.keys) line.push_back(k.text);
    line.push_back(format_rate(row.summary.success_rate));
    line.push_back(format_mean(row.summary.solved_at));
    line.push_back(format_mean(row.summary.sparsity));
    line.push_back(std::to_string(row.summary.trials));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) os << "  ";
      os << cells[r][i];
      if (i + 1 < cells[r].size()) os << std::string(width[i] - cells[r][i].size(), ' ');
    }
    os << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    }
  }
  return os.str();
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void mean_cells(std::vector<std::string>& line, const std::optional<MeanSummary>& m) {
  if (!m) {
    line.insert(line.end(), {"", "", "", ""});
    return;
  }
  line.push_back(std::to_string(m->n));
  line.push_back(number_text(m->mean));
  line.push_back(m->ci_low ? number_text(*m->ci_low) : "");
  line.push_back(m->ci_high ? number_text(*m->ci_high) : "");
}

inline nlohmann::json mean_json(const std::optional<MeanSummary>& m) {
  if (!m) return nullptr;
  return {{"n", m->n},
          {"mean", m->mean},
          {"lower", m->ci_low ? nlohmann::json(*m->ci_low) : nlohmann::json(nullptr)},
          {"upper", m->ci_high ? nlohmann::json(*m->ci_high) : nlohmann::json(nullptr)}};
}

}  // namespace detail

inline std::string format_csv(const AggregateTable& t) {
  std::ostringstream os;
  std::vector<std::string> header = t.group_by;
  for (const char* h : {"trials", "successes", "failures", "errored", "diverged", "success_rate",
                        "success_lower", "success_upper", "solved_n", "solved_at_mean",
                        "solved_at_lower", "solved_at_upper", "sparsity_n", "sparsity_mean",
                        "sparsity_lower", "sparsity_upper"}) {
    header.emplace_back(h);
  }
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& row : t.rows) {
    const SummaryRow& s = row.summary;
    std::vector<std::string> line;
    for (const auto& k : row.keys) line.push_back(detail::csv_field(k.text));
    line.push_back(std::to_string(s.trials));
    line.push_back(std::to_string(s.successes));
    line.push_back(std::to_string(s.failures));
    line.push_back(std::to_string(s.errored));
    line.push_back(std::to_string(s.diverged));
    line.push_back(detail::number_text(s.success_rate.rate));
    line.push_back(detail::number_text(s.success_rate.ci_low));
    line.push_back(detail::number_text(s.success_rate.ci_high));
    detail::mean_cells(line, s.solved_at);
    detail::mean_cells(line, s.sparsity);
    for (std::size_t i = 0; i < line.size(); ++i) os << (i ? "," : "") << line[i];
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const AggregateTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    const SummaryRow& s = row.summary;
    nlohmann::json keys = nlohmann::json::object();
    for (std::size_t i = 0; i < row.keys.size(); ++i) keys[t.group_by[i]] = row.keys[i].value;
    rows.push_back({{"group", keys},
                    {"trials", s.trials},
                    {"successes", s.successes},
                    {"failures", s.failures},
                    {"errored", s.errored},
                    {"diverged", s.diverged},
                    {"success_rate",
                     {{"rate", s.success_rate.rate},
                      {"lower", s.success_rate.ci_low},
                      {"upper", s.success_rate.ci_high}}},
                    {"solved_at", detail::mean_json(s.solved_at)},
                    {"sparsity_error", detail::mean_json(s.sparsity)}});
  }
  return {{"group_by", t.group_by},
          {"confidence", t.confidence},
          {"rows", rows},
          {"warnings", t.warnings}};
}

/// Long-format series for plotting: the last group-by key is the x axis,
/// the remaining keys name the series.
inline std::string format_plot(const AggregateTable& t) {
  if (t.group_by.empty()) throw ConfigError("plot output needs at least one group-by key");
  std::ostringstream os;
  os << "series,x,metric,value,lower,upper\n";
  for (const auto& row : t.rows) {
    std::string series;
    for (std::size_t i = 0; i + 1 < row.keys.size(); ++i) {
      if (i) series += ";";
      series += t.group_by[i] + "=" + row.keys[i].text;
    }
    const std::string prefix =
        detail::csv_field(series) + "," + detail::csv_field(row.keys.back().text) + ",";
    const auto& s = row.summary;
    os << prefix << "success_rate," << detail::number_text(s.success_rate.rate) << ","
       << detail::number_text(s.success_rate.ci_low) << ","
       << detail::number_text(s.success_rate.ci_high) << "\n";
    for (const auto& [name, m] : {std::pair{"solved_at", &s.solved_at},
                                  std::pair{"sparsity_error", &s.sparsity}}) {
      if (!*m) continue;
      const auto& v = **m;
      os << prefix << name << "," << detail::number_text(v.mean) << ","
         << (v.ci_low ? detail::number_text(*v.ci_low) : "") << ","
         << (v.ci_high ? detail::number_text(*v.ci_high) : "") << "\n";
    }
  }
  return os.str();
}

inline std::string format_aggregate(const AggregateTable& t, const std::string& format) {
  if (format == "table") return format_table(t);
  if (format == "csv") return format_csv(t);
  if (format == "json") return to_json(t).dump(2) + "\n";
  if (format == "plot") return format_plot(t);
  throw ConfigError("unknown output format '" + format + "' (table, csv, json, plot)");
}

}  // namespace nalu
