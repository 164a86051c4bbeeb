#pragma once
/**
 * Training metrics: one record per optimizer iteration, persisted as JSON
 * lines (the machine-readable log) with a CSV mirror for spreadsheet use.
 * Two runs with the same seed and config produce identical logs except for
 * wall_clock_seconds, and the comparison helper excludes exactly that field.
 */

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeflow/errors.hpp"

namespace treeflow::metrics {

struct MetricRecord {
  long iteration = 0;
  std::vector<double> mean_reward;  // one entry per reward column
  double objective = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double mean_abs_ratio_minus_one = 0.0;
  double leaf_diversity = 0.0;
  long velocity_evals = 0;  // cumulative over the run
  double wall_clock_seconds = 0.0;
};

inline nlohmann::json to_json(const MetricRecord& r) {
  return nlohmann::json{{"iteration", r.iteration},
                        {"mean_reward", r.mean_reward},
                        {"objective", r.objective},
                        {"grad_norm", r.grad_norm},
                        {"clip_fraction", r.clip_fraction},
                        {"mean_abs_ratio_minus_one", r.mean_abs_ratio_minus_one},
                        {"leaf_diversity", r.leaf_diversity},
                        {"velocity_evals", r.velocity_evals},
                        {"wall_clock_seconds", r.wall_clock_seconds}};
}

inline MetricRecord from_json(const nlohmann::json& j) {
  MetricRecord r;
  r.iteration = j.at("iteration").get<long>();
  r.mean_reward = j.at("mean_reward").get<std::vector<double>>();
  r.objective = j.at("objective").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.clip_fraction = j.at("clip_fraction").get<double>();
  r.mean_abs_ratio_minus_one = j.at("mean_abs_ratio_minus_one").get<double>();
  r.leaf_diversity = j.at("leaf_diversity").get<double>();
  r.velocity_evals = j.at("velocity_evals").get<long>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return r;
}

inline void write_jsonl(const std::string& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file: " + path);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("failed writing metrics file: " + path);
}

inline std::vector<MetricRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file: " + path);
  std::vector<MetricRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(from_json(nlohmann::json::parse(line)));
  }
  return records;
}

/** CSV mirror of the JSONL log; reward columns expand to mean_reward_<m>. */
inline void write_csv(const std::string& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file: " + path);
  const size_t M = records.empty() ? 0 : records.front().mean_reward.size();
  out << "iteration,objective,grad_norm,clip_fraction,mean_abs_ratio_minus_one,"
         "leaf_diversity,velocity_evals,wall_clock_seconds";
  for (size_t m = 0; m < M; ++m) out << ",mean_reward_" << m;
  out << '\n';
  out.precision(17);
  for (const auto& r : records) {
    out << r.iteration << ',' << r.objective << ',' << r.grad_norm << ',' << r.clip_fraction
        << ',' << r.mean_abs_ratio_minus_one << ',' << r.leaf_diversity << ','
        << r.velocity_evals << ',' << r.wall_clock_seconds;
    for (double v : r.mean_reward) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("failed writing metrics file: " + path);
}

/** Field-by-field equality, ignoring wall_clock_seconds. */
inline bool equal_excluding_wall_clock(const MetricRecord& a, const MetricRecord& b) {
  return a.iteration == b.iteration && a.mean_reward == b.mean_reward &&
         a.objective == b.objective && a.grad_norm == b.grad_norm &&
         a.clip_fraction == b.clip_fraction &&
         a.mean_abs_ratio_minus_one == b.mean_abs_ratio_minus_one &&
         a.leaf_diversity == b.leaf_diversity && a.velocity_evals == b.velocity_evals;
}

}  // namespace treeflow::metrics
