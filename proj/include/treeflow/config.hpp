#pragma once
/**
 * Flat key=value run configuration.
 *
 * Format: one `key = value` pair per line; `#` starts a comment; blank lines
 * are ignored; duplicate keys are rejected so typos fail loudly. Values are
 * parsed on access with typed getters that carry defaults, and every error
 * message names the offending key.
 *
 * List values are comma-separated ("64,64", "target,ring,angle"). Branch
 * schedules use offset notation, "2:3,4:2": each pair is offset:factor where
 * the offset k counts down from the top step (target step = time_steps - k,
 * k in [2, time_steps]), i.e. the way branch points are described relative
 * to the start of sampling.
 */

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "treeflow/errors.hpp"
#include "treeflow/rollout.hpp"

namespace treeflow::config {

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

}  // namespace detail

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (cfg.entries_.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
      cfg.entries_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  long get_int(const std::string& key, long fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
    }
  }

  unsigned long long get_uint64(const std::string& key, unsigned long long fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      size_t pos = 0;
      const unsigned long long v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected unsigned integer, got '" +
                        it->second + "'");
    }
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
  }

  std::vector<long> get_int_list(const std::string& key, const std::vector<long>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (detail::trim(it->second).empty()) return {};
    std::vector<long> out;
    for (const auto& part : detail::split(it->second, ',')) {
      try {
        size_t pos = 0;
        out.push_back(std::stol(part, &pos));
        if (pos != part.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer list, got '" + it->second +
                          "'");
      }
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (detail::trim(it->second).empty()) return {};
    std::vector<double> out;
    for (const auto& part : detail::split(it->second, ',')) {
      try {
        size_t pos = 0;
        out.push_back(std::stod(part, &pos));
        if (pos != part.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number list, got '" + it->second +
                          "'");
      }
    }
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (detail::trim(it->second).empty()) return {};
    return detail::split(it->second, ',');
  }

  /** Reject any key outside the allowed set, naming the first offender. */
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : entries_)
      if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/**
 * Branch schedule from offset notation: "2:3,4:2" with time steps T becomes
 * branch factors 3 at target step T-2 and 2 at T-4. Offsets must be strictly
 * increasing within [2, T] so target steps strictly decrease.
 */
inline rollout::BranchSchedule parse_branch_schedule(const std::string& text, int T,
                                                     int root_factor) {
  rollout::BranchSchedule schedule;
  schedule.root_factor = root_factor;
  const std::string body = detail::trim(text);
  if (!body.empty() && body != "none") {
    long prev_offset = 1;
    for (const auto& part : detail::split(body, ',')) {
      const auto colon = part.find(':');
      if (colon == std::string::npos)
        throw ConfigError("branch_schedule: expected offset:factor, got '" + part + "'");
      long offset = 0, factor = 0;
      try {
        size_t pos = 0;
        offset = std::stol(part.substr(0, colon), &pos);
        factor = std::stol(detail::trim(part.substr(colon + 1)), &pos);
      } catch (const std::exception&) {
        throw ConfigError("branch_schedule: expected offset:factor, got '" + part + "'");
      }
      if (offset < 2 || offset > T)
        throw ConfigError("branch_schedule: offset must lie in [2, time_steps], got " +
                          std::to_string(offset));
      if (offset <= prev_offset)
        throw ConfigError("branch_schedule: offsets must strictly increase");
      prev_offset = offset;
      schedule.entries.push_back(
          {T - static_cast<int>(offset), static_cast<int>(factor)});
    }
  }
  rollout::validate_schedule(schedule, T);
  return schedule;
}

}  // namespace treeflow::config
