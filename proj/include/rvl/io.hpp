// Config parsing, deterministic serialization, and on-disk caching helpers.
//
// Configs are flat INI text: [section] headers, key = value lines, # or ;
// comments.  Numbers are rendered with %.17g everywhere so that a report is a
// pure function of (config, seed) byte for byte.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rvl/mesh.hpp"

namespace rvl {

struct io_error : std::runtime_error {
  explicit io_error(const std::string& w) : std::runtime_error(w) {}
};
struct config_error : std::runtime_error {
  explicit config_error(const std::string& w) : std::runtime_error(w) {}
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Round-trip exact decimal rendering; the single number format of the repo.
inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- flat INI config ------------------------------------------------------

struct config {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& sec, const std::string& key,
                  const std::string& fallback) const {
    auto s = sections.find(sec);
    if (s == sections.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }
  std::string require(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) throw config_error("config: missing " + sec + "." + key);
    return sections.at(sec).at(key);
  }
  double get_num(const std::string& sec, const std::string& key, double fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string v = sections.at(sec).at(key);
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw config_error("config: " + sec + "." + key + " is not a number: " + v);
    }
  }
  long get_int(const std::string& sec, const std::string& key, long fallback) const {
    double d = get_num(sec, key, double(fallback));
    long l = long(d);
    if (double(l) != d) throw config_error("config: " + sec + "." + key + " is not integral");
    return l;
  }
  bool get_bool(const std::string& sec, const std::string& key, bool fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string v = sections.at(sec).at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config: " + sec + "." + key + " is not a boolean: " + v);
  }
  void set(const std::string& sec, const std::string& key, const std::string& val) {
    sections[sec][key] = val;
  }

  // Canonical text: sections and keys sorted, one key per line.  The content
  // hash of a config is the hash of this rendering.
  std::string canonical() const {
    std::ostringstream out;
    for (const auto& [sec, kv] : sections) {
      out << '[' << sec << "]\n";
      for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
    }
    return out.str();
  }
  std::string content_hash() const { return hex64(fnv1a64(canonical())); }
};

namespace detail {
inline std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace detail

inline config parse_config(std::istream& in) {
  config c;
  std::string line, sec = "global";
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::strip(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3)
        throw config_error("config line " + std::to_string(lineno) + ": bad section header");
      sec = detail::strip(t.substr(1, t.size() - 2));
      c.sections[sec];
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::strip(t.substr(0, eq));
    std::string val = detail::strip(t.substr(eq + 1));
    if (key.empty()) throw config_error("config line " + std::to_string(lineno) + ": empty key");
    c.sections[sec][key] = val;
  }
  return c;
}

inline config parse_config_string(const std::string& s) {
  std::istringstream in(s);
  return parse_config(in);
}

inline config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  return parse_config(in);
}

// --- files ------------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write: " + path);
  out << body;
  if (!out) throw io_error("short write: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV with %.17g cells; re-parsing returns the identical doubles.
inline std::string csv_render(const std::vector<std::string>& header,
                              const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw io_error("csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << fmt17(row[i]) << (i + 1 < row.size() ? "," : "");
    out << '\n';
  }
  return out.str();
}

inline std::vector<std::vector<double>> csv_parse(const std::string& body,
                                                  std::vector<std::string>* header = nullptr) {
  std::istringstream in(body);
  std::string line;
  if (!std::getline(in, line)) throw io_error("csv: empty");
  if (header) {
    header->clear();
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header->push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream r(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(r, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- mesh cache -------------------------------------------------------------

inline nlohmann::json mesh_to_json(const boundary_mesh& m) {
  nlohmann::json j;
  j["h0"] = m.params.h0;
  j["core_half"] = m.params.core_half;
  j["growth"] = m.params.growth;
  j["R_trunc"] = m.params.R_trunc;
  j["z0"] = {m.z0[0], m.z0[1]};
  j["breaks"] = m.breaks;
  j["w"] = m.w;
  j["se"] = m.se;
  j["tail"] = m.tail;
  j["provenance"] = m.provenance;
  j["seed"] = m.seed;
  j["walks"] = m.walks;
  return j;
}

// Restores the measure estimate onto a rebuilt geometry.  The graph is not
// serialized; the caller supplies the same one (checked through the breaks).
inline boundary_mesh mesh_from_json(const nlohmann::json& j, const lipschitz_graph<2>& g) {
  boundary_mesh m;
  m.params = {j.at("h0").get<double>(), j.at("core_half").get<double>(),
              j.at("growth").get<double>(), j.at("R_trunc").get<double>()};
  m.graph = g;
  m.breaks = make_breaks(m.params);
  if (j.at("breaks").get<std::vector<double>>() != m.breaks)
    throw io_error("mesh cache: geometry mismatch");
  std::size_t n = m.breaks.size() - 1;
  m.t.resize(n);
  m.nodes.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    m.t[k] = (m.breaks[k] + m.breaks[k + 1]) / 2;
    m.nodes[k] = {m.t[k], g.phi(m.t[k])};
  }
  m.w = j.at("w").get<std::vector<double>>();
  m.se = j.at("se").get<std::vector<double>>();
  m.tail = j.at("tail").get<double>();
  m.provenance = j.at("provenance").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.walks = j.at("walks").get<std::uint64_t>();
  if (m.w.size() != n || m.se.size() != n) throw io_error("mesh cache: size mismatch");
  return m;
}

}  // namespace rvl
