#include "aquathru/kv_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "aquathru/error.hpp"

namespace aquathru {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// %.17g round-trips doubles exactly; trailing ".0" keeps integers readable.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& token) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' has non-numeric value '" +
                          token + "'");
  }
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config: line " + std::to_string(lineno) +
                            " is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError("config: empty key on line " + std::to_string(lineno));
    }
    if (cfg.entries_.count(key)) {
      throw ValidationError("config: duplicate key '" + key + "'");
    }
    cfg.order_.push_back(key);
    cfg.entries_[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void KvConfig::set(const std::string& key, double value) {
  set_string(key, format_double(value));
}

void KvConfig::set(const std::string& key, const std::vector<double>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) joined += ",";
    joined += format_double(values[i]);
  }
  set_string(key, joined);
}

void KvConfig::set_string(const std::string& key, const std::string& value) {
  if (!entries_.count(key)) order_.push_back(key);
  entries_[key] = value;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

double KvConfig::get_scalar(const std::string& key) const {
  return parse_double(key, get_string(key));
}

std::vector<double> KvConfig::get_list(const std::string& key) const {
  const std::string raw = get_string(key);
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto comma = raw.find(',', start);
    if (comma == std::string::npos) comma = raw.size();
    out.push_back(parse_double(key, trim(raw.substr(start, comma - start))));
    start = comma + 1;
  }
  return out;
}

std::string KvConfig::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ValidationError("config: missing key '" + key + "'");
  }
  return it->second;
}

void KvConfig::require_only(const std::vector<std::string>& allowed) const {
  for (const auto& key : order_) {
    bool ok = false;
    for (const auto& a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ValidationError("config: unknown key '" + key + "'");
  }
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& key : order_) {
    out += key;
    out += "=";
    out += entries_.at(key);
    out += "\n";
  }
  return out;
}

void KvConfig::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("config: cannot write '" + path + "'");
  f << serialize();
}

}  // namespace aquathru
