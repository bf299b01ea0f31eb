#pragma once

#include <map>
#include <string>
#include <vector>

namespace aquathru {

// Flat `key=value` text config. One entry per line, `#` starts a comment,
// blank lines ignored. Values are scalars or comma-separated scalar lists.
// Loaders reject unknown keys so typos surface immediately.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::string& path);

  void set(const std::string& key, double value);
  void set(const std::string& key, const std::vector<double>& values);
  void set_string(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  double get_scalar(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;
  std::string get_string(const std::string& key) const;

  // Throws ValidationError if any stored key is not in `allowed`.
  void require_only(const std::vector<std::string>& allowed) const;

  // Keys in insertion order; serialization is byte-stable.
  std::string serialize() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> entries_;
};

}  // namespace aquathru
