#pragma once

#include <map>
#include <string>
#include <vector>

namespace dg {

// Line-oriented `section.key = value` configuration with command-line
// overrides (`--section.key value`). Every key read is recorded with its
// effective value so a run can echo a config that reproduces it exactly.
class Config {
 public:
  Config() = default;
  explicit Config(const std::string& path) { load(path); }

  void load(const std::string& path);
  // args: flat list like {"--sim.dt", "0.01", ...}; throws on malformed.
  void apply_overrides(const std::vector<std::string>& args);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& def) const;
  std::string require_str(const std::string& key) const;  // throws naming the key
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& def) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& def) const;

  // All keys read so far with their effective values, plus unread explicit
  // keys; suitable for re-loading.
  void echo(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> observed_;
};

}  // namespace dg
