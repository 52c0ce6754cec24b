#include "dg/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dg {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    values_[key] = val;
  }
}

void Config::apply_overrides(const std::vector<std::string>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0)
      throw std::runtime_error("expected --key, got '" + a + "'");
    if (i + 1 >= args.size())
      throw std::runtime_error("missing value for '" + a + "'");
    values_[a.substr(2)] = args[++i];
  }
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_str(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  std::string v = it == values_.end() ? def : it->second;
  observed_[key] = v;
  return v;
}

std::string Config::require_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("missing required config key '" + key + "'");
  observed_[key] = it->second;
  return it->second;
}

double Config::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    std::ostringstream os;
    os.precision(17);
    os << def;
    observed_[key] = os.str();
    return def;
  }
  observed_[key] = it->second;
  try {
    size_t pos;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error("config key '" + key + "': not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    observed_[key] = std::to_string(def);
    return def;
  }
  observed_[key] = it->second;
  try {
    size_t pos;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error("config key '" + key + "': not an integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    observed_[key] = def ? "true" : "false";
    return def;
  }
  observed_[key] = it->second;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config key '" + key + "': not a boolean: " + it->second);
}

std::vector<double> Config::get_list(const std::string& key,
                                     const std::vector<double>& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    std::ostringstream os;
    os.precision(17);
    for (size_t i = 0; i < def.size(); ++i) os << (i ? "," : "") << def[i];
    observed_[key] = os.str();
    return def;
  }
  observed_[key] = it->second;
  std::vector<double> out;
  if (trim(it->second).empty()) return out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(trim(tok)));
    } catch (...) {
      throw std::runtime_error("config key '" + key + "': bad list entry: " + tok);
    }
  }
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      const std::vector<int>& def) const {
  std::vector<double> d(def.begin(), def.end());
  std::vector<double> v = get_list(key, d);
  std::vector<int> out;
  for (double x : v) out.push_back(static_cast<int>(x));
  return out;
}

void Config::echo(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config echo " + path);
  std::map<std::string, std::string> all = observed_;
  for (const auto& [k, v] : values_) all.emplace(k, v);
  for (const auto& [k, v] : all) out << k << " = " << v << "\n";
}

}  // namespace dg
