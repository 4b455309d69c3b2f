#include "dramatic/params.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dramatic/errors.h"

namespace dramatic {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ToDouble(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("parameter '" + key + "': not a number: " + text);
  }
  return v;
}

}  // namespace

ParamFile ParamFile::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open parameter file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

ParamFile ParamFile::Parse(const std::string& text) {
  ParamFile out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("parameter file line " + std::to_string(lineno) +
                            ": expected key = value");
    }
    const std::string key = Trim(t.substr(0, eq));
    if (key.empty()) {
      throw ValidationError("parameter file line " + std::to_string(lineno) +
                            ": empty key");
    }
    out.values_[key] = Trim(t.substr(eq + 1));
  }
  return out;
}

std::optional<std::string> ParamFile::GetString(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> ParamFile::GetDouble(const std::string& key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  return ToDouble(key, *s);
}

std::optional<long> ParamFile::GetInt(const std::string& key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc() || ptr != s->data() + s->size()) {
    throw ValidationError("parameter '" + key + "': not an integer: " + *s);
  }
  return v;
}

std::optional<std::vector<double>> ParamFile::GetDoubleList(
    const std::string& key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  return ParseDoubleList(*s);
}

void ParamFile::CheckKeys(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("unknown parameter '" + key + "'");
    }
  }
}

std::vector<double> ParseDoubleList(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = Trim(item);
    if (t.empty()) continue;
    out.push_back(ToDouble("list", t));
  }
  return out;
}

}  // namespace dramatic
