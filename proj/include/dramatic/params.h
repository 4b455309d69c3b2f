#ifndef DRAMATIC_PARAMS_H_
#define DRAMATIC_PARAMS_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dramatic {

// Run parameters read from a plain-text file of `key = value` lines.
// Blank lines and lines starting with '#' are ignored.
class ParamFile {
 public:
  static ParamFile Load(const std::string& path);
  static ParamFile Parse(const std::string& text);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> GetString(const std::string& key) const;
  std::optional<double> GetDouble(const std::string& key) const;
  std::optional<long> GetInt(const std::string& key) const;
  // Comma-separated list of reals.
  std::optional<std::vector<double>> GetDoubleList(const std::string& key) const;

  // Throws ValidationError naming the first key not in `allowed`.
  void CheckKeys(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<double> ParseDoubleList(const std::string& text);

}  // namespace dramatic

#endif  // DRAMATIC_PARAMS_H_
