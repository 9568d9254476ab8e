#ifndef HOIGEN_KVDOC_H_
#define HOIGEN_KVDOC_H_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hoigen {

// Ordered `key = value` text document. Blank lines and lines starting with
// '#' are ignored on read. Used for split files, config files and reports.
class KvDoc {
 public:
  void Set(const std::string& key, const std::string& value);
  void Set(const std::string& key, double value);
  void Set(const std::string& key, long long value);
  void Set(const std::string& key, int value) { Set(key, static_cast<long long>(value)); }

  bool Has(const std::string& key) const;
  std::optional<std::string> Get(const std::string& key) const;
  std::string GetOr(const std::string& key, const std::string& fallback) const;
  // Throw ParseError when the key is missing or malformed.
  std::string GetString(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  long long GetInt(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  std::string ToString() const;
  static KvDoc Parse(const std::string& text);
  static KvDoc Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Round-trippable decimal rendering of a double.
std::string FormatDouble(double v);

}  // namespace hoigen

#endif  // HOIGEN_KVDOC_H_
