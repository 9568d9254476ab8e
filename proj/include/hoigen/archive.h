#ifndef HOIGEN_ARCHIVE_H_
#define HOIGEN_ARCHIVE_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hoigen/matrix.h"

namespace hoigen {

enum class ElementType { kFloat32, kFloat64 };

// One named 2-D array inside an archive.
struct ArchiveEntry {
  std::string name;
  Matrix data;
  std::string branch;  // Optional tag (union, human, ...); empty when unused.
  ElementType type = ElementType::kFloat32;
};

// Dense-array archive: a directory holding `manifest.json` (names, shapes,
// element types, branch tags, free-form string metadata) and one raw
// little-endian payload file per array.
class Archive {
 public:
  void Put(const std::string& name, Matrix data, const std::string& branch = "",
           ElementType type = ElementType::kFloat32);
  bool Contains(const std::string& name) const;
  const ArchiveEntry& Entry(const std::string& name) const;
  const Matrix& Get(const std::string& name) const { return Entry(name).data; }
  const std::vector<ArchiveEntry>& entries() const { return entries_; }

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  std::string Meta(const std::string& key) const;

  void Save(const std::filesystem::path& dir) const;
  static Archive Load(const std::filesystem::path& dir);

 private:
  std::vector<ArchiveEntry> entries_;
  std::map<std::string, std::string> metadata_;
};

}  // namespace hoigen

#endif  // HOIGEN_ARCHIVE_H_
