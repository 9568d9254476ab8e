#ifndef HOIGEN_TAXONOMY_H_
#define HOIGEN_TAXONOMY_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hoigen/matrix.h"

namespace hoigen {

// HOIs with fewer training instances than this are "rare".
inline constexpr long long kRareThreshold = 10;
// Marks a HOI whose training instance count is not recorded.
inline constexpr long long kUnknownCount = -1;

struct HoiPair {
  int verb = 0;
  int object = 0;
  bool operator==(const HoiPair&) const = default;
};

// The HOI label space: verbs x objects restricted to the valid combinations.
struct HoiTaxonomy {
  std::vector<std::string> objects;
  std::vector<std::string> verbs;
  std::vector<HoiPair> hois;
  std::vector<long long> train_instance_counts;  // one per HOI

  int num_objects() const { return static_cast<int>(objects.size()); }
  int num_verbs() const { return static_cast<int>(verbs.size()); }
  int num_hois() const { return static_cast<int>(hois.size()); }
  bool has_counts() const;
  std::optional<int> Find(int verb, int object) const;
  std::string HoiName(int hoi) const;  // "verb object"

  // Throws ValidationError on duplicate pairs, dangling ids or bad counts.
  void Validate() const;
};

HoiTaxonomy ParseTaxonomy(const std::string& text);
HoiTaxonomy LoadTaxonomy(const std::filesystem::path& path);
std::string FormatTaxonomy(const HoiTaxonomy& tax);
void SaveTaxonomy(const HoiTaxonomy& tax, const std::filesystem::path& path);

struct RarityPartition {
  std::vector<int> rare;
  std::vector<int> nonrare;
};
// Throws MissingCounts when any count is unknown.
RarityPartition PartitionByRarity(const HoiTaxonomy& tax);

enum class SplitSetting { kUC, kRfUc, kNfUc, kUV, kUO };

std::string SettingName(SplitSetting s);   // "UC", "RF_UC", ...
SplitSetting ParseSetting(const std::string& name);  // accepts '-' or '_'
const std::vector<SplitSetting>& AllSettings();

struct ZeroShotSplit {
  SplitSetting setting = SplitSetting::kUC;
  std::uint64_t seed = 0;
  int unseen_count = 0;
  int num_hois = 0;
  std::vector<int> seen_hois;    // ascending
  std::vector<int> unseen_hois;  // ascending
  std::set<int> seen_objects;
  std::set<int> seen_verbs;

  bool IsSeen(int hoi) const;
};

// Constructs a split. For UO/UV `unseen_count` is the number of held-out
// objects/verbs; otherwise it is the number of unseen HOIs.
// Throws InfeasibleSplit when the constraints cannot be met.
ZeroShotSplit BuildSplit(const HoiTaxonomy& tax, SplitSetting setting,
                         int unseen_count, std::uint64_t seed);

// Returns a description of every violated split invariant (empty when valid).
std::vector<std::string> CheckSplit(const HoiTaxonomy& tax, const ZeroShotSplit& split);

void SaveSplit(const ZeroShotSplit& split, const std::filesystem::path& path);
ZeroShotSplit LoadSplit(const HoiTaxonomy& tax, const std::filesystem::path& path);

// Binary indicator vector of length `num_classes`. Throws IndexError.
Vec MultiHot(const std::vector<int>& labels, int num_classes);

}  // namespace hoigen

#endif  // HOIGEN_TAXONOMY_H_
