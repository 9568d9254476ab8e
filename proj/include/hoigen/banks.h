#ifndef HOIGEN_BANKS_H_
#define HOIGEN_BANKS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hoigen/backends.h"
#include "hoigen/matrix.h"
#include "hoigen/taxonomy.h"

namespace hoigen {

// Key-value prototype store: keys P (N x D), multi-hot values L (N x C).
struct PrototypeBank {
  Branch kind = Branch::kUnion;
  Matrix keys;
  Matrix values;

  std::size_t size() const { return keys.rows(); }
  // Throws ValidationError when rows disagree, values are not binary or a
  // row labels no class.
  void Validate() const;
  // Classes with at least one prototype.
  std::vector<int> CoveredClasses() const;
};

// One unit-norm text feature per HOI category (C x D).
struct TextPrototypes {
  Matrix keys;
};

// Ways of filling the generative bank from realistic (R) and generated (G)
// features.
enum class Construction { kG, kR, kRPlusG, kRConcatG };
std::string ConstructionName(Construction c);  // "G", "R", "R_plus_G", "R_concat_G"
Construction ParseConstruction(const std::string& name);

// Per-branch, per-HOI feature pools (rows are samples). A pool may be empty,
// e.g. realistic features of unseen categories.
using FeaturePools = std::map<Branch, std::vector<Matrix>>;

// Region banks for union, human and object. `generated` must cover every
// HOI unless construction is R; `realistic` is read for seen HOIs only.
std::map<Branch, PrototypeBank> BuildGenerativeBanks(const FeaturePools* generated,
                                                     const FeaturePools* realistic,
                                                     const ZeroShotSplit& split, int n_size,
                                                     Construction construction,
                                                     std::uint64_t seed);

struct KnowledgeBanks {
  PrototypeBank clip;
  PrototypeBank dino;
};

// One row per training image in both banks, same row order.
KnowledgeBanks BuildMultiKnowledgeBanks(const std::vector<Scene>& images, const Backend& backend,
                                        int num_classes);

TextPrototypes BuildTextPrototypes(const HoiTaxonomy& tax, const Backend& backend);

struct BankSet {
  std::map<Branch, PrototypeBank> region;
  KnowledgeBanks knowledge;
  TextPrototypes text;
};

void SaveBanks(const std::filesystem::path& dir, const BankSet& banks,
               const std::map<std::string, std::string>& metadata);
BankSet LoadBanks(const std::filesystem::path& dir);

}  // namespace hoigen

#endif  // HOIGEN_BANKS_H_
