#ifndef HOIGEN_CONFIG_H_
#define HOIGEN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "hoigen/backends.h"
#include "hoigen/banks.h"
#include "hoigen/kvdoc.h"
#include "hoigen/scoring.h"
#include "hoigen/taxonomy.h"

namespace hoigen {

// Every knob of a run. Serialized as a key-value document whose keys match
// the field names below (nested groups use a dotted prefix).
struct RunConfig {
  std::string backend = "synthetic";  // synthetic | pretrained
  std::uint64_t seed = 0;
  int dim = 0;  // 0: backend default (512 pretrained, 32 synthetic)
  std::string taxonomy;  // empty: built-in synthetic label space
  std::string cache_dir;  // pretrained feature cache; HOIGEN_CACHE_DIR overrides

  std::string setting = "NF_UC";
  int unseen_count = -1;  // required; no library default
  std::uint64_t split_seed = 0;

  // Generator schedule.
  double lr = 1e-3;
  int stage1_epochs = 50;
  int stage1_batch = 256;
  int stage2_epochs = 50;
  int stage2_batch = 256;
  bool stage2_cosine = true;
  bool shared_vae = true;
  double token_lr_scale = 0.0;

  // Synthesis and banks.
  bool generation = true;
  int k = 100;
  int n_size = 2;
  std::string construction = "G";

  // Detector phase.
  int n_bs = 1;
  int detector_epochs = 15;
  int detector_batch = 4;
  double detector_lr = 1e-3;

  LossConfig lambdas;
  double logit_scale = 1.0;

  SyntheticWorldConfig world;
  int train_scale = 10;      // synthetic training instances per taxonomy count
  int test_per_class = 10;   // synthetic test images per HOI category
  double second_human = 0.25;  // chance a synthetic scene has a second actor

  int ResolvedDim() const;
  Construction ResolvedConstruction() const;

  // Throws ConfigError on an unknown key or malformed value.
  void Set(const std::string& key, const std::string& value);
  void Apply(const KvDoc& doc);
  KvDoc ToKvDoc() const;
  void Validate() const;
};

RunConfig LoadRunConfig(const std::filesystem::path& path);

// Built-in 4 verb x 3 object label space used by the synthetic benchmark.
HoiTaxonomy SyntheticTaxonomy();
HoiTaxonomy ResolveTaxonomy(const RunConfig& cfg);

}  // namespace hoigen

#endif  // HOIGEN_CONFIG_H_
