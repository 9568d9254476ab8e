#ifndef HOIGEN_TESTS_TEST_UTIL_H_
#define HOIGEN_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <string>

#include "hoigen/config.h"
#include "hoigen/taxonomy.h"

namespace hoigen::testing {

// 3 verbs x 3 objects, every pair valid, counts 1..9 in HOI order.
inline HoiTaxonomy ToyTaxonomy() {
  HoiTaxonomy t;
  t.objects = {"horse", "bicycle", "dog"};
  t.verbs = {"ride", "hold", "feed"};
  long long count = 1;
  for (int v = 0; v < 3; ++v) {
    for (int o = 0; o < 3; ++o) {
      t.hois.push_back({v, o});
      t.train_instance_counts.push_back(count++);
    }
  }
  return t;
}

// Fresh per-test scratch directory.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hoigen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Small, fast synthetic run used by the pipeline-level tests.
inline RunConfig FastConfig() {
  RunConfig cfg;
  cfg.unseen_count = 4;
  cfg.stage1_epochs = 8;
  cfg.stage2_epochs = 8;
  cfg.train_scale = 2;
  cfg.test_per_class = 3;
  cfg.k = 10;
  cfg.detector_epochs = 2;
  return cfg;
}

}  // namespace hoigen::testing

#endif  // HOIGEN_TESTS_TEST_UTIL_H_
