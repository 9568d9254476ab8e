#ifndef HOIGEN_PIPELINE_H_
#define HOIGEN_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hoigen/backends.h"
#include "hoigen/banks.h"
#include "hoigen/config.h"
#include "hoigen/evalmap.h"
#include "hoigen/generator.h"
#include "hoigen/scoring.h"
#include "hoigen/taxonomy.h"

namespace hoigen {

// Raised by the pipeline with the name of the stage that failed.
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// A detected human-object pair with its detector scores and the labels of
// the ground-truth pair it overlaps (empty for background pairs).
struct DetectedPair {
  std::string image;
  Box human_box;
  Box object_box;
  double human_score = 0;
  double object_score = 0;
  PairFeatures features;
  std::vector<int> labels;
};
struct Dataset {
  HoiTaxonomy taxonomy;
  ZeroShotSplit split;
  std::optional<RarityPartition> rarity;
  std::vector<Scene> train;
  std::vector<Scene> test;
  std::shared_ptr<const Backend> backend;
  std::shared_ptr<const SyntheticWorld> world;  // null for the pretrained backend
  // Detector output on every training / test image, in image order.
  std::vector<std::vector<DetectedPair>> train_pairs;
  std::vector<std::vector<DetectedPair>> test_pairs;
};

// Synthetic backend: samples a world and labeled scenes (training scenes
// only carry seen HOIs). Pretrained backend: opens the feature cache.
Dataset BuildDataset(const RunConfig& cfg);

std::vector<DetectedPair> DetectPairs(const Backend& backend, const Scene& scene);

// Crop-pathway features of annotated training pairs, one row per branch and
// label, keyed by prompt.
FeatureSet CropTrainingSet(const Dataset& data);
// Detector-pathway features of the same pairs (Stage II targets).
FeatureSet RoiTargetSet(const Dataset& data);

struct GeneratorArtifacts {
  CvaeParams params;
  nn::Mlp aligner;
  TrainCurve stage1;
  TrainCurve stage2;
  std::uint64_t hash_before_stage2 = 0;
  std::uint64_t hash_after_stage2 = 0;
};

TrainConfig Stage1Schedule(const RunConfig& cfg);
TrainConfig Stage2Schedule(const RunConfig& cfg);
GeneratorArtifacts TrainGenerator(const Dataset& data, const RunConfig& cfg);

// K synthesized features per HOI for every region branch.
FeaturePools SynthesizePools(const HoiTaxonomy& tax, const CvaeParams& params,
                             const nn::Mlp& aligner, int k, std::uint64_t seed);
// Detector-pathway features of labeled training pairs, grouped by HOI.
FeaturePools RealisticPools(int num_classes,
                            const std::vector<std::vector<DetectedPair>>& train_pairs);

struct RunResult {
  MapReport report;
  std::vector<DetectionRecord> detections;
  std::vector<GroundTruthRecord> ground_truth;
  BankSet banks;
  InteractionHead head;
  std::vector<double> head_curve;
};

// Region banks from the realistic pools (plus `generated` when given), the
// multi-knowledge banks and the text prototypes.
BankSet BuildBanks(const Dataset& data, const FeaturePools* generated, const RunConfig& cfg);

std::vector<GroundTruthRecord> GroundTruthRecords(const std::vector<Scene>& scenes);

// Banks, detector phase and evaluation. `generator` may be null only when
// generation is disabled.
RunResult RunDownstream(const Dataset& data, const GeneratorArtifacts* generator,
                        const RunConfig& cfg);

// Full run. When `out_dir` is given, writes checkpoints, banks, score dumps
// and the report there and returns the list of written paths in `written`.
RunResult TrainAndEval(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                       std::vector<std::filesystem::path>* written = nullptr);

// Metadata map embedding the config into artifacts.
std::map<std::string, std::string> ConfigMetadata(const RunConfig& cfg);

struct AblationRow {
  std::string value;
  double full = 0;
  double seen = 0;
  double unseen = 0;
  std::vector<double> unseen_per_seed;
  std::vector<double> seen_per_seed;
};

// Axes: n_bs (1..4), construction (R, R_plus_G, R_concat_G, G), n_size (1..4).
// Throws ConfigError on an unknown axis. Generator training is shared
// across the values of an axis for each seed.
std::vector<AblationRow> Ablate(const RunConfig& base, const std::string& axis,
                                const std::vector<std::uint64_t>& seeds);
std::string FormatAblation(const std::string& axis, const std::vector<AblationRow>& rows);

}  // namespace hoigen

#endif  // HOIGEN_PIPELINE_H_
