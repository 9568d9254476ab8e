#ifndef HOIGEN_BACKENDS_H_
#define HOIGEN_BACKENDS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hoigen/archive.h"
#include "hoigen/geometry.h"
#include "hoigen/matrix.h"
#include "hoigen/taxonomy.h"

namespace hoigen {

enum class Branch { kUnion, kHuman, kObject, kGlobalClip, kGlobalDino };

std::string BranchName(Branch b);
Branch ParseBranch(const std::string& name);
// The three region branches the generator synthesizes.
inline constexpr Branch kRegionBranches[] = {Branch::kUnion, Branch::kHuman, Branch::kObject};

struct FeatureVec {
  Vec values;
  Branch branch = Branch::kUnion;
};

// Detector output for one image: the (b_h, s_h, b_o, s_o, c_o) tuples.
struct RegionSet {
  std::vector<Box> human_boxes;
  std::vector<double> human_scores;
  std::vector<Box> object_boxes;
  std::vector<double> object_scores;
  std::vector<int> object_classes;

  // Throws ValidationError on invalid boxes, scores or length mismatch.
  void Validate() const;
};

// Region features of one (human, object) pair.
struct PairFeatures {
  int human = 0;
  int object = 0;
  FeatureVec union_feature;
  FeatureVec human_feature;
  FeatureVec object_feature;
};

struct GlobalFeatures {
  FeatureVec clip;
  FeatureVec dino;
};

// Annotated interaction: one human, one object, one or more HOI labels.
struct GtInteraction {
  int human = 0;
  int object = 0;
  std::vector<int> hois;
};

// Annotated image.
struct Scene {
  std::string id;
  double width = 640;
  double height = 480;
  std::vector<Box> humans;
  std::vector<Box> objects;
  std::vector<int> object_classes;
  std::vector<GtInteraction> interactions;

  // Sorted, de-duplicated HOI labels present in the image.
  std::vector<int> Labels() const;
};

// Frozen encoders plus the detector, behind one interface.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;

  // Features for every human x object pair, human-major order. Pairs are
  // empty when either side has no boxes.
  virtual std::vector<PairFeatures> EncodeRegions(const std::string& image_ref,
                                                  const RegionSet& regions) const = 0;
  // Unit-norm text embedding. Throws BackendError on an empty prompt.
  virtual FeatureVec EncodeText(const std::string& prompt) const = 0;
  virtual GlobalFeatures EncodeGlobal(const std::string& image_ref) const = 0;
  virtual RegionSet Detect(const std::string& image_ref) const = 0;
  // Image-encoder features of annotated crops (union, human, object) of one
  // ground-truth pair; the generator is trained on these.
  virtual PairFeatures EncodeAnnotatedPair(const std::string& image_ref,
                                           const Box& human, const Box& object) const = 0;
};

struct SyntheticWorldConfig {
  int dim = 32;
  std::uint64_t seed = 0;
  // Per-dimension noise of region features (means are unit norm).
  double sigma = 0.05;
  // Weight of the identity component linking text concepts to visual means.
  double text_alignment = 0.3;
  // Category-specific deviation from the verb + object composition.
  double composition_noise = 0.25;
  // Strength of the linear gap between crop features and detector ROI features.
  double roi_distortion = 0.35;
  // Feature shift per unit of (1 - IoU) between a detected and annotated box.
  double misalignment_shift = 1.0;
  // Norm of the global (image-level) feature means.
  double global_norm = 0.2;
  // Minimum pairwise distance between means of one table.
  double min_separation = 0.2;
  // Detector box jitter, as a fraction of box size.
  double jitter = 0.05;
  // Detector scores are drawn from [1 - score_noise, 1].
  double score_noise = 0.2;
};

// Deterministic stand-in for the frozen encoders: per-branch category means
// derived from hashed word vectors, isotropic noise, and a linear
// crop-to-ROI distortion.
class SyntheticWorld {
 public:
  SyntheticWorld(HoiTaxonomy taxonomy, SyntheticWorldConfig config);

  const HoiTaxonomy& taxonomy() const { return taxonomy_; }
  const SyntheticWorldConfig& config() const { return config_; }
  int dim() const { return config_.dim; }

  // Crop-pathway means (rows: HOI for union/global branches, object otherwise).
  const Matrix& CropMeans(Branch b) const;
  // Detector-pathway means for exactly aligned boxes.
  const Matrix& RoiMeans(Branch b) const;
  // Category key of a HOI in a branch's mean table.
  int CategoryKey(Branch b, int hoi) const;
  // Unit direction a misaligned ROI drifts along.
  const Vec& ShiftDirection(Branch b) const;

  // Hashed word vector used by both the text encoder and the world means.
  Vec WordVector(const std::string& token) const;
  Vec EmbedText(const std::string& prompt) const;

  // Samples a scene: one object of `object_class` and one human per entry of
  // `human_labels`, each interacting with the object under those HOIs.
  Scene MakeScene(const std::string& id, int object_class,
                  const std::vector<std::vector<int>>& human_labels,
                  std::uint64_t seed) const;

 private:
  void BuildMeans();

  HoiTaxonomy taxonomy_;
  SyntheticWorldConfig config_;
  std::map<Branch, Matrix> crop_means_;
  std::map<Branch, Matrix> roi_means_;
  Matrix roi_map_;                      // D x D
  std::map<Branch, Vec> shift_direction_;
};

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(std::shared_ptr<const SyntheticWorld> world);

  void Register(const Scene& scene);
  void Register(const std::vector<Scene>& scenes);
  const Scene& Lookup(const std::string& image_ref) const;
  const SyntheticWorld& world() const { return *world_; }

  int dim() const override { return world_->dim(); }
  std::string name() const override { return "synthetic"; }
  std::vector<PairFeatures> EncodeRegions(const std::string& image_ref,
                                          const RegionSet& regions) const override;
  FeatureVec EncodeText(const std::string& prompt) const override;
  GlobalFeatures EncodeGlobal(const std::string& image_ref) const override;
  RegionSet Detect(const std::string& image_ref) const override;
  PairFeatures EncodeAnnotatedPair(const std::string& image_ref, const Box& human,
                                   const Box& object) const override;

 private:
  struct Match {
    int human = -1;
    int object = -1;
    double human_iou = 0;
    double object_iou = 0;
    double union_iou = 0;
  };
  Match MatchPair(const Scene& scene, const Box& human, const Box& object) const;
  Vec PairUnionMean(const Scene& scene, int human, int object, bool roi) const;
  Vec Noise(const std::string& image_ref, Branch b, const Box& box,
            const std::string& pathway) const;

  std::shared_ptr<const SyntheticWorld> world_;
  std::map<std::string, Scene> scenes_;
};

// Adapter over features exported from real pretrained encoders (CLIP, DINO,
// DETR) into a dense-array archive. Lookups that were not exported raise
// BackendError.
class CachedBackend : public Backend {
 public:
  explicit CachedBackend(const std::filesystem::path& cache_dir);

  int dim() const override { return dim_; }
  std::string name() const override { return "pretrained"; }
  std::vector<PairFeatures> EncodeRegions(const std::string& image_ref,
                                          const RegionSet& regions) const override;
  FeatureVec EncodeText(const std::string& prompt) const override;
  GlobalFeatures EncodeGlobal(const std::string& image_ref) const override;
  RegionSet Detect(const std::string& image_ref) const override;
  PairFeatures EncodeAnnotatedPair(const std::string& image_ref, const Box& human,
                                   const Box& object) const override;

  // Annotated scenes recorded in the cache (train or test list).
  std::vector<Scene> Scenes(const std::string& list) const;

 private:
  const Matrix& Array(const std::string& name) const;

  Archive archive_;
  int dim_ = 0;
  std::map<std::string, int> prompt_index_;
};

// Resolves the feature cache root: HOIGEN_CACHE_DIR, else `fallback`.
std::filesystem::path CacheRoot(const std::filesystem::path& fallback);

}  // namespace hoigen

#endif  // HOIGEN_BACKENDS_H_
