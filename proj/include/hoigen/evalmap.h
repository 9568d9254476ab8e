#ifndef HOIGEN_EVALMAP_H_
#define HOIGEN_EVALMAP_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoigen/geometry.h"
#include "hoigen/matrix.h"
#include "hoigen/taxonomy.h"

namespace hoigen {

inline constexpr double kPairIouThreshold = 0.5;

struct DetectionRecord {
  std::string image;
  Box human;
  Box object;
  int hoi = 0;
  double score = 0;
};

struct GroundTruthRecord {
  std::string image;
  Box human;
  Box object;
  int hoi = 0;
};

// Flags for the detections of one HOI category, in ranked order: descending
// score, ties broken by (image, human box, object box, hoi) so the ranking
// does not depend on record order. A detection is a true positive when its
// best still-unmatched ground truth pair (same image and HOI, ranked by
// min(iou_h, iou_o), equal overlaps resolved by the same key) reaches
// `threshold`.
struct MatchResult {
  std::vector<std::size_t> order;  // indices into the detection list
  std::vector<bool> tp;            // aligned with `order`
  int num_gt = 0;
};
MatchResult MatchPairs(const std::vector<DetectionRecord>& detections,
                       const std::vector<GroundTruthRecord>& ground_truth,
                       double threshold = kPairIouThreshold);

// All-point interpolated AP over ranked flags; nullopt when num_gt == 0.
std::optional<double> AveragePrecision(const std::vector<bool>& flags, int num_gt);

struct MapReport {
  std::vector<std::optional<double>> ap;  // per category; nullopt = no test GT
  std::optional<double> full;
  std::optional<double> seen;
  std::optional<double> unseen;
  std::optional<double> rare;
  std::optional<double> nonrare;
  std::map<std::string, std::string> config;  // embedded run configuration
};

// Per-category AP and the five aggregates. `split` and `rarity` may be null,
// leaving the matching aggregates empty.
MapReport ComputeMapReport(const std::vector<DetectionRecord>& detections,
                           const std::vector<GroundTruthRecord>& ground_truth, int num_classes,
                           const ZeroShotSplit* split, const RarityPartition* rarity);

std::string FormatReportText(const MapReport& report);
std::string FormatReportJson(const MapReport& report);

// Whitespace-separated line records: `image hx1 hy1 hx2 hy2 ox1 oy1 ox2 oy2
// hoi [score]`. Lines starting with '#' are comments.
void WriteDetections(const std::filesystem::path& path, const std::vector<DetectionRecord>& records,
                     const std::vector<std::string>& header = {});
std::vector<DetectionRecord> ReadDetections(const std::filesystem::path& path);
void WriteGroundTruth(const std::filesystem::path& path,
                      const std::vector<GroundTruthRecord>& records,
                      const std::vector<std::string>& header = {});
std::vector<GroundTruthRecord> ReadGroundTruth(const std::filesystem::path& path);

}  // namespace hoigen

#endif  // HOIGEN_EVALMAP_H_
