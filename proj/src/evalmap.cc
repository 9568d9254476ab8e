#include "hoigen/evalmap.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "hoigen/error.h"
#include "hoigen/kvdoc.h"
#include "json.hpp"

namespace hoigen {

namespace {

double PairOverlap(const Box& dh, const Box& doj, const Box& gh, const Box& go) {
  return std::min(Iou(dh, gh), Iou(doj, go));
}

// Canonical order for records with equal scores, so results do not depend
// on the order of lines in the input files.
template <typename R>
bool CanonicalLess(const R& x, const R& y) {
  return std::tie(x.image, x.human.x1, x.human.y1, x.human.x2, x.human.y2, x.object.x1, x.object.y1,
                  x.object.x2, x.object.y2, x.hoi) <
         std::tie(y.image, y.human.x1, y.human.y1, y.human.x2, y.human.y2, y.object.x1, y.object.y1,
                  y.object.x2, y.object.y2, y.hoi);
}

std::optional<double> Mean(const std::vector<std::optional<double>>& ap, const std::vector<int>& ids) {
  double sum = 0;
  int n = 0;
  for (int id : ids) {
    if (ap[id]) {
      sum += *ap[id];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::string Render(const std::optional<double>& v) { return v ? FormatDouble(*v) : "n/a"; }

void CheckBox(const Box& b, const std::string& where) {
  if (!b.valid()) throw ParseError("invalid box in " + where);
}

std::vector<std::string> DataLines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

void WriteLines(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& h : header) out << "# " << h << '\n';
  out << body;
}

std::string BoxText(const Box& b) {
  return FormatDouble(b.x1) + ' ' + FormatDouble(b.y1) + ' ' + FormatDouble(b.x2) + ' ' +
         FormatDouble(b.y2);
}

}  // namespace

MatchResult MatchPairs(const std::vector<DetectionRecord>& detections,
                       const std::vector<GroundTruthRecord>& ground_truth, double threshold) {
  MatchResult r;
  r.num_gt = static_cast<int>(ground_truth.size());
  r.order.resize(detections.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    const DetectionRecord& x = detections[a];
    const DetectionRecord& y = detections[b];
    if (x.score != y.score) return x.score > y.score;
    return CanonicalLess(x, y);
  });
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_key;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    by_key[{ground_truth[g].image, ground_truth[g].hoi}].push_back(g);
  }
  for (auto& [key, ids] : by_key) {
    std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
      return CanonicalLess(ground_truth[a], ground_truth[b]);
    });
  }
  std::vector<bool> used(ground_truth.size(), false);
  r.tp.reserve(detections.size());
  for (std::size_t i : r.order) {
    const DetectionRecord& d = detections[i];
    auto it = by_key.find({d.image, d.hoi});
    double best = -1;
    std::size_t best_g = 0;
    if (it != by_key.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const double q = PairOverlap(d.human, d.object, ground_truth[g].human, ground_truth[g].object);
        if (q > best) {
          best = q;
          best_g = g;
        }
      }
    }
    const bool hit = best >= threshold;
    if (hit) used[best_g] = true;
    r.tp.push_back(hit);
  }
  return r;
}

std::optional<double> AveragePrecision(const std::vector<bool>& flags, int num_gt) {
  if (num_gt <= 0) return std::nullopt;
  const std::size_t n = flags.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += flags[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / (i + 1);
    recall[i] = static_cast<double>(tp) / num_gt;
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

MapReport ComputeMapReport(const std::vector<DetectionRecord>& detections,
                           const std::vector<GroundTruthRecord>& ground_truth, int num_classes,
                           const ZeroShotSplit* split, const RarityPartition* rarity) {
  std::vector<std::vector<DetectionRecord>> dets(num_classes);
  std::vector<std::vector<GroundTruthRecord>> gts(num_classes);
  for (const auto& g : ground_truth) {
    if (g.hoi < 0 || g.hoi >= num_classes) {
      throw MissingCategory("ground truth HOI " + std::to_string(g.hoi) + " outside the taxonomy");
    }
    gts[g.hoi].push_back(g);
  }
  for (const auto& d : detections) {
    if (d.hoi < 0 || d.hoi >= num_classes) {
      throw MissingCategory("detection HOI " + std::to_string(d.hoi) + " outside the taxonomy");
    }
    dets[d.hoi].push_back(d);
  }
  if (split && split->num_hois != num_classes) throw ValidationError("split does not cover the taxonomy");

  MapReport report;
  report.ap.resize(num_classes);
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < num_classes; ++c) {
    const MatchResult m = MatchPairs(dets[c], gts[c]);
    report.ap[c] = AveragePrecision(m.tp, m.num_gt);
  }
  std::vector<int> all(num_classes);
  std::iota(all.begin(), all.end(), 0);
  report.full = Mean(report.ap, all);
  if (split) {
    report.seen = Mean(report.ap, split->seen_hois);
    report.unseen = Mean(report.ap, split->unseen_hois);
  }
  if (rarity) {
    report.rare = Mean(report.ap, rarity->rare);
    report.nonrare = Mean(report.ap, rarity->nonrare);
  }
  return report;
}

std::string FormatReportText(const MapReport& report) {
  KvDoc doc;
  for (const auto& [k, v] : report.config) doc.Set("config." + k, v);
  doc.Set("map.full", Render(report.full));
  doc.Set("map.seen", Render(report.seen));
  doc.Set("map.unseen", Render(report.unseen));
  doc.Set("map.rare", Render(report.rare));
  doc.Set("map.nonrare", Render(report.nonrare));
  for (std::size_t c = 0; c < report.ap.size(); ++c) doc.Set("ap." + std::to_string(c), Render(report.ap[c]));
  return doc.ToString();
}

std::string FormatReportJson(const MapReport& report) {
  nlohmann::ordered_json j;
  auto value = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["config"] = report.config;
  j["map"] = {{"full", value(report.full)},     {"seen", value(report.seen)},
              {"unseen", value(report.unseen)}, {"rare", value(report.rare)},
              {"nonrare", value(report.nonrare)}};
  auto& ap = j["ap"] = nlohmann::ordered_json::array();
  for (const auto& v : report.ap) ap.push_back(value(v));
  return j.dump(2) + "\n";
}

void WriteDetections(const std::filesystem::path& path, const std::vector<DetectionRecord>& records,
                     const std::vector<std::string>& header) {
  std::ostringstream body;
  for (const auto& r : records) {
    body << r.image << ' ' << BoxText(r.human) << ' ' << BoxText(r.object) << ' ' << r.hoi << ' '
         << FormatDouble(r.score) << '\n';
  }
  WriteLines(path, header, body.str());
}

void WriteGroundTruth(const std::filesystem::path& path,
                      const std::vector<GroundTruthRecord>& records,
                      const std::vector<std::string>& header) {
  std::ostringstream body;
  for (const auto& r : records) {
    body << r.image << ' ' << BoxText(r.human) << ' ' << BoxText(r.object) << ' ' << r.hoi << '\n';
  }
  WriteLines(path, header, body.str());
}

std::vector<DetectionRecord> ReadDetections(const std::filesystem::path& path) {
  std::vector<DetectionRecord> out;
  int line_no = 0;
  for (const auto& line : DataLines(path)) {
    ++line_no;
    std::istringstream in(line);
    DetectionRecord r;
    std::string extra;
    if (!(in >> r.image >> r.human.x1 >> r.human.y1 >> r.human.x2 >> r.human.y2 >> r.object.x1 >>
          r.object.y1 >> r.object.x2 >> r.object.y2 >> r.hoi >> r.score) ||
        (in >> extra)) {
      throw ParseError(path.string() + ": malformed detection record " + std::to_string(line_no));
    }
    CheckBox(r.human, path.string());
    CheckBox(r.object, path.string());
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<GroundTruthRecord> ReadGroundTruth(const std::filesystem::path& path) {
  std::vector<GroundTruthRecord> out;
  int line_no = 0;
  for (const auto& line : DataLines(path)) {
    ++line_no;
    std::istringstream in(line);
    GroundTruthRecord r;
    std::string extra;
    if (!(in >> r.image >> r.human.x1 >> r.human.y1 >> r.human.x2 >> r.human.y2 >> r.object.x1 >>
          r.object.y1 >> r.object.x2 >> r.object.y2 >> r.hoi) ||
        (in >> extra)) {
      throw ParseError(path.string() + ": malformed ground-truth record " + std::to_string(line_no));
    }
    CheckBox(r.human, path.string());
    CheckBox(r.object, path.string());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hoigen
