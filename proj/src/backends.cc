#include "hoigen/backends.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "hoigen/error.h"
#include "hoigen/prompts.h"
#include "hoigen/rng.h"
#include "json.hpp"

namespace hoigen {

namespace {

constexpr double kMatchIou = 0.3;
constexpr int kSeparationAttempts = 100;

Vec RandomUnit(std::uint64_t seed, int dim) {
  Rng rng(seed);
  return Normalized(rng.NormalVector(dim));
}

Vec Apply(const Matrix& m, std::span<const double> v) {
  Vec out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = Dot(m.row(r), v);
  return out;
}

void Axpy(double a, std::span<const double> x, Vec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double MinPairwiseDistance(const Matrix& m) {
  double best = INFINITY;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.rows(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < m.cols(); ++k) {
        const double t = m(i, k) - m(j, k);
        d += t * t;
      }
      best = std::min(best, std::sqrt(d));
    }
  }
  return best;
}

bool SameBox(const Box& a, const Box& b) {
  constexpr double kTol = 1e-3;
  return std::abs(a.x1 - b.x1) < kTol && std::abs(a.y1 - b.y1) < kTol &&
         std::abs(a.x2 - b.x2) < kTol && std::abs(a.y2 - b.y2) < kTol;
}

}  // namespace

std::string BranchName(Branch b) {
  switch (b) {
    case Branch::kUnion:
      return "union";
    case Branch::kHuman:
      return "human";
    case Branch::kObject:
      return "object";
    case Branch::kGlobalClip:
      return "global_clip";
    case Branch::kGlobalDino:
      return "global_dino";
  }
  return "?";
}

Branch ParseBranch(const std::string& name) {
  for (Branch b : {Branch::kUnion, Branch::kHuman, Branch::kObject, Branch::kGlobalClip,
                   Branch::kGlobalDino}) {
    if (BranchName(b) == name) return b;
  }
  throw ParseError("unknown branch '" + name + "'");
}

void RegionSet::Validate() const {
  if (human_boxes.size() != human_scores.size()) {
    throw ValidationError("one score per human box is required");
  }
  if (object_boxes.size() != object_scores.size() ||
      object_boxes.size() != object_classes.size()) {
    throw ValidationError("object boxes, scores and classes differ in length");
  }
  auto check = [](const Box& b, double s) {
    if (!b.valid()) throw ValidationError("box with x2 <= x1 or y2 <= y1");
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("detection score outside [0, 1]");
  };
  for (std::size_t i = 0; i < human_boxes.size(); ++i) check(human_boxes[i], human_scores[i]);
  for (std::size_t i = 0; i < object_boxes.size(); ++i) check(object_boxes[i], object_scores[i]);
}

std::vector<int> Scene::Labels() const {
  std::vector<int> out;
  for (const auto& it : interactions) out.insert(out.end(), it.hois.begin(), it.hois.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// SyntheticWorld

SyntheticWorld::SyntheticWorld(HoiTaxonomy taxonomy, SyntheticWorldConfig config)
    : taxonomy_(std::move(taxonomy)), config_(config) {
  if (config_.dim < 8) throw ConfigError("synthetic backend needs D >= 8");
  if (!(config_.sigma >= 0) || !(config_.jitter >= 0) || !(config_.score_noise >= 0) ||
      config_.score_noise > 1) {
    throw ConfigError("invalid synthetic world noise settings");
  }
  taxonomy_.Validate();
  BuildMeans();
}

Vec SyntheticWorld::WordVector(const std::string& token) const {
  Rng rng(DeriveSeed(DeriveSeed(config_.seed, "text"), token));
  Vec v = rng.NormalVector(config_.dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  for (double& x : v) x *= scale;
  return v;
}

Vec SyntheticWorld::EmbedText(const std::string& prompt) const {
  const auto tokens = Tokenize(prompt);
  if (tokens.empty()) throw BackendError("text encoder needs a nonempty prompt");
  Vec sum(config_.dim, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Axpy(1.0, WordVector(tokens[i]), sum);
    if (i + 1 < tokens.size()) Axpy(0.25, WordVector(tokens[i] + " " + tokens[i + 1]), sum);
  }
  return Normalized(sum);
}

void SyntheticWorld::BuildMeans() {
  const int d = config_.dim;
  const double alpha = std::clamp(config_.text_alignment, 0.0, 1.0);
  const double beta = std::sqrt(1.0 - alpha * alpha);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  auto concept_map = [&](const std::string& name) {
    Rng rng(DeriveSeed(config_.seed, "concept-map/" + name));
    Matrix m(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) m(r, c) = beta * rng.Normal() * inv_sqrt_d + (r == c ? alpha : 0.0);
    }
    return m;
  };
  auto words = [&](const std::string& phrase) {
    Vec v(d, 0.0);
    for (const auto& tok : Tokenize(phrase)) Axpy(1.0, WordVector(tok), v);
    return v;
  };

  struct TableSpec {
    Branch branch;
    int rows;
    double scale;
    bool text_linked;
  };
  const TableSpec specs[] = {
      {Branch::kUnion, taxonomy_.num_hois(), 1.0, true},
      {Branch::kHuman, taxonomy_.num_objects(), 1.0, true},
      {Branch::kObject, taxonomy_.num_objects(), 1.0, true},
      {Branch::kGlobalClip, taxonomy_.num_hois(), config_.global_norm, true},
      {Branch::kGlobalDino, taxonomy_.num_hois(), config_.global_norm, false},
  };
  const Vec person = words("person");
  for (const auto& spec : specs) {
    const std::string bname = BranchName(spec.branch);
    const Matrix map = concept_map(bname);
    std::vector<Vec> linked(spec.rows);
    for (int r = 0; r < spec.rows && spec.text_linked; ++r) {
      Vec concept_vec;
      if (spec.branch == Branch::kUnion || spec.branch == Branch::kGlobalClip) {
        const HoiPair p = taxonomy_.hois[r];
        concept_vec = words(VerbGerund(taxonomy_.verbs[p.verb]));
        Axpy(1.0, words(ObjectPhrase(taxonomy_.objects[p.object])), concept_vec);
      } else {
        concept_vec = words(ObjectPhrase(taxonomy_.objects[r]));
        if (spec.branch == Branch::kHuman) Axpy(1.0, person, concept_vec);
      }
      linked[r] = Normalized(Apply(map, concept_vec));
    }
    Matrix table;
    bool ok = false;
    for (int attempt = 0; attempt < kSeparationAttempts && !ok; ++attempt) {
      table = Matrix(spec.rows, d);
      for (int r = 0; r < spec.rows; ++r) {
        const Vec eta = RandomUnit(
            DeriveSeed(config_.seed, bname + "/eta/" + std::to_string(r) + "/" + std::to_string(attempt)), d);
        Vec m(d, 0.0);
        if (spec.text_linked) {
          m = linked[r];
          Axpy(config_.composition_noise, eta, m);
        } else {
          m = eta;
        }
        m = Normalized(m);
        for (int k = 0; k < d; ++k) table(r, k) = spec.scale * m[k];
      }
      ok = spec.rows < 2 || MinPairwiseDistance(table) >= config_.min_separation * spec.scale;
    }
    if (!ok) {
      throw ValidationError("could not separate " + bname + " means; raise D or lower min_separation");
    }
    crop_means_[spec.branch] = std::move(table);
  }

  Rng rng(DeriveSeed(config_.seed, "roi-map"));
  roi_map_ = Matrix(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      roi_map_(r, c) = config_.roi_distortion * rng.Normal() * inv_sqrt_d + (r == c ? 1.0 : 0.0);
    }
  }
  for (Branch b : kRegionBranches) {
    const Matrix& crop = crop_means_.at(b);
    Matrix roi(crop.rows(), d);
    for (std::size_t r = 0; r < crop.rows(); ++r) {
      const Vec v = Apply(roi_map_, crop.row(r));
      std::copy(v.begin(), v.end(), roi.row(r).begin());
    }
    roi_means_[b] = std::move(roi);
    shift_direction_[b] = RandomUnit(DeriveSeed(config_.seed, "shift/" + BranchName(b)), d);
  }
}

const Matrix& SyntheticWorld::CropMeans(Branch b) const { return crop_means_.at(b); }

const Matrix& SyntheticWorld::RoiMeans(Branch b) const {
  auto it = roi_means_.find(b);
  if (it == roi_means_.end()) throw BackendError("no ROI pathway for branch " + BranchName(b));
  return it->second;
}

const Vec& SyntheticWorld::ShiftDirection(Branch b) const {
  auto it = shift_direction_.find(b);
  if (it == shift_direction_.end()) throw BackendError("no ROI pathway for branch " + BranchName(b));
  return it->second;
}

int SyntheticWorld::CategoryKey(Branch b, int hoi) const {
  if (hoi < 0 || hoi >= taxonomy_.num_hois()) throw UnknownCategory("HOI id out of range");
  if (b == Branch::kHuman || b == Branch::kObject) return taxonomy_.hois[hoi].object;
  return hoi;
}

Scene SyntheticWorld::MakeScene(const std::string& id, int object_class,
                                const std::vector<std::vector<int>>& human_labels,
                                std::uint64_t seed) const {
  if (object_class < 0 || object_class >= taxonomy_.num_objects()) {
    throw UnknownCategory("object class out of range");
  }
  Rng rng(seed);
  Scene s;
  s.id = id;
  const double ow = rng.Uniform(60, 200), oh = rng.Uniform(60, 200);
  const double ox = rng.Uniform(0, s.width - ow), oy = rng.Uniform(0, s.height - oh);
  s.objects.push_back({ox, oy, ox + ow, oy + oh});
  s.object_classes.push_back(object_class);
  for (std::size_t i = 0; i < human_labels.size(); ++i) {
    for (int h : human_labels[i]) {
      if (h < 0 || h >= taxonomy_.num_hois() || taxonomy_.hois[h].object != object_class) {
        throw ValidationError("scene label does not involve the scene object");
      }
    }
    const double hw = rng.Uniform(60, 140), hh = rng.Uniform(150, 300);
    const double cx = ox + ow / 2 + rng.Uniform(-150, 150);
    const double hx = std::clamp(cx - hw / 2, 0.0, s.width - hw);
    const double hy = rng.Uniform(0, s.height - hh);
    s.humans.push_back({hx, hy, hx + hw, hy + hh});
    s.interactions.push_back({static_cast<int>(i), 0, human_labels[i]});
  }
  return s;
}

// ---------------------------------------------------------------------------
// SyntheticBackend

SyntheticBackend::SyntheticBackend(std::shared_ptr<const SyntheticWorld> world)
    : world_(std::move(world)) {
  if (!world_) throw BackendError("synthetic backend needs a world");
}

void SyntheticBackend::Register(const Scene& scene) { scenes_[scene.id] = scene; }

void SyntheticBackend::Register(const std::vector<Scene>& scenes) {
  for (const auto& s : scenes) Register(s);
}

const Scene& SyntheticBackend::Lookup(const std::string& image_ref) const {
  auto it = scenes_.find(image_ref);
  if (it == scenes_.end()) throw BackendError("unknown image '" + image_ref + "'");
  return it->second;
}

FeatureVec SyntheticBackend::EncodeText(const std::string& prompt) const {
  return {world_->EmbedText(prompt), Branch::kUnion};
}

Vec SyntheticBackend::Noise(const std::string& image_ref, Branch b, const Box& box,
                            const std::string& pathway) const {
  const std::uint64_t key =
      Fnv1a(&box, sizeof(Box), Fnv1a(image_ref + "|" + BranchName(b) + "|" + pathway));
  Rng rng(DeriveSeed(world_->config().seed, key));
  Vec n = rng.NormalVector(world_->dim());
  double sigma = world_->config().sigma;
  if (b == Branch::kGlobalClip || b == Branch::kGlobalDino) sigma *= world_->config().global_norm;
  for (double& x : n) x *= sigma;
  return n;
}

SyntheticBackend::Match SyntheticBackend::MatchPair(const Scene& scene, const Box& human,
                                                    const Box& object) const {
  Match m;
  for (std::size_t i = 0; i < scene.humans.size(); ++i) {
    const double q = Iou(human, scene.humans[i]);
    if (q > m.human_iou) {
      m.human_iou = q;
      m.human = static_cast<int>(i);
    }
  }
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    const double q = Iou(object, scene.objects[j]);
    if (q > m.object_iou) {
      m.object_iou = q;
      m.object = static_cast<int>(j);
    }
  }
  if (m.human_iou < kMatchIou) m.human = -1;
  if (m.object_iou < kMatchIou) m.object = -1;
  if (m.human >= 0 && m.object >= 0) {
    m.union_iou = Iou(UnionBox(human, object),
                      UnionBox(scene.humans[m.human], scene.objects[m.object]));
  }
  return m;
}

Vec SyntheticBackend::PairUnionMean(const Scene& scene, int human, int object, bool roi) const {
  Vec mean(world_->dim(), 0.0);
  if (human < 0 || object < 0) return mean;
  const Matrix& table = roi ? world_->RoiMeans(Branch::kUnion) : world_->CropMeans(Branch::kUnion);
  std::vector<int> labels;
  for (const auto& it : scene.interactions) {
    if (it.human == human && it.object == object) labels.insert(labels.end(), it.hois.begin(), it.hois.end());
  }
  if (labels.empty()) {
    // Non-interacting pair: weak object evidence only.
    const Matrix& obj = roi ? world_->RoiMeans(Branch::kObject) : world_->CropMeans(Branch::kObject);
    Axpy(0.5, obj.row(scene.object_classes[object]), mean);
    return mean;
  }
  for (int h : labels) Axpy(1.0 / labels.size(), table.row(h), mean);
  return mean;
}

PairFeatures SyntheticBackend::EncodeAnnotatedPair(const std::string& image_ref,
                                                   const Box& human, const Box& object) const {
  const Scene& scene = Lookup(image_ref);
  if (!human.valid() || !object.valid()) throw ValidationError("invalid crop box");
  const Match m = MatchPair(scene, human, object);
  const int d = world_->dim();
  PairFeatures out;
  out.human = m.human;
  out.object = m.object;

  Vec u = PairUnionMean(scene, m.human, m.object, false);
  Axpy(1.0, Noise(image_ref, Branch::kUnion, UnionBox(human, object), "crop"), u);
  Vec h(d, 0.0), o(d, 0.0);
  if (m.human >= 0 && m.object >= 0) {
    Axpy(1.0, world_->CropMeans(Branch::kHuman).row(scene.object_classes[m.object]), h);
  }
  if (m.object >= 0) {
    Axpy(1.0, world_->CropMeans(Branch::kObject).row(scene.object_classes[m.object]), o);
  }
  Axpy(1.0, Noise(image_ref, Branch::kHuman, human, "crop"), h);
  Axpy(1.0, Noise(image_ref, Branch::kObject, object, "crop"), o);
  out.union_feature = {std::move(u), Branch::kUnion};
  out.human_feature = {std::move(h), Branch::kHuman};
  out.object_feature = {std::move(o), Branch::kObject};
  return out;
}

std::vector<PairFeatures> SyntheticBackend::EncodeRegions(const std::string& image_ref,
                                                          const RegionSet& regions) const {
  regions.Validate();
  const Scene& scene = Lookup(image_ref);
  const int d = world_->dim();
  const double shift = world_->config().misalignment_shift;
  std::vector<PairFeatures> pairs;
  pairs.reserve(regions.human_boxes.size() * regions.object_boxes.size());
  for (std::size_t i = 0; i < regions.human_boxes.size(); ++i) {
    for (std::size_t j = 0; j < regions.object_boxes.size(); ++j) {
      const Box& hb = regions.human_boxes[i];
      const Box& ob = regions.object_boxes[j];
      const Match m = MatchPair(scene, hb, ob);
      const bool paired = m.human >= 0 && m.object >= 0;
      Vec u = PairUnionMean(scene, m.human, m.object, true);
      Vec h(d, 0.0), o(d, 0.0);
      if (paired) Axpy(1.0, world_->RoiMeans(Branch::kHuman).row(scene.object_classes[m.object]), h);
      if (m.object >= 0) {
        Axpy(1.0, world_->RoiMeans(Branch::kObject).row(scene.object_classes[m.object]), o);
      }
      const Box ub = UnionBox(hb, ob);
      Axpy(shift * (1.0 - (paired ? m.union_iou : 0.0)), world_->ShiftDirection(Branch::kUnion), u);
      Axpy(shift * (1.0 - (m.human >= 0 ? m.human_iou : 0.0)), world_->ShiftDirection(Branch::kHuman), h);
      Axpy(shift * (1.0 - (m.object >= 0 ? m.object_iou : 0.0)), world_->ShiftDirection(Branch::kObject), o);
      Axpy(1.0, Noise(image_ref, Branch::kUnion, ub, "roi"), u);
      Axpy(1.0, Noise(image_ref, Branch::kHuman, hb, "roi"), h);
      Axpy(1.0, Noise(image_ref, Branch::kObject, ob, "roi"), o);

      PairFeatures pf;
      pf.human = static_cast<int>(i);
      pf.object = static_cast<int>(j);
      pf.union_feature = {std::move(u), Branch::kUnion};
      pf.human_feature = {std::move(h), Branch::kHuman};
      pf.object_feature = {std::move(o), Branch::kObject};
      pairs.push_back(std::move(pf));
    }
  }
  return pairs;
}

GlobalFeatures SyntheticBackend::EncodeGlobal(const std::string& image_ref) const {
  const Scene& scene = Lookup(image_ref);
  const auto labels = scene.Labels();
  const Box whole{0, 0, scene.width, scene.height};
  auto make = [&](Branch b) {
    Vec v(world_->dim(), 0.0);
    for (int h : labels) Axpy(1.0 / labels.size(), world_->CropMeans(b).row(h), v);
    Axpy(1.0, Noise(image_ref, b, whole, "global"), v);
    return FeatureVec{std::move(v), b};
  };
  return {make(Branch::kGlobalClip), make(Branch::kGlobalDino)};
}

RegionSet SyntheticBackend::Detect(const std::string& image_ref) const {
  const Scene& scene = Lookup(image_ref);
  const auto& cfg = world_->config();
  Rng rng(DeriveSeed(cfg.seed, "detect/" + image_ref));
  auto jitter = [&](const Box& b) {
    if (cfg.jitter <= 0) return b;
    const double sw = cfg.jitter * b.width(), sh = cfg.jitter * b.height();
    Box j{b.x1 + rng.Normal() * sw, b.y1 + rng.Normal() * sh, b.x2 + rng.Normal() * sw,
          b.y2 + rng.Normal() * sh};
    if (j.x2 <= j.x1 + 1) j.x2 = j.x1 + 1;
    if (j.y2 <= j.y1 + 1) j.y2 = j.y1 + 1;
    return j;
  };
  auto score = [&]() { return std::clamp(1.0 - cfg.score_noise * rng.Uniform(), 0.0, 1.0); };
  RegionSet rs;
  for (const auto& h : scene.humans) {
    rs.human_boxes.push_back(jitter(h));
    rs.human_scores.push_back(score());
  }
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    rs.object_boxes.push_back(jitter(scene.objects[j]));
    rs.object_scores.push_back(score());
    rs.object_classes.push_back(scene.object_classes[j]);
  }
  return rs;
}

// ---------------------------------------------------------------------------
// CachedBackend

CachedBackend::CachedBackend(const std::filesystem::path& cache_dir) {
  try {
    archive_ = Archive::Load(cache_dir);
  } catch (const Error& e) {
    throw BackendError(std::string("cannot open feature cache: ") + e.what());
  }
  try {
    dim_ = std::stoi(archive_.Meta("dim"));
    const auto prompts = nlohmann::json::parse(archive_.Meta("prompts"));
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      prompt_index_[prompts[i].get<std::string>()] = static_cast<int>(i);
    }
  } catch (const std::exception& e) {
    throw BackendError(std::string("feature cache metadata: ") + e.what());
  }
}

const Matrix& CachedBackend::Array(const std::string& name) const {
  if (!archive_.Contains(name)) throw BackendError("feature cache has no '" + name + "'");
  return archive_.Get(name);
}

FeatureVec CachedBackend::EncodeText(const std::string& prompt) const {
  if (Tokenize(prompt).empty()) throw BackendError("text encoder needs a nonempty prompt");
  auto it = prompt_index_.find(prompt);
  if (it == prompt_index_.end()) throw BackendError("prompt not in feature cache: " + prompt);
  const auto row = Array("text").row(it->second);
  return {Normalized(row), Branch::kUnion};
}

GlobalFeatures CachedBackend::EncodeGlobal(const std::string& image_ref) const {
  const auto clip = Array(image_ref + "/global_clip").row(0);
  const auto dino = Array(image_ref + "/global_dino").row(0);
  return {{Vec(clip.begin(), clip.end()), Branch::kGlobalClip},
          {Vec(dino.begin(), dino.end()), Branch::kGlobalDino}};
}

RegionSet CachedBackend::Detect(const std::string& image_ref) const {
  const Matrix& humans = Array(image_ref + "/humans");
  const Matrix& objects = Array(image_ref + "/objects");
  RegionSet rs;
  for (std::size_t i = 0; i < humans.rows(); ++i) {
    rs.human_boxes.push_back({humans(i, 0), humans(i, 1), humans(i, 2), humans(i, 3)});
    rs.human_scores.push_back(humans(i, 4));
  }
  for (std::size_t i = 0; i < objects.rows(); ++i) {
    rs.object_boxes.push_back({objects(i, 0), objects(i, 1), objects(i, 2), objects(i, 3)});
    rs.object_scores.push_back(objects(i, 4));
    rs.object_classes.push_back(static_cast<int>(objects(i, 5)));
  }
  rs.Validate();
  return rs;
}

std::vector<PairFeatures> CachedBackend::EncodeRegions(const std::string& image_ref,
                                                       const RegionSet& regions) const {
  regions.Validate();
  const RegionSet cached = Detect(image_ref);
  if (cached.human_boxes.size() != regions.human_boxes.size() ||
      cached.object_boxes.size() != regions.object_boxes.size()) {
    throw BackendError("region features are cached only for the exported detections");
  }
  for (std::size_t i = 0; i < regions.human_boxes.size(); ++i) {
    if (!SameBox(cached.human_boxes[i], regions.human_boxes[i])) {
      throw BackendError("region features are cached only for the exported detections");
    }
  }
  for (std::size_t i = 0; i < regions.object_boxes.size(); ++i) {
    if (!SameBox(cached.object_boxes[i], regions.object_boxes[i])) {
      throw BackendError("region features are cached only for the exported detections");
    }
  }
  const Matrix& u = Array(image_ref + "/union");
  const Matrix& h = Array(image_ref + "/human");
  const Matrix& o = Array(image_ref + "/object");
  const std::size_t n = regions.human_boxes.size() * regions.object_boxes.size();
  if (u.rows() != n || h.rows() != n || o.rows() != n) {
    throw BackendError("cached pair features do not match the detection count");
  }
  std::vector<PairFeatures> pairs;
  for (std::size_t i = 0, k = 0; i < regions.human_boxes.size(); ++i) {
    for (std::size_t j = 0; j < regions.object_boxes.size(); ++j, ++k) {
      PairFeatures pf;
      pf.human = static_cast<int>(i);
      pf.object = static_cast<int>(j);
      pf.union_feature = {Vec(u.row(k).begin(), u.row(k).end()), Branch::kUnion};
      pf.human_feature = {Vec(h.row(k).begin(), h.row(k).end()), Branch::kHuman};
      pf.object_feature = {Vec(o.row(k).begin(), o.row(k).end()), Branch::kObject};
      pairs.push_back(std::move(pf));
    }
  }
  return pairs;
}

PairFeatures CachedBackend::EncodeAnnotatedPair(const std::string& image_ref, const Box& human,
                                                const Box& object) const {
  const Matrix& gt = Array(image_ref + "/gt");
  for (std::size_t r = 0; r < gt.rows(); ++r) {
    const Box hb{gt(r, 0), gt(r, 1), gt(r, 2), gt(r, 3)};
    const Box ob{gt(r, 4), gt(r, 5), gt(r, 6), gt(r, 7)};
    if (!SameBox(hb, human) || !SameBox(ob, object)) continue;
    PairFeatures pf;
    const auto u = Array(image_ref + "/gt_union").row(r);
    const auto h = Array(image_ref + "/gt_human").row(r);
    const auto o = Array(image_ref + "/gt_object").row(r);
    pf.union_feature = {Vec(u.begin(), u.end()), Branch::kUnion};
    pf.human_feature = {Vec(h.begin(), h.end()), Branch::kHuman};
    pf.object_feature = {Vec(o.begin(), o.end()), Branch::kObject};
    return pf;
  }
  throw BackendError("annotated pair not in feature cache for " + image_ref);
}

std::vector<Scene> CachedBackend::Scenes(const std::string& list) const {
  std::vector<Scene> scenes;
  std::istringstream ids(archive_.Meta(list));
  std::string id;
  while (std::getline(ids, id, ',')) {
    if (id.empty()) continue;
    Scene s;
    s.id = id;
    const Matrix& gt = Array(id + "/gt");
    for (std::size_t r = 0; r < gt.rows(); ++r) {
      const Box hb{gt(r, 0), gt(r, 1), gt(r, 2), gt(r, 3)};
      const Box ob{gt(r, 4), gt(r, 5), gt(r, 6), gt(r, 7)};
      const int hoi = static_cast<int>(gt(r, 8));
      auto find_or_add = [](std::vector<Box>& boxes, const Box& b) {
        for (std::size_t i = 0; i < boxes.size(); ++i) {
          if (SameBox(boxes[i], b)) return static_cast<int>(i);
        }
        boxes.push_back(b);
        return static_cast<int>(boxes.size() - 1);
      };
      const int hi = find_or_add(s.humans, hb);
      const std::size_t before = s.objects.size();
      const int oi = find_or_add(s.objects, ob);
      if (s.objects.size() > before) s.object_classes.push_back(static_cast<int>(gt(r, 9)));
      bool merged = false;
      for (auto& it : s.interactions) {
        if (it.human == hi && it.object == oi) {
          it.hois.push_back(hoi);
          merged = true;
        }
      }
      if (!merged) s.interactions.push_back({hi, oi, {hoi}});
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::filesystem::path CacheRoot(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("HOIGEN_CACHE_DIR"); env && *env) return env;
  return fallback;
}

}  // namespace hoigen
