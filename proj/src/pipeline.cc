#include "hoigen/pipeline.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hoigen/archive.h"
#include "hoigen/error.h"
#include "hoigen/kvdoc.h"
#include "hoigen/rng.h"

namespace hoigen {

namespace {

template <typename F>
auto Stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(name, e.what());
  }
}

// Other HOIs that share `hoi`'s object, drawn from `pool`.
int CompanionHoi(const HoiTaxonomy& tax, const std::vector<int>& pool, int hoi, Rng& rng) {
  std::vector<int> options;
  for (int h : pool) {
    if (tax.hois[h].object == tax.hois[hoi].object) options.push_back(h);
  }
  return options[rng.Index(options.size())];
}

std::vector<Scene> SampleScenes(const SyntheticWorld& world, const std::vector<int>& pool,
                                const std::vector<std::pair<int, int>>& plan, double second_human,
                                const std::string& prefix, std::uint64_t seed) {
  const HoiTaxonomy& tax = world.taxonomy();
  Rng rng(seed);
  std::vector<Scene> scenes;
  for (const auto& [hoi, copies] : plan) {
    for (int i = 0; i < copies; ++i) {
      std::vector<std::vector<int>> humans = {{hoi}};
      if (rng.Uniform() < second_human) humans.push_back({CompanionHoi(tax, pool, hoi, rng)});
      const std::string id = prefix + std::to_string(scenes.size());
      scenes.push_back(world.MakeScene(id, tax.hois[hoi].object, humans, DeriveSeed(seed, id)));
    }
  }
  return scenes;
}

Matrix Concat3(const PairFeatures& pf) {
  const auto& u = pf.union_feature.values;
  Matrix x(1, u.size() * 3);
  std::copy(u.begin(), u.end(), x.data());
  std::copy(pf.human_feature.values.begin(), pf.human_feature.values.end(), x.data() + u.size());
  std::copy(pf.object_feature.values.begin(), pf.object_feature.values.end(), x.data() + 2 * u.size());
  return x;
}

void SaveHead(const std::filesystem::path& dir, const InteractionHead& head,
              const std::vector<double>& curve, const std::map<std::string, std::string>& meta) {
  Archive ar;
  ar.Put("w", head.w, "", ElementType::kFloat64);
  ar.Put("b", head.b, "", ElementType::kFloat64);
  ar.metadata() = meta;
  ar.metadata()["kind"] = "interaction_head";
  std::ostringstream c;
  for (std::size_t i = 0; i < curve.size(); ++i) c << (i ? "," : "") << FormatDouble(curve[i]);
  ar.metadata()["detector_loss"] = c.str();
  ar.Save(dir);
}

std::string JoinCurve(const std::vector<double>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << FormatDouble(v[i]);
  return s.str();
}

}  // namespace

std::vector<DetectedPair> DetectPairs(const Backend& backend, const Scene& scene) {
  const RegionSet rs = backend.Detect(scene.id);
  const auto feats = backend.EncodeRegions(scene.id, rs);
  std::vector<DetectedPair> out;
  out.reserve(feats.size());
  for (const auto& pf : feats) {
    DetectedPair dp;
    dp.image = scene.id;
    dp.human_box = rs.human_boxes[pf.human];
    dp.object_box = rs.object_boxes[pf.object];
    dp.human_score = rs.human_scores[pf.human];
    dp.object_score = rs.object_scores[pf.object];
    double best = kPairIouThreshold;
    for (const auto& it : scene.interactions) {
      const double q = std::min(Iou(dp.human_box, scene.humans[it.human]),
                                Iou(dp.object_box, scene.objects[it.object]));
      if (q >= best) {
        best = q;
        dp.labels = it.hois;
      }
    }
    dp.features = pf;
    out.push_back(std::move(dp));
  }
  return out;
}

Dataset BuildDataset(const RunConfig& cfg) {
  cfg.Validate();
  Dataset data;
  data.taxonomy = ResolveTaxonomy(cfg);
  const HoiTaxonomy& tax = data.taxonomy;
  data.split = BuildSplit(tax, ParseSetting(cfg.setting), cfg.unseen_count, cfg.split_seed);
  if (tax.has_counts()) data.rarity = PartitionByRarity(tax);

  if (cfg.backend == "synthetic") {
    if (!tax.has_counts()) throw ConfigError("the synthetic backend needs training instance counts");
    SyntheticWorldConfig wc = cfg.world;
    wc.dim = cfg.ResolvedDim();
    wc.seed = DeriveSeed(cfg.seed, "world");
    auto world = std::make_shared<const SyntheticWorld>(tax, wc);
    std::vector<std::pair<int, int>> train_plan, test_plan;
    for (int h : data.split.seen_hois) {
      train_plan.push_back({h, static_cast<int>(tax.train_instance_counts[h]) * cfg.train_scale});
    }
    std::vector<int> all(tax.num_hois());
    std::iota(all.begin(), all.end(), 0);
    for (int h : all) test_plan.push_back({h, cfg.test_per_class});
    data.train = SampleScenes(*world, data.split.seen_hois, train_plan, cfg.second_human, "train/",
                              DeriveSeed(cfg.seed, "train-scenes"));
    data.test = SampleScenes(*world, all, test_plan, cfg.second_human, "test/",
                             DeriveSeed(cfg.seed, "test-scenes"));
    auto backend = std::make_shared<SyntheticBackend>(world);
    backend->Register(data.train);
    backend->Register(data.test);
    data.world = world;
    data.backend = backend;
  } else {
    auto backend = std::make_shared<CachedBackend>(CacheRoot(cfg.cache_dir));
    if (cfg.dim > 0 && backend->dim() != cfg.dim) throw ConfigError("dim differs from the feature cache");
    data.test = backend->Scenes("test");
    for (Scene s : backend->Scenes("train")) {
      // Unseen annotations are removed from training images.
      std::vector<GtInteraction> kept;
      for (auto it : s.interactions) {
        std::erase_if(it.hois, [&](int h) { return !data.split.IsSeen(h); });
        if (!it.hois.empty()) kept.push_back(std::move(it));
      }
      s.interactions = std::move(kept);
      if (!s.interactions.empty()) data.train.push_back(std::move(s));
    }
    data.backend = backend;
  }
  if (data.train.empty()) throw EmptyDataset("no training images");
  for (const auto& s : data.train) data.train_pairs.push_back(DetectPairs(*data.backend, s));
  for (const auto& s : data.test) data.test_pairs.push_back(DetectPairs(*data.backend, s));
  return data;
}

FeatureSet CropTrainingSet(const Dataset& data) {
  const HoiTaxonomy& tax = data.taxonomy;
  FeatureSet set;
  for (const Scene& s : data.train) {
    for (const auto& it : s.interactions) {
      const PairFeatures pf =
          data.backend->EncodeAnnotatedPair(s.id, s.humans[it.human], s.objects[it.object]);
      for (int h : it.hois) {
        set.Add(pf.union_feature.values, PromptIndex(tax, Branch::kUnion, h));
        set.Add(pf.human_feature.values, PromptIndex(tax, Branch::kHuman, h));
        set.Add(pf.object_feature.values, PromptIndex(tax, Branch::kObject, h));
      }
    }
  }
  return set;
}

FeatureSet RoiTargetSet(const Dataset& data) {
  const HoiTaxonomy& tax = data.taxonomy;
  FeatureSet set;
  for (const auto& pairs : data.train_pairs) {
    for (const auto& dp : pairs) {
      for (int h : dp.labels) {
        set.Add(dp.features.union_feature.values, PromptIndex(tax, Branch::kUnion, h));
        set.Add(dp.features.human_feature.values, PromptIndex(tax, Branch::kHuman, h));
        set.Add(dp.features.object_feature.values, PromptIndex(tax, Branch::kObject, h));
      }
    }
  }
  return set;
}

TrainConfig Stage1Schedule(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.epochs = cfg.stage1_epochs;
  t.batch = cfg.stage1_batch;
  t.seed = DeriveSeed(cfg.seed, "stage1");
  t.token_lr_scale = cfg.token_lr_scale;
  return t;
}

TrainConfig Stage2Schedule(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.epochs = cfg.stage2_epochs;
  t.batch = cfg.stage2_batch;
  t.cosine = cfg.stage2_cosine;
  t.seed = DeriveSeed(cfg.seed, "stage2");
  return t;
}

GeneratorArtifacts TrainGenerator(const Dataset& data, const RunConfig& cfg) {
  GeneratorArtifacts g;
  g.params = Stage("stage1", [&] {
    const FeatureSet crops = CropTrainingSet(data);
    CvaeParams init = InitCvae(data.taxonomy, *data.backend, cfg.shared_vae, DeriveSeed(cfg.seed, "cvae"));
    return TrainStage1(crops, std::move(init), Stage1Schedule(cfg), &g.stage1);
  });
  g.hash_before_stage2 = g.params.Hash();
  g.aligner = Stage("stage2", [&] {
    return TrainStage2(RoiTargetSet(data), g.params, Stage2Schedule(cfg), &g.stage2);
  });
  g.hash_after_stage2 = g.params.Hash();
  return g;
}

FeaturePools SynthesizePools(const HoiTaxonomy& tax, const CvaeParams& params,
                             const nn::Mlp& aligner, int k, std::uint64_t seed) {
  FeaturePools pools;
  for (Branch b : kRegionBranches) {
    auto& per_hoi = pools[b];
    for (int h = 0; h < tax.num_hois(); ++h) {
      Rng rng(DeriveSeed(seed, "synth/" + BranchName(b) + "/" + std::to_string(h)));
      per_hoi.push_back(Synthesize(tax, params, &aligner, b, h, k, rng));
    }
  }
  return pools;
}

FeaturePools RealisticPools(int num_classes,
                            const std::vector<std::vector<DetectedPair>>& train_pairs) {
  FeaturePools pools;
  for (Branch b : kRegionBranches) pools[b].resize(num_classes);
  for (const auto& pairs : train_pairs) {
    for (const auto& dp : pairs) {
      for (int h : dp.labels) {
        const FeatureVec* f[] = {&dp.features.union_feature, &dp.features.human_feature,
                                 &dp.features.object_feature};
        for (int i = 0; i < 3; ++i) {
          Matrix& m = pools[kRegionBranches[i]][h];
          if (m.empty()) m = Matrix(0, f[i]->values.size());
          m.AppendRow(f[i]->values);
        }
      }
    }
  }
  return pools;
}

std::vector<GroundTruthRecord> GroundTruthRecords(const std::vector<Scene>& scenes) {
  std::vector<GroundTruthRecord> out;
  for (const Scene& s : scenes) {
    for (const auto& it : s.interactions) {
      for (int h : it.hois) out.push_back({s.id, s.humans[it.human], s.objects[it.object], h});
    }
  }
  return out;
}

BankSet BuildBanks(const Dataset& data, const FeaturePools* generated, const RunConfig& cfg) {
  BankSet banks;
  const int c = data.taxonomy.num_hois();
  const FeaturePools realistic = RealisticPools(c, data.train_pairs);
  banks.region = BuildGenerativeBanks(generated, &realistic, data.split, cfg.n_size,
                                      cfg.ResolvedConstruction(), DeriveSeed(cfg.seed, "banks"));
  banks.knowledge = BuildMultiKnowledgeBanks(data.train, *data.backend, c);
  banks.text = BuildTextPrototypes(data.taxonomy, *data.backend);
  return banks;
}

RunResult RunDownstream(const Dataset& data, const GeneratorArtifacts* generator,
                        const RunConfig& cfg) {
  const HoiTaxonomy& tax = data.taxonomy;
  const int c = tax.num_hois();
  const int d = data.backend->dim();
  const bool generate = cfg.generation;
  if (generate && !generator) throw StageFailure("synthesis", "generation enabled without a generator");
  RunResult res;

  FeaturePools generated;
  if (generate) {
    generated = Stage("synthesis", [&] {
      return SynthesizePools(tax, generator->params, generator->aligner, cfg.k,
                             DeriveSeed(cfg.seed, "synthesis"));
    });
  }
  res.banks = Stage("banks", [&] { return BuildBanks(data, generate ? &generated : nullptr, cfg); });

  auto fused = [&](const Scene& scene, const std::vector<DetectedPair>& pairs, Matrix* x) {
    Matrix u(0, d), h(0, d), o(0, d);
    *x = Matrix(0, 3 * d);
    for (const auto& dp : pairs) {
      u.AppendRow(dp.features.union_feature.values);
      h.AppendRow(dp.features.human_feature.values);
      o.AppendRow(dp.features.object_feature.values);
      x->AppendRow(Concat3(dp.features).values());
    }
    Matrix s = PairwiseScores(u, h, o, res.banks.region, res.banks.text, cfg.lambdas);
    const GlobalFeatures g = data.backend->EncodeGlobal(scene.id);
    const ScoreVector si = ImagewiseScore(g.clip.values, g.dino.values, res.banks.knowledge, cfg.lambdas);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (int k = 0; k < c; ++k) s(r, k) = cfg.logit_scale * (s(r, k) + si.logits[k]);
    }
    return s;
  };

  res.head = InteractionHead(c, d);
  Stage("detector", [&] {
    Matrix real_x(0, 3 * d), real_base(0, c), real_y(0, c);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
      const auto& pairs = data.train_pairs[i];
      if (pairs.empty()) continue;
      Matrix x;
      const Matrix base = fused(data.train[i], pairs, &x);
      for (std::size_t r = 0; r < pairs.size(); ++r) {
        real_x.AppendRow(x.row(r));
        real_base.AppendRow(base.row(r));
        real_y.AppendRow(MultiHot(pairs[r].labels, c));
      }
    }
    const bool mix = generate && cfg.n_bs > 0;
    Matrix syn_x(0, 3 * d), syn_base;
    if (mix) {
      const auto& pu = generated.at(Branch::kUnion);
      const auto& ph = generated.at(Branch::kHuman);
      const auto& po = generated.at(Branch::kObject);
      for (int hoi = 0; hoi < c; ++hoi) {
        for (int r = 0; r < cfg.k; ++r) {
          Matrix row(1, 3 * d);
          std::copy(pu[hoi].row(r).begin(), pu[hoi].row(r).end(), row.data());
          std::copy(ph[hoi].row(r).begin(), ph[hoi].row(r).end(), row.data() + d);
          std::copy(po[hoi].row(r).begin(), po[hoi].row(r).end(), row.data() + 2 * d);
          syn_x.AppendRow(row.row(0));
        }
      }
      Matrix u(0, d), h(0, d), o(0, d);
      for (std::size_t r = 0; r < syn_x.rows(); ++r) {
        u.AppendRow(syn_x.row(r).subspan(0, d));
        h.AppendRow(syn_x.row(r).subspan(d, d));
        o.AppendRow(syn_x.row(r).subspan(2 * d, d));
      }
      syn_base = PairwiseScores(u, h, o, res.banks.region, res.banks.text, cfg.lambdas);
      for (double& v : syn_base.values()) v *= cfg.logit_scale;
    }

    nn::AdamW opt({cfg.detector_lr, 0.9, 0.999, 1e-8, 1e-2});
    Rng rng(DeriveSeed(cfg.seed, "detector"));
    std::vector<std::size_t> order(real_x.rows());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.detector_epochs; ++epoch) {
      rng.Shuffle(order);
      double epoch_loss = 0;
      std::size_t seen_rows = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.detector_batch) {
        const std::size_t end = std::min(order.size(), start + cfg.detector_batch);
        Matrix x(0, 3 * d), base(0, c), y(0, c);
        for (std::size_t i = start; i < end; ++i) {
          x.AppendRow(real_x.row(order[i]));
          base.AppendRow(real_base.row(order[i]));
          y.AppendRow(real_y.row(order[i]));
        }
        if (mix) {
          for (std::size_t i = 0; i < (end - start) * cfg.n_bs; ++i) {
            const std::size_t hoi = rng.Index(c);
            const std::size_t row = hoi * cfg.k + rng.Index(cfg.k);
            x.AppendRow(syn_x.row(row));
            base.AppendRow(syn_base.row(row));
            y.AppendRow(MultiHot({static_cast<int>(hoi)}, c));
          }
        }
        const Matrix logits = res.head.Logits(x);
        Matrix dl(x.rows(), c);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          Vec z(c);
          for (int k = 0; k < c; ++k) z[k] = base(r, k) + logits(r, k);
          epoch_loss += TotalLoss(z, y.row(r));
          const Vec g = TotalLossGrad(z, y.row(r));
          for (int k = 0; k < c; ++k) dl(r, k) = g[k] / x.rows();
        }
        seen_rows += x.rows();
        InteractionHead grads(c, d);
        res.head.Backward(x, dl, &grads);
        opt.Step(res.head.Params(), std::as_const(grads).Params());
      }
      res.head_curve.push_back(seen_rows ? epoch_loss / seen_rows : 0.0);
    }
    return 0;
  });

  Stage("evaluate", [&] {
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      const auto& pairs = data.test_pairs[i];
      if (pairs.empty()) continue;
      Matrix x;
      const Matrix base = fused(data.test[i], pairs, &x);
      const Matrix head = res.head.Logits(x);
      for (std::size_t r = 0; r < pairs.size(); ++r) {
        Vec z(c);
        for (int k = 0; k < c; ++k) z[k] = base(r, k) + head(r, k);
        const Vec scores = DetectionScores(pairs[r].human_score, pairs[r].object_score, z);
        for (int k = 0; k < c; ++k) {
          res.detections.push_back({pairs[r].image, pairs[r].human_box, pairs[r].object_box, k, scores[k]});
        }
      }
    }
    res.ground_truth = GroundTruthRecords(data.test);
    res.report = ComputeMapReport(res.detections, res.ground_truth, c, &data.split,
                                  data.rarity ? &*data.rarity : nullptr);
    res.report.config = ConfigMetadata(cfg);
    return 0;
  });
  return res;
}

std::map<std::string, std::string> ConfigMetadata(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  const KvDoc doc = cfg.ToKvDoc();
  for (const auto& [k, v] : doc.entries()) m[k] = v;
  return m;
}

RunResult TrainAndEval(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                       std::vector<std::filesystem::path>* written) {
  cfg.Validate();
  const Dataset data = Stage("dataset", [&] { return BuildDataset(cfg); });
  std::optional<GeneratorArtifacts> gen;
  if (cfg.generation) gen = TrainGenerator(data, cfg);
  RunResult res = RunDownstream(data, gen ? &*gen : nullptr, cfg);
  if (!out_dir) return res;

  Stage("write", [&] {
    namespace fs = std::filesystem;
    fs::create_directories(*out_dir);
    auto note = [&](const fs::path& p) {
      if (written) written->push_back(p);
    };
    const auto meta = ConfigMetadata(cfg);
    cfg.ToKvDoc().Save(*out_dir / "config.txt");
    note(*out_dir / "config.txt");
    SaveSplit(data.split, *out_dir / "split.txt");
    note(*out_dir / "split.txt");
    if (gen) {
      auto gmeta = meta;
      gmeta["stage1_loss"] = JoinCurve(gen->stage1.loss);
      gmeta["stage2_loss"] = JoinCurve(gen->stage2.loss);
      gmeta["stage1_epochs_run"] = std::to_string(gen->stage1.loss.size());
      gmeta["stage2_epochs_run"] = std::to_string(gen->stage2.loss.size());
      SaveGenerator(*out_dir / "generator", gen->params, &gen->aligner, gmeta);
      note(*out_dir / "generator");
    }
    SaveBanks(*out_dir / "banks", res.banks, meta);
    note(*out_dir / "banks");
    SaveHead(*out_dir / "head", res.head, res.head_curve, meta);
    note(*out_dir / "head");
    std::vector<std::string> header;
    for (const auto& [k, v] : meta) header.push_back("config " + k + "=" + v);
    WriteDetections(*out_dir / "detections.txt", res.detections, header);
    note(*out_dir / "detections.txt");
    WriteGroundTruth(*out_dir / "ground_truth.txt", res.ground_truth, header);
    note(*out_dir / "ground_truth.txt");
    std::ofstream(*out_dir / "report.txt") << FormatReportText(res.report);
    note(*out_dir / "report.txt");
    std::ofstream(*out_dir / "report.json") << FormatReportJson(res.report);
    note(*out_dir / "report.json");
    return 0;
  });
  return res;
}

std::vector<AblationRow> Ablate(const RunConfig& base, const std::string& axis,
                                const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> values;
  std::string key;
  if (axis == "n_bs" || axis == "N_bs") {
    key = "n_bs";
    values = {"1", "2", "3", "4"};
  } else if (axis == "construction") {
    key = "construction";
    values = {"R", "R_plus_G", "R_concat_G", "G"};
  } else if (axis == "n_size" || axis == "N_size") {
    key = "n_size";
    values = {"1", "2", "3", "4"};
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (n_bs, construction, n_size)");
  }
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  base.Validate();
  std::vector<AblationRow> rows(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) rows[v].value = values[v];
  for (std::uint64_t seed : seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.generation = true;
    const Dataset data = Stage("dataset", [&] { return BuildDataset(cfg); });
    const GeneratorArtifacts gen = TrainGenerator(data, cfg);
    for (std::size_t v = 0; v < values.size(); ++v) {
      RunConfig run = cfg;
      run.Set(key, values[v]);
      const RunResult r = RunDownstream(data, &gen, run);
      rows[v].full += r.report.full.value_or(0) / seeds.size();
      rows[v].seen += r.report.seen.value_or(0) / seeds.size();
      rows[v].unseen += r.report.unseen.value_or(0) / seeds.size();
      rows[v].seen_per_seed.push_back(r.report.seen.value_or(0));
      rows[v].unseen_per_seed.push_back(r.report.unseen.value_or(0));
    }
  }
  return rows;
}

std::string FormatAblation(const std::string& axis, const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << axis << "\tfull\tseen\tunseen\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "\t%.2f\t%.2f\t%.2f\n", 100 * r.full, 100 * r.seen, 100 * r.unseen);
    out << r.value << buf;
  }
  return out.str();
}

}  // namespace hoigen
