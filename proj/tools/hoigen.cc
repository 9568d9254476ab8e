#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hoigen/archive.h"
#include "hoigen/config.h"
#include "hoigen/diagnose.h"
#include "hoigen/error.h"
#include "hoigen/evalmap.h"
#include "hoigen/generator.h"
#include "hoigen/hico.h"
#include "hoigen/kvdoc.h"
#include "hoigen/pipeline.h"
#include "hoigen/rng.h"
#include "hoigen/taxonomy.h"

namespace fs = std::filesystem;
using namespace hoigen;

namespace {

constexpr int kUsageExit = 2;
constexpr int kFailureExit = 3;

// Config layers: defaults <- --config file <- --set k=v <- dedicated flags.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::string> seed, backend, dim, cache_dir, taxonomy, setting, unseen, split_seed;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key-value config file");
    cmd->add_option("--set", sets, "override: key=value (repeatable)");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--backend", backend, "synthetic | pretrained");
    cmd->add_option("--dim", dim, "feature dimension D");
    cmd->add_option("--cache-dir", cache_dir, "pretrained feature cache");
    cmd->add_option("--taxonomy", taxonomy, "taxonomy file");
    cmd->add_option("--setting", setting, "UC | RF_UC | NF_UC | UV | UO");
    cmd->add_option("--unseen", unseen, "unseen HOIs (objects for UO, verbs for UV)");
    cmd->add_option("--split-seed", split_seed, "split seed");
  }

  RunConfig Resolve() const {
    RunConfig cfg = file.empty() ? RunConfig{} : LoadRunConfig(file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.Set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const std::pair<const char*, const std::optional<std::string>*> flags[] = {
        {"seed", &seed},         {"backend", &backend}, {"dim", &dim},
        {"cache_dir", &cache_dir}, {"taxonomy", &taxonomy}, {"setting", &setting},
        {"unseen_count", &unseen}, {"split_seed", &split_seed},
    };
    for (const auto& [key, value] : flags) {
      if (*value) cfg.Set(key, **value);
    }
    return cfg;
  }
};

void PrintArtifacts(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<double> ParseCurve(const std::string& text) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::map<std::string, std::string> CheckpointMeta(const RunConfig& cfg, const GeneratorArtifacts& g) {
  auto meta = ConfigMetadata(cfg);
  if (!g.stage1.loss.empty()) {
    std::ostringstream s;
    for (std::size_t i = 0; i < g.stage1.loss.size(); ++i) {
      s << (i ? "," : "") << FormatDouble(g.stage1.loss[i]);
    }
    meta["stage1_loss"] = s.str();
  }
  if (!g.stage2.loss.empty()) {
    std::ostringstream s;
    for (std::size_t i = 0; i < g.stage2.loss.size(); ++i) {
      s << (i ? "," : "") << FormatDouble(g.stage2.loss[i]);
    }
    meta["stage2_loss"] = s.str();
  }
  return meta;
}

int CmdBuildSplits(const ConfigArgs& args, const std::vector<std::string>& settings,
                   const std::string& out_dir) {
  RunConfig cfg = args.Resolve();
  if (cfg.unseen_count < 0) throw ConfigError("--unseen is required");
  const HoiTaxonomy tax = ResolveTaxonomy(cfg);
  std::vector<SplitSetting> wanted;
  for (const auto& s : settings) {
    if (s == "all") {
      wanted = AllSettings();
      break;
    }
    wanted.push_back(ParseSetting(s));
  }
  if (wanted.empty()) wanted.push_back(ParseSetting(cfg.setting));
  std::vector<fs::path> written;
  int violations = 0;
  for (SplitSetting s : wanted) {
    const ZeroShotSplit split = BuildSplit(tax, s, cfg.unseen_count, cfg.split_seed);
    const auto problems = CheckSplit(tax, split);
    std::cout << SettingName(s) << ": seen " << split.seen_hois.size() << ", unseen "
              << split.unseen_hois.size() << ", invariants "
              << (problems.empty() ? "ok" : "VIOLATED") << "\n";
    for (const auto& p : problems) std::cout << "  " << p << "\n";
    violations += static_cast<int>(problems.size());
    fs::create_directories(out_dir);
    const fs::path path = fs::path(out_dir) / ("split_" + SettingName(s) + ".txt");
    SaveSplit(split, path);
    written.push_back(path);
  }
  PrintArtifacts(written);
  return violations ? kFailureExit : 0;
}

int CmdTrainGenerator(const ConfigArgs& args, int stage, const std::string& out_dir) {
  const RunConfig cfg = args.Resolve();
  cfg.Validate();
  const fs::path dir = fs::path(out_dir) / "generator";
  const Dataset data = BuildDataset(cfg);
  GeneratorArtifacts g;
  if (stage == 1) {
    const FeatureSet crops = CropTrainingSet(data);
    CvaeParams init = InitCvae(data.taxonomy, *data.backend, cfg.shared_vae, DeriveSeed(cfg.seed, "cvae"));
    try {
      g.params = TrainStage1(crops, std::move(init), Stage1Schedule(cfg), &g.stage1);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageFailure("stage1", e.what());
    }
    auto meta = CheckpointMeta(cfg, g);
    meta["stage"] = "1";
    SaveGenerator(dir, g.params, nullptr, meta);
    std::printf("stage 1: loss %.6g -> %.6g over %zu epochs\n", g.stage1.loss.front(),
                g.stage1.loss.back(), g.stage1.loss.size());
  } else {
    if (!fs::exists(dir)) throw ConfigError("no stage-1 checkpoint at " + dir.string());
    GeneratorCheckpoint ck = LoadGenerator(dir);
    g.params = std::move(ck.params);
    g.stage1.loss = ParseCurve(ck.metadata.count("stage1_loss") ? ck.metadata.at("stage1_loss") : "");
    const std::uint64_t before = g.params.Hash();
    try {
      g.aligner = TrainStage2(RoiTargetSet(data), g.params, Stage2Schedule(cfg), &g.stage2);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageFailure("stage2", e.what());
    }
    if (g.params.Hash() != before) throw StageFailure("stage2", "frozen generator parameters changed");
    auto meta = CheckpointMeta(cfg, g);
    meta["stage"] = "2";
    SaveGenerator(dir, g.params, &g.aligner, meta);
    std::printf("stage 2: mse %.6g -> %.6g over %zu epochs, frozen hash %016llx\n",
                g.stage2.loss.front(), g.stage2.loss.back(), g.stage2.loss.size(),
                static_cast<unsigned long long>(before));
  }
  PrintArtifacts({dir});
  return 0;
}

int CmdBuildBanks(const ConfigArgs& args, const std::string& out_dir, const std::string& generator) {
  const RunConfig cfg = args.Resolve();
  cfg.Validate();
  const Dataset data = BuildDataset(cfg);
  std::optional<FeaturePools> generated;
  if (cfg.generation) {
    const fs::path dir = generator.empty() ? fs::path(out_dir) / "generator" : fs::path(generator);
    if (!fs::exists(dir)) throw ConfigError("no generator checkpoint at " + dir.string());
    const GeneratorCheckpoint ck = LoadGenerator(dir);
    if (!ck.has_aligner) throw ConfigError("checkpoint lacks the stage-2 aligner: " + dir.string());
    generated = SynthesizePools(data.taxonomy, ck.params, ck.aligner, cfg.k,
                                DeriveSeed(cfg.seed, "synthesis"));
  }
  BankSet banks;
  try {
    banks = BuildBanks(data, generated ? &*generated : nullptr, cfg);
  } catch (const std::exception& e) {
    throw StageFailure("banks", e.what());
  }
  const fs::path dir = fs::path(out_dir) / "banks";
  SaveBanks(dir, banks, ConfigMetadata(cfg));
  for (const auto& [branch, bank] : banks.region) {
    std::cout << BranchName(branch) << " bank: " << bank.size() << " rows\n";
  }
  PrintArtifacts({dir});
  return 0;
}

int CmdTrainAndEval(const ConfigArgs& args, const std::string& out_dir, bool no_generation,
                    const std::string& format) {
  RunConfig cfg = args.Resolve();
  if (no_generation) cfg.generation = false;
  std::vector<fs::path> written;
  const RunResult res = TrainAndEval(cfg, fs::path(out_dir), &written);
  std::cout << (format == "json" ? FormatReportJson(res.report) : FormatReportText(res.report));
  PrintArtifacts(written);
  return 0;
}

int CmdEvaluate(const ConfigArgs& args, const std::string& detections, const std::string& ground_truth,
                const std::string& split_path, const std::string& format, const std::string& out) {
  const RunConfig cfg = args.Resolve();
  const HoiTaxonomy tax = ResolveTaxonomy(cfg);
  std::optional<ZeroShotSplit> split;
  if (!split_path.empty()) split = LoadSplit(tax, split_path);
  std::optional<RarityPartition> rarity;
  if (tax.has_counts()) rarity = PartitionByRarity(tax);
  MapReport report = ComputeMapReport(ReadDetections(detections), ReadGroundTruth(ground_truth),
                                      tax.num_hois(), split ? &*split : nullptr,
                                      rarity ? &*rarity : nullptr);
  report.config = {{"detections", detections}, {"ground_truth", ground_truth}};
  if (split) report.config["split"] = split_path;
  const std::string text = format == "json" ? FormatReportJson(report) : FormatReportText(report);
  std::cout << text;
  if (!out.empty()) {
    WriteFile(out, text);
    PrintArtifacts({out});
  }
  return 0;
}

std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("bad seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

int CmdAblate(const ConfigArgs& args, const std::string& axis, const std::string& seeds,
              const std::string& out) {
  const RunConfig cfg = args.Resolve();
  const auto rows = Ablate(cfg, axis, ParseSeeds(seeds));
  const std::string table = FormatAblation(axis, rows);
  std::cout << table;
  if (!out.empty()) {
    std::string doc;
    for (const auto& [k, v] : ConfigMetadata(cfg)) doc += "# config " + k + "=" + v + "\n";
    doc += "# seeds " + seeds + "\n" + table;
    WriteFile(out, doc);
    PrintArtifacts({out});
  }
  return 0;
}

int CmdDiagnose(const std::string& run, int categories, const std::string& out_dir) {
  const fs::path run_dir(run);
  const fs::path gen_dir = run_dir / "generator";
  if (!fs::exists(gen_dir)) throw ConfigError("no generator checkpoint at " + gen_dir.string());
  if (!fs::exists(run_dir / "config.txt")) throw ConfigError("no config.txt in " + run);
  const GeneratorCheckpoint ck = LoadGenerator(gen_dir);
  if (!ck.has_aligner) throw ConfigError("checkpoint lacks the stage-2 aligner: " + gen_dir.string());
  const RunConfig cfg = LoadRunConfig(run_dir / "config.txt");
  const Dataset data = BuildDataset(cfg);
  const HoiTaxonomy& tax = data.taxonomy;

  // Unseen categories are plotted first.
  std::vector<int> picked = data.split.unseen_hois;
  picked.insert(picked.end(), data.split.seen_hois.begin(), data.split.seen_hois.end());
  if (categories < 1) throw ConfigError("--categories must be >= 1");
  if (static_cast<int>(picked.size()) > categories) picked.resize(categories);
  std::vector<std::string> legend;
  for (int h : picked) legend.push_back(tax.HoiName(h) + (data.split.IsSeen(h) ? "" : " (unseen)"));

  const FeaturePools real = RealisticPools(tax.num_hois(), data.test_pairs);
  const fs::path out = out_dir.empty() ? run_dir / "diagnose" : fs::path(out_dir);
  std::vector<fs::path> written;
  const int per_category = std::max(1, std::min(cfg.k, 100));
  for (Branch b : kRegionBranches) {
    Matrix all(0, ck.params.dim);
    std::vector<ScatterPoint> points;
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const int h = picked[i];
      const Matrix& r = real.at(b)[h];
      for (std::size_t row = 0; row < r.rows(); ++row) {
        all.AppendRow(r.row(row));
        points.push_back({0, 0, static_cast<int>(i), false});
      }
      Rng rng(DeriveSeed(cfg.seed, "diagnose/" + BranchName(b) + "/" + std::to_string(h)));
      const Matrix s = Synthesize(tax, ck.params, &ck.aligner, b, h, per_category, rng);
      for (std::size_t row = 0; row < s.rows(); ++row) {
        all.AppendRow(s.row(row));
        points.push_back({0, 0, static_cast<int>(i), true});
      }
    }
    const Matrix proj = PcaProject(all, 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
      points[i].x = proj(i, 0);
      points[i].y = proj(i, 1);
    }
    const fs::path path = out / ("scatter_" + BranchName(b) + ".svg");
    WriteFile(path, ScatterSvg(BranchName(b) + " features (PCA)", points, legend));
    written.push_back(path);
  }

  std::vector<std::pair<std::string, std::vector<double>>> gen_curves;
  for (const char* key : {"stage1_loss", "stage2_loss"}) {
    auto it = ck.metadata.find(key);
    if (it != ck.metadata.end()) gen_curves.push_back({key, ParseCurve(it->second)});
  }
  const fs::path gen_path = out / "generator_loss.svg";
  WriteFile(gen_path, CurveSvg("generator training", gen_curves));
  written.push_back(gen_path);
  if (fs::exists(run_dir / "head")) {
    const Archive head = Archive::Load(run_dir / "head");
    const fs::path head_path = out / "detector_loss.svg";
    WriteFile(head_path, CurveSvg("detector phase", {{"detector_loss", ParseCurve(head.Meta("detector_loss"))}}));
    written.push_back(head_path);
  }
  PrintArtifacts(written);
  return 0;
}

int CmdImportHico(const std::string& base, const std::string& annotations, const std::string& out) {
  const HoiTaxonomy tax = ImportHicoCounts(LoadTaxonomy(base), annotations);
  SaveTaxonomy(tax, out);
  const RarityPartition rarity = PartitionByRarity(tax);
  std::cout << "rare " << rarity.rare.size() << ", non-rare " << rarity.nonrare.size() << "\n";
  PrintArtifacts({out});
  return 0;
}

template <typename F>
int Guard(F&& f) {
  try {
    return f();
  } catch (const StageFailure& e) {
    std::cerr << "error: stage '" << e.stage() << "' failed: " << e.what() << "\n";
    return kFailureExit;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const InfeasibleSplit& e) {
    std::cerr << "infeasible split: " << e.what() << "\n";
    return kUsageExit;
  } catch (const MissingCounts& e) {
    std::cerr << "missing counts: " << e.what() << "\n";
    return kUsageExit;
  } catch (const UnknownCategory& e) {
    std::cerr << "unknown category: " << e.what() << "\n";
    return kUsageExit;
  } catch (const MissingCategory& e) {
    std::cerr << "unknown category: " << e.what() << "\n";
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailureExit;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot HOI detection with generated interaction features"};
  app.require_subcommand(1);

  ConfigArgs splits_cfg, gen_cfg, banks_cfg, run_cfg, eval_cfg, ablate_cfg;
  std::vector<std::string> settings;
  std::string out_dir = "runs/latest", generator, detections, ground_truth, split_path;
  std::string format = "text", out_file, axis, seeds = "1,2,3", run_dir, annotations, base_taxonomy;
  int stage = 1, categories = 6;
  bool no_generation = false;

  auto* splits = app.add_subcommand("build-splits", "construct zero-shot splits");
  splits_cfg.Attach(splits);
  splits->add_option("--settings", settings, "settings to build, or 'all'")->delimiter(',');
  splits->add_option("--out", out_dir, "output directory");

  auto* train_gen = app.add_subcommand("train-generator", "train one generator stage");
  gen_cfg.Attach(train_gen);
  train_gen->add_option("--stage", stage, "1 (CVAE) or 2 (aligner)")->check(CLI::IsMember({1, 2}));
  train_gen->add_option("--out", out_dir, "run directory");

  auto* build_banks = app.add_subcommand("build-banks", "synthesize features and build banks");
  banks_cfg.Attach(build_banks);
  build_banks->add_option("--out", out_dir, "run directory");
  build_banks->add_option("--generator", generator, "generator checkpoint (default: <out>/generator)");

  auto* train_eval = app.add_subcommand("train-and-eval", "full pipeline run");
  run_cfg.Attach(train_eval);
  train_eval->add_option("--out", out_dir, "run directory");
  train_eval->add_flag("--no-generation", no_generation, "baseline without feature generation");
  train_eval->add_option("--format", format, "report format")->check(CLI::IsMember({"text", "json"}));

  auto* evaluate = app.add_subcommand("evaluate", "mAP report from score and GT files");
  eval_cfg.Attach(evaluate);
  evaluate->add_option("--detections", detections, "detection records")->required();
  evaluate->add_option("--ground-truth", ground_truth, "ground-truth records")->required();
  evaluate->add_option("--split", split_path, "split file for seen/unseen aggregates");
  evaluate->add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));
  evaluate->add_option("--report", out_file, "also write the report here");

  auto* ablate = app.add_subcommand("ablate", "sweep one ablation axis");
  ablate_cfg.Attach(ablate);
  ablate->add_option("--axis", axis, "n_bs | construction | n_size")->required();
  ablate->add_option("--seeds", seeds, "comma-separated seeds");
  ablate->add_option("--table", out_file, "also write the table here");

  auto* diagnose = app.add_subcommand("diagnose", "feature projections and loss curves");
  diagnose->add_option("--run", run_dir, "run directory from train-and-eval")->required();
  diagnose->add_option("--categories", categories, "categories to plot");
  diagnose->add_option("--out", out_file, "plot directory (default: <run>/diagnose)");

  auto* import = app.add_subcommand("import-hico", "fill training counts from HICO-DET annotations");
  import->add_option("--annotations", annotations, "training annotation JSON")->required();
  import->add_option("--base", base_taxonomy, "taxonomy file without counts")->required();
  import->add_option("--out", out_file, "output taxonomy file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  if (splits->parsed()) return Guard([&] { return CmdBuildSplits(splits_cfg, settings, out_dir); });
  if (train_gen->parsed()) return Guard([&] { return CmdTrainGenerator(gen_cfg, stage, out_dir); });
  if (build_banks->parsed()) return Guard([&] { return CmdBuildBanks(banks_cfg, out_dir, generator); });
  if (train_eval->parsed()) {
    return Guard([&] { return CmdTrainAndEval(run_cfg, out_dir, no_generation, format); });
  }
  if (evaluate->parsed()) {
    return Guard([&] {
      return CmdEvaluate(eval_cfg, detections, ground_truth, split_path, format, out_file);
    });
  }
  if (ablate->parsed()) return Guard([&] { return CmdAblate(ablate_cfg, axis, seeds, out_file); });
  if (diagnose->parsed()) return Guard([&] { return CmdDiagnose(run_dir, categories, out_file); });
  if (import->parsed()) {
    return Guard([&] { return CmdImportHico(base_taxonomy, annotations, out_file); });
  }
  return kUsageExit;
}
