#include "hoigen/config.h"

#include <charconv>
#include <functional>
#include <map>

#include "hoigen/error.h"

namespace hoigen {

namespace {

constexpr char kSyntheticTaxonomy[] = R"(#objects
horse
bicycle
dog
#verbs
hold
ride
feed
wash
#hois
1 0 60
0 1 52
2 2 46
3 0 40
0 0 34
1 1 30
3 2 26
2 0 22
0 2 18
3 1 14
1 2 9
2 1 7
)";

double ToDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

long long ToInt(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t ToSeed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field NumField(T RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) {
              c.*m = ToDouble(k, v);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
              c.*m = ToSeed(k, v);
            } else {
              c.*m = static_cast<T>(ToInt(k, v));
            }
          },
          [m](const RunConfig& c) {
            if constexpr (std::is_same_v<T, double>) {
              return FormatDouble(c.*m);
            } else {
              return std::to_string(c.*m);
            }
          }};
}

Field StrField(std::string RunConfig::*m) {
  return {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
          [m](const RunConfig& c) { return c.*m; }};
}

Field BoolField(bool RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = ToBool(k, v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "1" : "0"); }};
}

template <typename S, typename T>
Field Nested(S RunConfig::*outer, T S::*inner) {
  return {[outer, inner](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) {
              c.*outer.*inner = ToDouble(k, v);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
              c.*outer.*inner = ToSeed(k, v);
            } else {
              c.*outer.*inner = static_cast<T>(ToInt(k, v));
            }
          },
          [outer, inner](const RunConfig& c) {
            if constexpr (std::is_same_v<T, double>) {
              return FormatDouble(c.*outer.*inner);
            } else {
              return std::to_string(c.*outer.*inner);
            }
          }};
}

const std::vector<std::pair<std::string, Field>>& Fields() {
  static const auto* fields = new std::vector<std::pair<std::string, Field>>{
      {"backend", StrField(&RunConfig::backend)},
      {"seed", NumField(&RunConfig::seed)},
      {"dim", NumField(&RunConfig::dim)},
      {"taxonomy", StrField(&RunConfig::taxonomy)},
      {"cache_dir", StrField(&RunConfig::cache_dir)},
      {"setting", StrField(&RunConfig::setting)},
      {"unseen_count", NumField(&RunConfig::unseen_count)},
      {"split_seed", NumField(&RunConfig::split_seed)},
      {"lr", NumField(&RunConfig::lr)},
      {"stage1_epochs", NumField(&RunConfig::stage1_epochs)},
      {"stage1_batch", NumField(&RunConfig::stage1_batch)},
      {"stage2_epochs", NumField(&RunConfig::stage2_epochs)},
      {"stage2_batch", NumField(&RunConfig::stage2_batch)},
      {"stage2_cosine", BoolField(&RunConfig::stage2_cosine)},
      {"shared_vae", BoolField(&RunConfig::shared_vae)},
      {"token_lr_scale", NumField(&RunConfig::token_lr_scale)},
      {"generation", BoolField(&RunConfig::generation)},
      {"k", NumField(&RunConfig::k)},
      {"n_size", NumField(&RunConfig::n_size)},
      {"construction", StrField(&RunConfig::construction)},
      {"n_bs", NumField(&RunConfig::n_bs)},
      {"detector_epochs", NumField(&RunConfig::detector_epochs)},
      {"detector_batch", NumField(&RunConfig::detector_batch)},
      {"detector_lr", NumField(&RunConfig::detector_lr)},
      {"lambda.union", Nested(&RunConfig::lambdas, &LossConfig::lambda_union)},
      {"lambda.human", Nested(&RunConfig::lambdas, &LossConfig::lambda_human)},
      {"lambda.object", Nested(&RunConfig::lambdas, &LossConfig::lambda_object)},
      {"lambda.text", Nested(&RunConfig::lambdas, &LossConfig::lambda_text)},
      {"lambda.clip", Nested(&RunConfig::lambdas, &LossConfig::lambda_clip)},
      {"lambda.dino", Nested(&RunConfig::lambdas, &LossConfig::lambda_dino)},
      {"logit_scale", NumField(&RunConfig::logit_scale)},
      {"world.sigma", Nested(&RunConfig::world, &SyntheticWorldConfig::sigma)},
      {"world.text_alignment", Nested(&RunConfig::world, &SyntheticWorldConfig::text_alignment)},
      {"world.composition_noise", Nested(&RunConfig::world, &SyntheticWorldConfig::composition_noise)},
      {"world.roi_distortion", Nested(&RunConfig::world, &SyntheticWorldConfig::roi_distortion)},
      {"world.misalignment_shift", Nested(&RunConfig::world, &SyntheticWorldConfig::misalignment_shift)},
      {"world.global_norm", Nested(&RunConfig::world, &SyntheticWorldConfig::global_norm)},
      {"world.min_separation", Nested(&RunConfig::world, &SyntheticWorldConfig::min_separation)},
      {"world.jitter", Nested(&RunConfig::world, &SyntheticWorldConfig::jitter)},
      {"world.score_noise", Nested(&RunConfig::world, &SyntheticWorldConfig::score_noise)},
      {"train_scale", NumField(&RunConfig::train_scale)},
      {"test_per_class", NumField(&RunConfig::test_per_class)},
      {"second_human", NumField(&RunConfig::second_human)},
  };
  return *fields;
}

}  // namespace

int RunConfig::ResolvedDim() const {
  if (dim > 0) return dim;
  return backend == "synthetic" ? 32 : 512;
}

Construction RunConfig::ResolvedConstruction() const {
  return generation ? ParseConstruction(construction) : Construction::kR;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : Fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::Apply(const KvDoc& doc) {
  for (const auto& [k, v] : doc.entries()) Set(k, v);
}

KvDoc RunConfig::ToKvDoc() const {
  KvDoc doc;
  for (const auto& [name, field] : Fields()) doc.Set(name, field.get(*this));
  return doc;
}

void RunConfig::Validate() const {
  if (backend != "synthetic" && backend != "pretrained") {
    throw ConfigError("backend must be 'synthetic' or 'pretrained'");
  }
  if (dim < 0 || (dim > 0 && dim < 8)) throw ConfigError("dim must be >= 8");
  try {
    ParseSetting(setting);
    ParseConstruction(construction);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (unseen_count < 0) throw ConfigError("unseen_count must be set (no default)");
  if (!(lr > 0) || !(detector_lr > 0)) throw ConfigError("learning rates must be positive");
  if (stage1_epochs < 1 || stage2_epochs < 1 || stage1_batch < 1 || stage2_batch < 1) {
    throw ConfigError("generator epochs and batch sizes must be >= 1");
  }
  if (detector_epochs < 0 || detector_batch < 1) throw ConfigError("bad detector schedule");
  if (k < 1 || n_size < 1 || n_bs < 0) throw ConfigError("k, n_size must be >= 1 and n_bs >= 0");
  if (!(logit_scale > 0)) throw ConfigError("logit_scale must be positive");
  if (train_scale < 1 || test_per_class < 1) throw ConfigError("synthetic dataset sizes must be >= 1");
  if (!(second_human >= 0 && second_human <= 1)) throw ConfigError("second_human must be in [0, 1]");
  lambdas.Validate();
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  RunConfig cfg;
  try {
    cfg.Apply(KvDoc::Load(path));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

HoiTaxonomy SyntheticTaxonomy() { return ParseTaxonomy(kSyntheticTaxonomy); }

HoiTaxonomy ResolveTaxonomy(const RunConfig& cfg) {
  if (cfg.taxonomy.empty()) return SyntheticTaxonomy();
  return LoadTaxonomy(cfg.taxonomy);
}

}  // namespace hoigen
