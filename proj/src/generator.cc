#include "hoigen/generator.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hoigen/archive.h"
#include "hoigen/error.h"
#include "hoigen/prompts.h"
#include "json.hpp"

namespace hoigen {

namespace {

double Clamp(double lv) { return std::clamp(lv, -kLogvarClamp, kLogvarClamp); }

void RequireFinite(std::span<const double> v, const char* what) {
  if (!AllFinite(v)) throw ValidationError(std::string(what) + " has non-finite entries");
}

Matrix Rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

Matrix GeneratorInput(const CvaeParams& params, const Matrix& z, const std::vector<int>& prompts,
                      const std::vector<std::size_t>& idx) {
  const int dz = params.latent;
  Matrix in(idx.size(), dz + params.tokens.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto row = in.row(i);
    std::copy(z.row(i).begin(), z.row(i).end(), row.begin());
    const auto tok = params.tokens.row(prompts[idx[i]]);
    std::copy(tok.begin(), tok.end(), row.begin() + dz);
  }
  return in;
}

// Row indices of a batch grouped by the model that handles them.
std::vector<std::vector<std::size_t>> GroupByModel(const CvaeParams& params,
                                                   const std::vector<int>& prompts,
                                                   std::span<const std::size_t> batch) {
  std::vector<std::vector<std::size_t>> groups(params.models.size());
  for (std::size_t i : batch) {
    if (prompts[i] < 0 || prompts[i] >= static_cast<int>(params.prompts.size())) {
      throw IndexError("prompt index out of range");
    }
    groups[params.ModelIndex(params.prompts[prompts[i]].branch)].push_back(i);
  }
  return groups;
}

std::vector<Matrix*> TrainableParams(CvaeParams& p) { return p.Params(); }

}  // namespace

std::vector<PromptSpec> BuildPromptTable(const HoiTaxonomy& tax) {
  std::vector<PromptSpec> table;
  for (int h = 0; h < tax.num_hois(); ++h) {
    table.push_back({Branch::kUnion, tax.hois[h].verb, tax.hois[h].object, UnionPrompt(tax, h)});
  }
  for (int o = 0; o < tax.num_objects(); ++o) {
    table.push_back({Branch::kHuman, -1, o, HumanPrompt(tax, o)});
  }
  for (int o = 0; o < tax.num_objects(); ++o) {
    table.push_back({Branch::kObject, -1, o, ObjectPrompt(tax, o)});
  }
  return table;
}

int PromptIndex(const HoiTaxonomy& tax, Branch branch, int hoi) {
  if (hoi < 0 || hoi >= tax.num_hois()) throw UnknownCategory("HOI id " + std::to_string(hoi));
  switch (branch) {
    case Branch::kUnion:
      return hoi;
    case Branch::kHuman:
      return tax.num_hois() + tax.hois[hoi].object;
    case Branch::kObject:
      return tax.num_hois() + tax.num_objects() + tax.hois[hoi].object;
    default:
      throw ValidationError("the generator covers region branches only");
  }
}

int CvaeParams::ModelIndex(Branch b) const {
  if (shared) return 0;
  switch (b) {
    case Branch::kUnion:
      return 0;
    case Branch::kHuman:
      return 1;
    case Branch::kObject:
      return 2;
    default:
      throw ValidationError("the generator covers region branches only");
  }
}

CvaeParams CvaeParams::ZerosLike() const {
  CvaeParams z;
  z.dim = dim;
  z.latent = latent;
  z.shared = shared;
  for (const auto& m : models) z.models.push_back({m.encoder.ZerosLike(), m.generator.ZerosLike()});
  z.tokens = Matrix(tokens.rows(), tokens.cols());
  z.prompts = prompts;
  return z;
}

std::vector<Matrix*> CvaeParams::Params() {
  std::vector<Matrix*> out;
  for (auto& m : models) {
    for (Matrix* p : m.encoder.Params()) out.push_back(p);
    for (Matrix* p : m.generator.Params()) out.push_back(p);
  }
  out.push_back(&tokens);
  return out;
}

std::vector<const Matrix*> CvaeParams::Params() const {
  std::vector<const Matrix*> out;
  for (const auto& m : models) {
    for (const Matrix* p : m.encoder.Params()) out.push_back(p);
    for (const Matrix* p : m.generator.Params()) out.push_back(p);
  }
  out.push_back(&tokens);
  return out;
}

CvaeParams InitCvae(const HoiTaxonomy& tax, const Backend& text_encoder, bool shared,
                    std::uint64_t seed) {
  CvaeParams p;
  p.dim = text_encoder.dim();
  p.latent = p.dim;
  p.shared = shared;
  p.prompts = BuildPromptTable(tax);
  const int d = p.dim;
  Rng rng(DeriveSeed(seed, "cvae-init"));
  for (int m = 0; m < (shared ? 1 : 3); ++m) {
    CvaeModel model;
    model.encoder = nn::Mlp::Init(d, 4 * d, 2 * p.latent, rng);
    model.generator = nn::Mlp::Init(2 * p.latent, 4 * d, d, rng);
    p.models.push_back(std::move(model));
  }
  p.tokens = Matrix(p.prompts.size(), p.latent);
  for (std::size_t i = 0; i < p.prompts.size(); ++i) {
    const Vec e = text_encoder.EncodeText(p.prompts[i].text).values;
    if (static_cast<int>(e.size()) != p.latent) throw ShapeError("text embedding width != D");
    std::copy(e.begin(), e.end(), p.tokens.row(i).begin());
  }
  return p;
}

Posterior Encode(const CvaeParams& params, Branch branch, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.dim) throw ShapeError("encoder input length != D");
  RequireFinite(x, "encoder input");
  const Matrix out =
      nn::Forward(params.ModelFor(branch).encoder, Matrix(1, x.size(), Vec(x.begin(), x.end())));
  Posterior post;
  post.mu.assign(out.data(), out.data() + params.latent);
  post.logvar.assign(out.data() + params.latent, out.data() + 2 * params.latent);
  for (double& v : post.logvar) v = Clamp(v);
  return post;
}

Vec Reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng) {
  if (mu.size() != logvar.size()) throw ShapeError("mu/logvar length mismatch");
  Vec z(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    // Only the upper clamp applies: a vanishing variance must yield z = mu.
    z[i] = mu[i] + std::exp(0.5 * std::min(logvar[i], kLogvarClamp)) * rng.Normal();
  }
  return z;
}

double KlToStandardNormal(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw ShapeError("mu/logvar length mismatch");
  double kl = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    kl += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
  }
  return 0.5 * kl;
}

Vec Decode(const CvaeParams& params, std::span<const double> z, int prompt) {
  if (static_cast<int>(z.size()) != params.latent) throw ShapeError("latent length != d_z");
  if (prompt < 0 || prompt >= static_cast<int>(params.prompts.size())) {
    throw UnknownCategory("prompt index out of range");
  }
  const Matrix zm(1, z.size(), Vec(z.begin(), z.end()));
  const Matrix in = GeneratorInput(params, zm, {prompt}, {0});
  return nn::Forward(params.ModelFor(params.prompts[prompt].branch).generator, in).values();
}

Stage1Parts Stage1Batch(const CvaeParams& params, const Matrix& x, const std::vector<int>& prompts,
                        const Matrix& eps, CvaeParams* grads) {
  const std::size_t n = x.rows();
  if (n == 0) return {};
  if (static_cast<int>(x.cols()) != params.dim || prompts.size() != n || eps.rows() != n ||
      static_cast<int>(eps.cols()) != params.latent) {
    throw ShapeError("stage-1 batch shapes disagree");
  }
  const int dz = params.latent;
  const double inv_n = 1.0 / n;
  const double inv_d = 1.0 / params.dim;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Stage1Parts parts;
  const auto groups = GroupByModel(params, prompts, all);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& idx = groups[g];
    if (idx.empty()) continue;
    const CvaeModel& model = params.models[g];
    const Matrix xg = Rows(x, idx);
    nn::MlpCache enc_cache, gen_cache;
    const Matrix enc = nn::Forward(model.encoder, xg, &enc_cache);
    Matrix z(idx.size(), dz), stdev(idx.size(), dz);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (int k = 0; k < dz; ++k) {
        const double mu = enc(i, k), lv = Clamp(enc(i, dz + k));
        stdev(i, k) = std::exp(0.5 * lv);
        z(i, k) = mu + stdev(i, k) * eps(idx[i], k);
        parts.kl += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv) * inv_n;
      }
    }
    const Matrix gin = GeneratorInput(params, z, prompts, idx);
    const Matrix xr = nn::Forward(model.generator, gin, &gen_cache);
    Matrix dxr(xr.rows(), xr.cols());
    for (std::size_t i = 0; i < xr.rows(); ++i) {
      for (std::size_t c = 0; c < xr.cols(); ++c) {
        const double diff = xr(i, c) - xg(i, c);
        parts.recon += diff * diff * inv_d * inv_n;
        dxr(i, c) = 2.0 * diff * inv_d * inv_n;
      }
    }
    if (!grads) continue;
    CvaeModel& gm = grads->models[g];
    const Matrix dgin = nn::Backward(model.generator, gen_cache, dxr, &gm.generator);
    Matrix denc(idx.size(), 2 * dz);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto tok_grad = grads->tokens.row(prompts[idx[i]]);
      for (std::size_t k = 0; k < tok_grad.size(); ++k) tok_grad[k] += dgin(i, dz + k);
      for (int k = 0; k < dz; ++k) {
        const double mu = enc(i, k), raw = enc(i, dz + k), lv = Clamp(raw);
        const double dzk = dgin(i, k);
        denc(i, k) = dzk + mu * inv_n;
        const bool clamped = raw < -kLogvarClamp || raw > kLogvarClamp;
        denc(i, dz + k) =
            clamped ? 0.0 : dzk * eps(idx[i], k) * 0.5 * stdev(i, k) + 0.5 * (std::exp(lv) - 1.0) * inv_n;
      }
    }
    nn::Backward(model.encoder, enc_cache, denc, &gm.encoder);
  }
  parts.loss = parts.kl + parts.recon;
  return parts;
}

Stage1Parts Stage1Loss(const CvaeParams& params, std::span<const double> x, int prompt, Rng& rng) {
  if (static_cast<int>(x.size()) != params.dim) throw ShapeError("input length != D");
  const Matrix xm(1, x.size(), Vec(x.begin(), x.end()));
  const Matrix eps(1, params.latent, rng.NormalVector(params.latent));
  return Stage1Batch(params, xm, {prompt}, eps);
}

void FeatureSet::Add(std::span<const double> row, int prompt) {
  if (x.empty()) x = Matrix(0, row.size());
  x.AppendRow(row);
  prompts.push_back(prompt);
}

void TrainConfig::Validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (!(weight_decay >= 0) || !(token_lr_scale >= 0)) throw ConfigError("negative optimizer setting");
}

CvaeParams TrainStage1(const FeatureSet& data, CvaeParams params, const TrainConfig& config,
                       TrainCurve* curve) {
  config.Validate();
  if (data.size() == 0) throw ConfigError("stage-1 dataset is empty");
  if (static_cast<int>(data.x.cols()) != params.dim) throw ShapeError("stage-1 features != D");
  bool seen[3] = {false, false, false};
  for (int p : data.prompts) {
    if (p < 0 || p >= static_cast<int>(params.prompts.size())) throw IndexError("prompt index out of range");
    seen[static_cast<int>(params.prompts[p].branch)] = true;
  }
  if (!seen[0] || !seen[1] || !seen[2]) throw ConfigError("stage-1 dataset must cover all three branches");

  nn::AdamW net_opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  nn::AdamW tok_opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(DeriveSeed(config.seed, "stage1"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    Stage1Parts sum;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      const Matrix xb = Rows(data.x, idx);
      std::vector<int> pb;
      for (std::size_t i : idx) pb.push_back(data.prompts[i]);
      Matrix eps(idx.size(), params.latent);
      for (double& e : eps.values()) e = rng.Normal();
      CvaeParams grads = params.ZerosLike();
      const Stage1Parts parts = Stage1Batch(params, xb, pb, eps, &grads);
      const double w = static_cast<double>(idx.size()) / order.size();
      sum.loss += parts.loss * w;
      sum.kl += parts.kl * w;
      sum.recon += parts.recon * w;

      auto p = TrainableParams(params);
      const auto g = std::as_const(grads).Params();
      const std::vector<Matrix*> net_p(p.begin(), p.end() - 1);
      const std::vector<const Matrix*> net_g(g.begin(), g.end() - 1);
      net_opt.Step(net_p, net_g);
      tok_opt.Step({p.back()}, {g.back()}, config.token_lr_scale);
    }
    if (!std::isfinite(sum.loss)) throw Error("stage-1 loss diverged");
    if (curve) {
      curve->loss.push_back(sum.loss);
      curve->kl.push_back(sum.kl);
      curve->recon.push_back(sum.recon);
    }
  }
  return params;
}

double Stage2Loss(const Matrix& x_prime, const Matrix& x_bar, const nn::Mlp& aligner) {
  if (x_prime.rows() != x_bar.rows() || x_prime.cols() != x_bar.cols()) {
    throw ShapeError("stage-2 inputs and targets differ in shape");
  }
  if (x_prime.empty()) return 0.0;
  const Matrix y = nn::Forward(aligner, x_prime);
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.data()[i] - x_bar.data()[i];
    s += d * d;
  }
  return s / y.size();
}

double LrScale(const TrainConfig& config, int epoch) {
  if (!config.cosine) return 1.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / config.epochs));
}

nn::Mlp InitAligner(int dim, std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, "aligner-init"));
  return nn::Mlp::Init(dim, 4 * dim, dim, rng);
}

nn::Mlp TrainStage2(const FeatureSet& targets, const CvaeParams& frozen, const TrainConfig& config,
                    TrainCurve* curve) {
  config.Validate();
  if (targets.size() == 0) throw ConfigError("stage-2 target set is empty");
  if (static_cast<int>(targets.x.cols()) != frozen.dim) throw ShapeError("stage-2 targets != D");
  nn::Mlp aligner = InitAligner(frozen.dim, config.seed);
  nn::AdamW opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(DeriveSeed(config.seed, "stage2"));
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);

  // Each target is paired with one latent draw; the frozen generator output
  // for that pair is fixed for the whole stage.
  Matrix z(targets.size(), frozen.latent);
  for (double& v : z.values()) v = rng.Normal();
  Matrix x_prime(targets.size(), frozen.dim);
  for (const auto& group : GroupByModel(frozen, targets.prompts, order)) {
    if (group.empty()) continue;
    const Matrix in = GeneratorInput(frozen, Rows(z, group), targets.prompts, group);
    const Matrix out = nn::Forward(
        frozen.ModelFor(frozen.prompts[targets.prompts[group[0]]].branch).generator, in);
    for (std::size_t i = 0; i < group.size(); ++i) {
      std::copy(out.row(i).begin(), out.row(i).end(), x_prime.row(group[i]).begin());
    }
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    const double lr_scale = LrScale(config, epoch);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      const Matrix xp = Rows(x_prime, idx);
      const Matrix tb = Rows(targets.x, idx);
      nn::MlpCache cache;
      const Matrix y = nn::Forward(aligner, xp, &cache);
      Matrix dy(y.rows(), y.cols());
      double loss = 0;
      const double scale = 1.0 / y.size();
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y.data()[i] - tb.data()[i];
        loss += d * d * scale;
        dy.data()[i] = 2.0 * d * scale;
      }
      nn::Mlp grads = aligner.ZerosLike();
      nn::Backward(aligner, cache, dy, &grads);
      opt.Step(aligner.Params(), std::as_const(grads).Params(), lr_scale);
      epoch_loss += loss * idx.size() / order.size();
    }
    if (!std::isfinite(epoch_loss)) throw Error("stage-2 loss diverged");
    if (curve) curve->loss.push_back(epoch_loss);
  }
  return aligner;
}

Matrix Synthesize(const HoiTaxonomy& tax, const CvaeParams& params, const nn::Mlp* aligner,
                  Branch branch, int hoi, int count, Rng& rng) {
  if (count < 1) throw ConfigError("synthesis count must be >= 1");
  const int prompt = PromptIndex(tax, branch, hoi);
  if (prompt >= static_cast<int>(params.prompts.size())) throw UnknownCategory("prompt table too small");
  Matrix z(count, params.latent);
  for (double& v : z.values()) v = rng.Normal();
  std::vector<std::size_t> idx(count, 0);
  std::vector<int> prompts = {prompt};
  Matrix out = nn::Forward(params.ModelFor(branch).generator, GeneratorInput(params, z, prompts, idx));
  if (aligner) out = nn::Forward(*aligner, out);
  return out;
}

void SaveGenerator(const std::filesystem::path& dir, const CvaeParams& params,
                   const nn::Mlp* aligner, const std::map<std::string, std::string>& metadata) {
  Archive ar;
  const char* names[] = {"w1", "b1", "w2", "b2"};
  auto put_mlp = [&](const std::string& prefix, const nn::Mlp& net) {
    const auto ps = net.Params();
    for (int i = 0; i < 4; ++i) ar.Put(prefix + "/" + names[i], *ps[i], "", ElementType::kFloat64);
  };
  for (std::size_t m = 0; m < params.models.size(); ++m) {
    put_mlp("encoder/" + std::to_string(m), params.models[m].encoder);
    put_mlp("generator/" + std::to_string(m), params.models[m].generator);
  }
  ar.Put("tokens", params.tokens, "", ElementType::kFloat64);
  if (aligner) put_mlp("aligner", *aligner);
  ar.metadata() = metadata;
  ar.metadata()["kind"] = "generator";
  ar.metadata()["dim"] = std::to_string(params.dim);
  ar.metadata()["latent"] = std::to_string(params.latent);
  ar.metadata()["shared"] = params.shared ? "1" : "0";
  nlohmann::ordered_json prompts = nlohmann::ordered_json::array();
  for (const auto& p : params.prompts) {
    prompts.push_back({{"branch", BranchName(p.branch)}, {"verb", p.verb}, {"object", p.object},
                       {"text", p.text}});
  }
  ar.metadata()["prompts"] = prompts.dump();
  ar.Save(dir);
}

GeneratorCheckpoint LoadGenerator(const std::filesystem::path& dir) {
  const Archive ar = Archive::Load(dir);
  if (ar.metadata().count("kind") == 0 || ar.Meta("kind") != "generator") {
    throw ValidationError("not a generator checkpoint: " + dir.string());
  }
  GeneratorCheckpoint ck;
  CvaeParams& p = ck.params;
  p.dim = std::stoi(ar.Meta("dim"));
  p.latent = std::stoi(ar.Meta("latent"));
  p.shared = ar.Meta("shared") == "1";
  const char* names[] = {"w1", "b1", "w2", "b2"};
  auto get_mlp = [&](const std::string& prefix) {
    nn::Mlp net;
    auto ps = net.Params();
    for (int i = 0; i < 4; ++i) *ps[i] = ar.Get(prefix + "/" + names[i]);
    return net;
  };
  for (int m = 0; m < (p.shared ? 1 : 3); ++m) {
    p.models.push_back({get_mlp("encoder/" + std::to_string(m)), get_mlp("generator/" + std::to_string(m))});
  }
  p.tokens = ar.Get("tokens");
  for (const auto& j : nlohmann::json::parse(ar.Meta("prompts"))) {
    p.prompts.push_back({ParseBranch(j.at("branch").get<std::string>()), j.at("verb").get<int>(),
                         j.at("object").get<int>(), j.at("text").get<std::string>()});
  }
  if (ar.Contains("aligner/w1")) {
    ck.has_aligner = true;
    ck.aligner = get_mlp("aligner");
  }
  ck.metadata = ar.metadata();
  return ck;
}

}  // namespace hoigen
