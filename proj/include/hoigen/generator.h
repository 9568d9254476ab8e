#ifndef HOIGEN_GENERATOR_H_
#define HOIGEN_GENERATOR_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hoigen/backends.h"
#include "hoigen/matrix.h"
#include "hoigen/nn.h"
#include "hoigen/rng.h"
#include "hoigen/taxonomy.h"

namespace hoigen {

inline constexpr double kLogvarClamp = 10.0;

// One conditioning prompt. Union prompts are per HOI; human and object
// prompts are per object category.
struct PromptSpec {
  Branch branch = Branch::kUnion;
  int verb = -1;
  int object = -1;
  std::string text;
};

// Union prompts in HOI order, then human prompts, then object prompts (both
// in object order).
std::vector<PromptSpec> BuildPromptTable(const HoiTaxonomy& tax);
// Row of the prompt table conditioning `branch` for HOI `hoi`.
int PromptIndex(const HoiTaxonomy& tax, Branch branch, int hoi);

struct CvaeModel {
  nn::Mlp encoder;    // D -> 4D -> 2 d_z (mu, logvar)
  nn::Mlp generator;  // d_z + d_tok -> 4D -> D
};

struct CvaeParams {
  int dim = 0;
  int latent = 0;  // d_z == d_tok
  bool shared = true;
  std::vector<CvaeModel> models;  // one, or one per region branch
  Matrix tokens;                  // learnable class tokens, one row per prompt
  std::vector<PromptSpec> prompts;

  int ModelIndex(Branch b) const;
  CvaeModel& ModelFor(Branch b) { return models[ModelIndex(b)]; }
  const CvaeModel& ModelFor(Branch b) const { return models[ModelIndex(b)]; }
  CvaeParams ZerosLike() const;
  std::vector<Matrix*> Params();
  std::vector<const Matrix*> Params() const;
  std::uint64_t Hash() const { return nn::HashParams(Params()); }
};

// Tokens start at the text embedding of each rendered prompt, so the
// embedding width fixes d_z = d_tok = D.
CvaeParams InitCvae(const HoiTaxonomy& tax, const Backend& text_encoder, bool shared,
                    std::uint64_t seed);

struct Posterior {
  Vec mu;
  Vec logvar;  // clamped to [-kLogvarClamp, kLogvarClamp]
};

Posterior Encode(const CvaeParams& params, Branch branch, std::span<const double> x);
Vec Reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng);
double KlToStandardNormal(std::span<const double> mu, std::span<const double> logvar);
Vec Decode(const CvaeParams& params, std::span<const double> z, int prompt);

struct Stage1Parts {
  double loss = 0;
  double kl = 0;
  double recon = 0;
};

// Batch-averaged KL + MSE reconstruction with explicit noise `eps` (rows
// aligned with `x`). Parameter gradients are added to `grads` when given.
Stage1Parts Stage1Batch(const CvaeParams& params, const Matrix& x, const std::vector<int>& prompts,
                        const Matrix& eps, CvaeParams* grads = nullptr);
Stage1Parts Stage1Loss(const CvaeParams& params, std::span<const double> x, int prompt, Rng& rng);

// Rows of features paired with their prompt index.
struct FeatureSet {
  Matrix x;
  std::vector<int> prompts;

  void Add(std::span<const double> row, int prompt);
  std::size_t size() const { return prompts.size(); }
};

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 50;
  int batch = 256;
  std::uint64_t seed = 0;
  double weight_decay = 1e-2;
  double token_lr_scale = 1.0;
  bool cosine = false;  // anneal lr to 0 over the schedule

  void Validate() const;  // ConfigError
};

struct TrainCurve {
  std::vector<double> loss;  // epoch means
  std::vector<double> kl;
  std::vector<double> recon;
};

CvaeParams TrainStage1(const FeatureSet& data, CvaeParams init, const TrainConfig& config,
                       TrainCurve* curve = nullptr);

// Mean over all elements of (aligner(x') - x_bar)^2.
double Stage2Loss(const Matrix& x_prime, const Matrix& x_bar, const nn::Mlp& aligner);

// Per-epoch lr multiplier: 1, or a half-cosine from 1 toward 0 when `cosine`.
double LrScale(const TrainConfig& config, int epoch);

nn::Mlp InitAligner(int dim, std::uint64_t seed);

// Fits the aligner so that aligner(G(z, c_k)) matches detector-pathway
// targets; `frozen` is read only.
nn::Mlp TrainStage2(const FeatureSet& targets, const CvaeParams& frozen, const TrainConfig& config,
                    TrainCurve* curve = nullptr);

// K rows of aligner(G(z, c)) for the prompt of (branch, hoi); the aligner
// is skipped when null.
Matrix Synthesize(const HoiTaxonomy& tax, const CvaeParams& params, const nn::Mlp* aligner,
                  Branch branch, int hoi, int count, Rng& rng);

void SaveGenerator(const std::filesystem::path& dir, const CvaeParams& params,
                   const nn::Mlp* aligner, const std::map<std::string, std::string>& metadata);
struct GeneratorCheckpoint {
  CvaeParams params;
  bool has_aligner = false;
  nn::Mlp aligner;
  std::map<std::string, std::string> metadata;
};
GeneratorCheckpoint LoadGenerator(const std::filesystem::path& dir);

}  // namespace hoigen

#endif  // HOIGEN_GENERATOR_H_
