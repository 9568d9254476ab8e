#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "hoigen/backends.h"
#include "hoigen/config.h"
#include "hoigen/error.h"
#include "hoigen/generator.h"
#include "hoigen/pipeline.h"
#include "hoigen/rng.h"
#include "test_util.h"

namespace hoigen {
namespace {

// Monte Carlo estimate of KL(N(mu, exp(logvar)) || N(0, I)) from `n` draws.
double MonteCarloKl(const Vec& mu, const Vec& logvar, int n, Rng& rng) {
  double acc = 0;
  for (int s = 0; s < n; ++s) {
    double log_ratio = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double sd = std::exp(0.5 * logvar[i]);
      const double e = rng.Normal();
      const double z = mu[i] + sd * e;
      log_ratio += -0.5 * e * e - 0.5 * logvar[i] + 0.5 * z * z;
    }
    acc += log_ratio;
  }
  return acc / n;
}

TEST(KlTest, ClosedFormHandCases) {
  EXPECT_DOUBLE_EQ(KlToStandardNormal(Vec{0.0}, Vec{0.0}), 0.0);
  EXPECT_DOUBLE_EQ(KlToStandardNormal(Vec{0.5}, Vec{0.0}), 0.125);
  EXPECT_THROW(KlToStandardNormal(Vec{0.5}, Vec{0.0, 1.0}), ShapeError);
}

TEST(KlTest, MatchesMonteCarlo) {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Vec mu(8), logvar(8);
    for (int i = 0; i < 8; ++i) {
      mu[i] = rng.Uniform(-1.5, 1.5);
      logvar[i] = rng.Uniform(-1.5, 1.0);
    }
    const double exact = KlToStandardNormal(mu, logvar);
    EXPECT_NEAR(MonteCarloKl(mu, logvar, 200000, rng), exact, 0.02 * exact);
  }
}

TEST(ReparameterizeTest, VanishingVarianceReturnsMean) {
  Rng rng(1);
  const Vec z = Reparameterize(Vec{1.0, 2.0}, Vec{-INFINITY, -INFINITY}, rng);
  EXPECT_EQ(z, Vec({1.0, 2.0}));
}

TEST(ReparameterizeTest, SeededAndUnbiased) {
  Rng a(5), b(5);
  EXPECT_EQ(Reparameterize(Vec{0.0, 0.0}, Vec{0.0, 0.0}, a), Reparameterize(Vec{0.0, 0.0}, Vec{0.0, 0.0}, b));
  Rng rng(9);
  const int n = 100000;
  const double mu = 0.7, logvar = std::log(0.25);
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += Reparameterize(Vec{mu}, Vec{logvar}, rng)[0];
  EXPECT_NEAR(sum / n, mu, 3 * 0.5 / std::sqrt(n));
}

// D=8, d_z=4 network over a 3x3 toy label space, built by hand so d_z can
// differ from D.
CvaeParams TinyParams(bool shared, std::uint64_t seed) {
  CvaeParams p;
  p.dim = 8;
  p.latent = 4;
  p.shared = shared;
  p.prompts = BuildPromptTable(testing::ToyTaxonomy());
  Rng rng(seed);
  for (int m = 0; m < (shared ? 1 : 3); ++m) {
    CvaeModel model;
    model.encoder = nn::Mlp::Init(8, 32, 8, rng);
    model.generator = nn::Mlp::Init(8, 32, 8, rng);
    p.models.push_back(std::move(model));
  }
  p.tokens = Matrix(p.prompts.size(), 4);
  for (double& v : p.tokens.values()) v = rng.Normal(0, 0.5);
  return p;
}

void CheckStage1Gradients(bool shared) {
  CvaeParams params = TinyParams(shared, shared ? 2 : 3);
  Rng rng(4);
  const int n = 6;
  Matrix x(n, 8), eps(n, 4);
  for (double& v : x.values()) v = rng.Normal(0, 0.5);
  for (double& v : eps.values()) v = rng.Normal();
  // Mix of union, human and object prompts.
  const std::vector<int> prompts = {0, 4, 9, 10, 12, 14};
  CvaeParams grads = params.ZerosLike();
  Stage1Batch(params, x, prompts, eps, &grads);

  const double h = 1e-4;
  auto ps = params.Params();
  auto gs = std::as_const(grads).Params();
  double worst = 0;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    for (std::size_t i = 0; i < ps[p]->size(); ++i) {
      double& v = ps[p]->data()[i];
      const double keep = v;
      v = keep + h;
      const double up = Stage1Batch(params, x, prompts, eps).loss;
      v = keep - h;
      const double down = Stage1Batch(params, x, prompts, eps).loss;
      v = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = gs[p]->data()[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Stage1Test, GradientsMatchFiniteDifferencesShared) { CheckStage1Gradients(true); }
TEST(Stage1Test, GradientsMatchFiniteDifferencesPerBranch) { CheckStage1Gradients(false); }

TEST(Stage1Test, KlVanishesWhenEncoderOutputsZero) {
  CvaeParams params = TinyParams(true, 1);
  for (Matrix* m : {&params.models[0].encoder.w2, &params.models[0].encoder.b2}) m->SetZero();
  Rng rng(1);
  const Stage1Parts parts = Stage1Loss(params, Vec(8, 0.0), 0, rng);
  EXPECT_DOUBLE_EQ(parts.kl, 0.0);
  EXPECT_DOUBLE_EQ(parts.loss, parts.recon);
  const Posterior post = Encode(params, Branch::kUnion, Vec(8, 0.0));
  EXPECT_EQ(post.mu, Vec(4, 0.0));
  EXPECT_EQ(post.logvar, Vec(4, 0.0));
}

TEST(Stage1Test, EncodeRejectsBadInput) {
  const CvaeParams params = TinyParams(true, 1);
  EXPECT_THROW(Encode(params, Branch::kUnion, Vec(7, 0.0)), ShapeError);
  Vec bad(8, 0.0);
  bad[3] = NAN;
  EXPECT_THROW(Encode(params, Branch::kUnion, bad), Error);
  EXPECT_THROW(Decode(params, Vec(3, 0.0), 0), ShapeError);
  EXPECT_EQ(Decode(params, Vec(4, 0.1), 2), Decode(params, Vec(4, 0.1), 2));
}

TEST(PromptTableTest, OrderAndIndex) {
  const HoiTaxonomy tax = testing::ToyTaxonomy();
  const auto table = BuildPromptTable(tax);
  ASSERT_EQ(table.size(), 9u + 3u + 3u);
  EXPECT_EQ(table[0].branch, Branch::kUnion);
  EXPECT_EQ(table[9].branch, Branch::kHuman);
  EXPECT_EQ(table[12].branch, Branch::kObject);
  EXPECT_EQ(table[10].text, "person who interacts with bicycle");
  for (int h = 0; h < tax.num_hois(); ++h) {
    EXPECT_EQ(PromptIndex(tax, Branch::kUnion, h), h);
    EXPECT_EQ(PromptIndex(tax, Branch::kHuman, h), 9 + tax.hois[h].object);
    EXPECT_EQ(PromptIndex(tax, Branch::kObject, h), 12 + tax.hois[h].object);
  }
}

class TrainedGeneratorTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    RunConfig cfg = testing::FastConfig();
    cfg.stage1_epochs = 30;
    cfg.stage2_epochs = 20;
    data_ = new Dataset(BuildDataset(cfg));
    gen_ = new GeneratorArtifacts(TrainGenerator(*data_, cfg));
    cfg_ = new RunConfig(cfg);
  }
  static void TearDownTestSuite() {
    delete gen_;
    delete data_;
    delete cfg_;
  }
  static Dataset* data_;
  static GeneratorArtifacts* gen_;
  static RunConfig* cfg_;
};
Dataset* TrainedGeneratorTest::data_ = nullptr;
GeneratorArtifacts* TrainedGeneratorTest::gen_ = nullptr;
RunConfig* TrainedGeneratorTest::cfg_ = nullptr;

TEST_F(TrainedGeneratorTest, Stage1LossHalves) {
  ASSERT_EQ(gen_->stage1.loss.size(), 30u);
  EXPECT_LT(gen_->stage1.loss.back(), 0.5 * gen_->stage1.loss.front());
}

TEST_F(TrainedGeneratorTest, Stage2FreezesGeneratorAndDecreases) {
  EXPECT_EQ(gen_->hash_before_stage2, gen_->hash_after_stage2);
  int violations = 0;
  for (std::size_t i = 1; i < gen_->stage2.loss.size(); ++i) {
    violations += gen_->stage2.loss[i] > gen_->stage2.loss[i - 1];
  }
  EXPECT_LE(violations, 1);
}

TEST_F(TrainedGeneratorTest, Stage1IsSeeded) {
  const FeatureSet crops = CropTrainingSet(*data_);
  TrainCurve a, b;
  TrainConfig t = Stage1Schedule(*cfg_);
  t.epochs = 3;
  auto init = [&] { return InitCvae(data_->taxonomy, *data_->backend, true, 5); };
  TrainStage1(crops, init(), t, &a);
  TrainStage1(crops, init(), t, &b);
  EXPECT_EQ(a.loss, b.loss);
}

TEST_F(TrainedGeneratorTest, DistinctPromptsDecodeDifferently) {
  const Vec z(gen_->params.latent, 0.3);
  const Vec a = Decode(gen_->params, z, 0);
  const Vec b = Decode(gen_->params, z, 1);
  EXPECT_LT(Cosine(a, b), 0.999);
}

TEST_F(TrainedGeneratorTest, SynthesizeShapesAndSeeds) {
  const HoiTaxonomy& tax = data_->taxonomy;
  Rng rng(1);
  const Matrix batch = Synthesize(tax, gen_->params, &gen_->aligner, Branch::kUnion, 0, 100, rng);
  EXPECT_EQ(batch.rows(), 100u);
  EXPECT_EQ(static_cast<int>(batch.cols()), gen_->params.dim);
  Rng r1(4), r2(4);
  EXPECT_EQ(Synthesize(tax, gen_->params, &gen_->aligner, Branch::kHuman, 3, 1, r1),
            Synthesize(tax, gen_->params, &gen_->aligner, Branch::kHuman, 3, 1, r2));
  for (int h : data_->split.unseen_hois) {
    const Matrix m = Synthesize(tax, gen_->params, &gen_->aligner, Branch::kUnion, h, 5, rng);
    EXPECT_TRUE(AllFinite(m.values()));
  }
  EXPECT_THROW(Synthesize(tax, gen_->params, nullptr, Branch::kUnion, 0, 0, rng), ConfigError);
}

TEST_F(TrainedGeneratorTest, CheckpointRoundTrip) {
  const auto dir = testing::ScratchDir("generator");
  SaveGenerator(dir, gen_->params, &gen_->aligner, {{"note", "x"}});
  const GeneratorCheckpoint ck = LoadGenerator(dir);
  EXPECT_EQ(ck.params.Hash(), gen_->params.Hash());
  ASSERT_TRUE(ck.has_aligner);
  EXPECT_EQ(ck.aligner.w1, gen_->aligner.w1);
  EXPECT_EQ(ck.metadata.at("note"), "x");
  EXPECT_EQ(ck.params.prompts.size(), gen_->params.prompts.size());
}

TEST(Stage1ConfigTest, EmptyDatasetIsConfigError) {
  const CvaeParams params = TinyParams(true, 1);
  EXPECT_THROW(TrainStage1(FeatureSet{}, params, TrainConfig{}), ConfigError);
  TrainConfig bad;
  bad.lr = 0;
  EXPECT_THROW(bad.Validate(), ConfigError);
}

TEST(Stage2Test, LossHandCases) {
  nn::Mlp aligner(2, 8, 2);
  const Matrix zeros(1, 2);
  EXPECT_DOUBLE_EQ(Stage2Loss(zeros, zeros, aligner), 0.0);
  aligner.b2 = Matrix(1, 2, Vec{1.0, 1.0});
  EXPECT_DOUBLE_EQ(Stage2Loss(zeros, zeros, aligner), 1.0);
}

TEST(Stage2Test, ConstantTargetsGiveConstantMap) {
  CvaeParams frozen = TinyParams(true, 8);
  frozen.latent = 4;
  FeatureSet targets;
  const Vec target = {0.2, -0.1, 0.4, 0.0, 0.3, -0.3, 0.1, 0.05};
  for (int i = 0; i < 64; ++i) targets.Add(target, i % 15);
  TrainConfig t;
  t.epochs = 400;
  t.batch = 64;
  t.lr = 1e-2;
  TrainCurve curve;
  const std::uint64_t before = frozen.Hash();
  TrainStage2(targets, frozen, t, &curve);
  EXPECT_EQ(frozen.Hash(), before);
  EXPECT_LT(curve.loss.back(), 1e-4);
}

TEST(LrScheduleTest, CosineAnneals) {
  TrainConfig t;
  t.epochs = 4;
  EXPECT_DOUBLE_EQ(LrScale(t, 2), 1.0);
  t.cosine = true;
  EXPECT_DOUBLE_EQ(LrScale(t, 0), 1.0);
  EXPECT_NEAR(LrScale(t, 2), 0.5, 1e-15);
  EXPECT_GT(LrScale(t, 3), 0.0);
}

}  // namespace
}  // namespace hoigen
