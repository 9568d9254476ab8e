#include "hoigen/scoring.h"

#include <cmath>

#include "hoigen/error.h"
#include "hoigen/kernels.h"

namespace hoigen {

namespace {

void CheckWidth(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw ShapeError(std::string(what) + " width does not match bank keys");
}

const PrototypeBank& RegionBank(const std::map<Branch, PrototypeBank>& banks, Branch b) {
  auto it = banks.find(b);
  if (it == banks.end()) throw ShapeError("missing " + BranchName(b) + " bank");
  return it->second;
}

void AddScaled(Matrix& dst, const Matrix& src, double w) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols()) throw ShapeError("score shapes disagree");
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += w * src.data()[i];
}

Matrix RowMatrix(std::span<const double> v) { return Matrix(1, v.size(), Vec(v.begin(), v.end())); }

}  // namespace

void LossConfig::Validate() const {
  for (double v : {lambda_union, lambda_human, lambda_object, lambda_text, lambda_clip, lambda_dino}) {
    if (!std::isfinite(v) || v < 0) throw ConfigError("lambda weights must be finite and >= 0");
  }
}

Matrix PairwiseScores(const Matrix& u, const Matrix& h, const Matrix& o,
                      const std::map<Branch, PrototypeBank>& banks, const TextPrototypes& text,
                      const LossConfig& cfg) {
  const PrototypeBank& bu = RegionBank(banks, Branch::kUnion);
  const PrototypeBank& bh = RegionBank(banks, Branch::kHuman);
  const PrototypeBank& bo = RegionBank(banks, Branch::kObject);
  const std::size_t c = bu.values.cols();
  if (bh.values.cols() != c || bo.values.cols() != c || text.keys.rows() != c) {
    throw ShapeError("banks disagree on the class count");
  }
  if (u.rows() != h.rows() || u.rows() != o.rows()) throw ShapeError("pair feature rows differ");
  CheckWidth(u.cols(), bu.keys.cols(), "union feature");
  CheckWidth(h.cols(), bh.keys.cols(), "human feature");
  CheckWidth(o.cols(), bo.keys.cols(), "object feature");
  CheckWidth(u.cols(), text.keys.cols(), "union feature");
  Matrix s(u.rows(), c);
  AddScaled(s, kernels::BankScores(u, bu.keys, bu.values), cfg.lambda_union);
  AddScaled(s, kernels::BankScores(h, bh.keys, bh.values), cfg.lambda_human);
  AddScaled(s, kernels::BankScores(o, bo.keys, bo.values), cfg.lambda_object);
  AddScaled(s, kernels::MatMulNT(u, text.keys), cfg.lambda_text);
  return s;
}

ScoreVector PairwiseScore(std::span<const double> v_u, std::span<const double> v_h,
                          std::span<const double> v_o, const std::map<Branch, PrototypeBank>& banks,
                          const TextPrototypes& text, const LossConfig& cfg) {
  const Matrix s = PairwiseScores(RowMatrix(v_u), RowMatrix(v_h), RowMatrix(v_o), banks, text, cfg);
  return {s.values(), Provenance::kPairwise};
}

ScoreVector ImagewiseScore(std::span<const double> v_clip, std::span<const double> v_dino,
                           const KnowledgeBanks& banks, const LossConfig& cfg) {
  CheckWidth(v_clip.size(), banks.clip.keys.cols(), "CLIP feature");
  CheckWidth(v_dino.size(), banks.dino.keys.cols(), "DINO feature");
  if (banks.clip.values.cols() != banks.dino.values.cols()) {
    throw ShapeError("knowledge banks disagree on the class count");
  }
  Matrix s = kernels::BankScores(RowMatrix(v_clip), banks.clip.keys, banks.clip.values);
  for (double& v : s.values()) v *= cfg.lambda_clip;
  AddScaled(s, kernels::BankScores(RowMatrix(v_dino), banks.dino.keys, banks.dino.values),
            cfg.lambda_dino);
  return {s.values(), Provenance::kImagewise};
}

ScoreVector Fuse(const ScoreVector& pairwise, const ScoreVector& imagewise) {
  if (pairwise.logits.size() != imagewise.logits.size()) throw ShapeError("score lengths differ");
  ScoreVector out{pairwise.logits, Provenance::kFused};
  for (std::size_t i = 0; i < out.logits.size(); ++i) out.logits[i] += imagewise.logits[i];
  return out;
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double TotalLoss(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) throw ShapeError("logits and targets differ in length");
  if (logits.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    // softplus(x) - y x, evaluated without overflow.
    sum += std::max(x, 0.0) - x * target[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return sum / logits.size();
}

Vec TotalLossGrad(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) throw ShapeError("logits and targets differ in length");
  Vec g(logits.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (Sigmoid(logits[i]) - target[i]) / g.size();
  return g;
}

Vec DetectionScores(double s_h, double s_o, std::span<const double> logits) {
  Vec out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s_h * s_o * Sigmoid(logits[i]);
  return out;
}

Matrix InteractionHead::Logits(const Matrix& x) const {
  if (x.cols() != w.cols()) throw ShapeError("head input width mismatch");
  Matrix y = kernels::MatMulNT(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b(0, c);
  }
  return y;
}

void InteractionHead::Backward(const Matrix& x, const Matrix& dlogits, InteractionHead* grads) const {
  const Matrix gw = kernels::MatMulTN(dlogits, x);
  for (std::size_t i = 0; i < gw.size(); ++i) grads->w.data()[i] += gw.data()[i];
  for (std::size_t r = 0; r < dlogits.rows(); ++r) {
    for (std::size_t c = 0; c < dlogits.cols(); ++c) grads->b(0, c) += dlogits(r, c);
  }
}

}  // namespace hoigen
