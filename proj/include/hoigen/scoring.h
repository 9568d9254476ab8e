#ifndef HOIGEN_SCORING_H_
#define HOIGEN_SCORING_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "hoigen/banks.h"
#include "hoigen/matrix.h"

namespace hoigen {

struct LossConfig {
  double lambda_union = 0.5;
  double lambda_human = 0.5;
  double lambda_object = 0.5;
  double lambda_text = 1.0;
  double lambda_clip = 0.5;
  double lambda_dino = 0.5;

  void Validate() const;  // ConfigError on negative or non-finite weights
};

enum class Provenance { kPairwise, kImagewise, kFused };

struct ScoreVector {
  Vec logits;
  Provenance provenance = Provenance::kFused;
};

// s_P for one pair.
ScoreVector PairwiseScore(std::span<const double> v_u, std::span<const double> v_h,
                          std::span<const double> v_o, const std::map<Branch, PrototypeBank>& banks,
                          const TextPrototypes& text, const LossConfig& cfg);
// s_P for a batch of pairs; row i of U, H, O belong to pair i. Returns n x C.
Matrix PairwiseScores(const Matrix& u, const Matrix& h, const Matrix& o,
                      const std::map<Branch, PrototypeBank>& banks, const TextPrototypes& text,
                      const LossConfig& cfg);

// s_I for one image.
ScoreVector ImagewiseScore(std::span<const double> v_clip, std::span<const double> v_dino,
                           const KnowledgeBanks& banks, const LossConfig& cfg);

ScoreVector Fuse(const ScoreVector& pairwise, const ScoreVector& imagewise);

double Sigmoid(double x);
// Mean per-class binary cross-entropy of sigmoid(logits) against `target`.
double TotalLoss(std::span<const double> logits, std::span<const double> target);
// d TotalLoss / d logits.
Vec TotalLossGrad(std::span<const double> logits, std::span<const double> target);

// final_c = s_h * s_o * sigmoid(logit_c).
Vec DetectionScores(double s_h, double s_o, std::span<const double> logits);

// Trainable linear correction on top of the fused logits, fitted during the
// detector phase: W [v_u; v_h; v_o] + b. Zero-initialized, so an untrained
// head leaves the training-free scores unchanged.
struct InteractionHead {
  Matrix w;  // C x 3D
  Matrix b;  // 1 x C

  InteractionHead() = default;
  InteractionHead(int num_classes, int dim) : w(num_classes, 3 * dim), b(1, num_classes) {}

  // x: n x 3D concatenated pair features. Returns n x C.
  Matrix Logits(const Matrix& x) const;
  // Adds the gradient of sum_i dlogits_i . Logits(x)_i.
  void Backward(const Matrix& x, const Matrix& dlogits, InteractionHead* grads) const;
  std::vector<Matrix*> Params() { return {&w, &b}; }
  std::vector<const Matrix*> Params() const { return {&w, &b}; }
};

}  // namespace hoigen

#endif  // HOIGEN_SCORING_H_
