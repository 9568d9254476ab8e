#ifndef HOIGEN_NN_H_
#define HOIGEN_NN_H_

#include <cstdint>
#include <vector>

#include "hoigen/matrix.h"
#include "hoigen/rng.h"

namespace hoigen::nn {

double Gelu(double x);
double GeluGrad(double x);

// Two-layer perceptron: y = W2 * gelu(W1 * x + b1) + b2, applied row-wise.
struct Mlp {
  Matrix w1;  // hidden x in
  Matrix b1;  // 1 x hidden
  Matrix w2;  // out x hidden
  Matrix b2;  // 1 x out

  Mlp() = default;
  Mlp(int in, int hidden, int out);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Mlp Init(int in, int hidden, int out, Rng& rng);
  Mlp ZerosLike() const;

  int in() const { return static_cast<int>(w1.cols()); }
  int out() const { return static_cast<int>(w2.rows()); }

  std::vector<Matrix*> Params();
  std::vector<const Matrix*> Params() const;
};

// Activations kept by Forward for the backward pass.
struct MlpCache {
  Matrix x;
  Matrix pre;  // W1 x + b1
  Matrix act;  // gelu(pre)
};

Matrix Forward(const Mlp& net, const Matrix& x, MlpCache* cache = nullptr);
// Accumulates parameter gradients into `grads` and returns dL/dx.
Matrix Backward(const Mlp& net, const MlpCache& cache, const Matrix& dy, Mlp* grads);

// Decoupled-weight-decay Adam.
struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  // One update of `params` from `grads`; `lr_scale` multiplies the step for
  // this call only. Moments are keyed by position in `params`.
  void Step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
            double lr_scale = 1.0);
  long long steps() const { return t_; }

 private:
  AdamWConfig config_;
  long long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// FNV-1a over the raw bytes of every parameter, in order.
std::uint64_t HashParams(const std::vector<const Matrix*>& params);

}  // namespace hoigen::nn

#endif  // HOIGEN_NN_H_
