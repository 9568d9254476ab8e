#include "hoigen/nn.h"

#include <cmath>
#include <numbers>

#include "hoigen/error.h"
#include "hoigen/kernels.h"

namespace hoigen::nn {

double Gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double GeluGrad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Mlp::Mlp(int in, int hidden, int out)
    : w1(hidden, in), b1(1, hidden), w2(out, hidden), b2(1, out) {}

Mlp Mlp::Init(int in, int hidden, int out, Rng& rng) {
  Mlp net(in, hidden, out);
  auto fill = [&](Matrix& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.values()) v = rng.Uniform(-bound, bound);
  };
  fill(net.w1, in);
  fill(net.b1, in);
  fill(net.w2, hidden);
  fill(net.b2, hidden);
  return net;
}

Mlp Mlp::ZerosLike() const {
  return Mlp(static_cast<int>(w1.cols()), static_cast<int>(w1.rows()),
             static_cast<int>(w2.rows()));
}

std::vector<Matrix*> Mlp::Params() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Matrix*> Mlp::Params() const { return {&w1, &b1, &w2, &b2}; }

namespace {

void AddBias(Matrix& y, const Matrix& b) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += b(0, c);
  }
}

void AccumulateColumnSums(const Matrix& dy, Matrix& db) {
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    for (std::size_t c = 0; c < dy.cols(); ++c) db(0, c) += dy(r, c);
  }
}

void AddInto(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

}  // namespace

Matrix Forward(const Mlp& net, const Matrix& x, MlpCache* cache) {
  if (x.cols() != net.w1.cols()) throw ShapeError("MLP input width mismatch");
  Matrix pre = kernels::MatMulNT(x, net.w1);
  AddBias(pre, net.b1);
  Matrix act(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) act.data()[i] = Gelu(pre.data()[i]);
  Matrix y = kernels::MatMulNT(act, net.w2);
  AddBias(y, net.b2);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return y;
}

Matrix Backward(const Mlp& net, const MlpCache& cache, const Matrix& dy, Mlp* grads) {
  if (dy.cols() != net.w2.rows() || dy.rows() != cache.x.rows()) {
    throw ShapeError("MLP gradient shape mismatch");
  }
  AddInto(grads->w2, kernels::MatMulTN(dy, cache.act));
  AccumulateColumnSums(dy, grads->b2);
  Matrix dpre = kernels::MatMulNN(dy, net.w2);
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre.data()[i] *= GeluGrad(cache.pre.data()[i]);
  AddInto(grads->w1, kernels::MatMulTN(dpre, cache.x));
  AccumulateColumnSums(dpre, grads->b1);
  return kernels::MatMulNN(dpre, net.w1);
}

void AdamW::Step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                 double lr_scale) {
  if (params.size() != grads.size()) throw ShapeError("optimizer params/grads mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("optimizer parameter list changed");
  ++t_;
  const double lr = config_.lr * lr_scale;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    if (p.size() != g.size()) throw ShapeError("optimizer gradient shape mismatch");
    double* m = m_[k].data();
    double* v = v_[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      m[i] = config_.beta1 * m[i] + (1 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1 - config_.beta2) * gi * gi;
      double& w = p.data()[i];
      w -= lr * config_.weight_decay * w;
      w -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

std::uint64_t HashParams(const std::vector<const Matrix*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Matrix* p : params) {
    const std::uint64_t shape[2] = {p->rows(), p->cols()};
    h = Fnv1a(shape, sizeof(shape), h);
    h = Fnv1a(p->data(), p->size() * sizeof(double), h);
  }
  return h;
}

}  // namespace hoigen::nn
