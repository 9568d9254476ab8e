#include <atomic>

#include "hoigen/kernels.h"

namespace hoigen::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}  // namespace

void UseParallel(bool enabled) { g_parallel.store(enabled); }
bool ParallelEnabled() { return g_parallel.load(); }

Matrix MatMulNT(const Matrix& a, const Matrix& b) {
  Matrix c;
  if (ParallelEnabled()) {
    parallel::MatMulNT(a, b, &c);
  } else {
    serial::MatMulNT(a, b, &c);
  }
  return c;
}

Matrix MatMulNN(const Matrix& a, const Matrix& b) {
  Matrix c;
  if (ParallelEnabled()) {
    parallel::MatMulNN(a, b, &c);
  } else {
    serial::MatMulNN(a, b, &c);
  }
  return c;
}

Matrix MatMulTN(const Matrix& a, const Matrix& b) {
  Matrix c;
  if (ParallelEnabled()) {
    parallel::MatMulTN(a, b, &c);
  } else {
    serial::MatMulTN(a, b, &c);
  }
  return c;
}

Matrix BankScores(const Matrix& queries, const Matrix& keys,
                  const Matrix& values) {
  Matrix s;
  if (ParallelEnabled()) {
    parallel::BankScores(queries, keys, values, &s);
  } else {
    serial::BankScores(queries, keys, values, &s);
  }
  return s;
}

}  // namespace hoigen::kernels
