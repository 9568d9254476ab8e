#include "hoigen/kernels.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hoigen::kernels::parallel {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinWork = 1 << 14;
}  // namespace

int MaxThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void MatMulNT(const Matrix& a, const Matrix& b, Matrix* c) {
  if (a.cols() != b.cols()) throw ShapeError("MatMulNT: inner dims differ");
  const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
  *c = Matrix(m, n);
  const double* ad = a.data();
  const double* bd = b.data();
  double* cd = c->data();
  const long long rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kMinWork)
  for (long long i = 0; i < rows; ++i) {
    const double* ai = ad + i * k;
    double* ci = cd + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = bd + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
}

void MatMulNN(const Matrix& a, const Matrix& b, Matrix* c) {
  if (a.cols() != b.rows()) throw ShapeError("MatMulNN: inner dims differ");
  const std::size_t m = a.rows(), n = b.cols(), k = a.cols();
  *c = Matrix(m, n);
  const double* ad = a.data();
  const double* bd = b.data();
  double* cd = c->data();
  const long long rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kMinWork)
  for (long long i = 0; i < rows; ++i) {
    double* ci = cd + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      const double* bp = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void MatMulTN(const Matrix& a, const Matrix& b, Matrix* c) {
  if (a.rows() != b.rows()) throw ShapeError("MatMulTN: inner dims differ");
  const std::size_t m = a.cols(), n = b.cols(), k = a.rows();
  *c = Matrix(m, n);
  const double* ad = a.data();
  const double* bd = b.data();
  double* cd = c->data();
  const long long rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kMinWork)
  for (long long i = 0; i < rows; ++i) {
    double* ci = cd + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = ad[p * m + i];
      const double* bp = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void BankScores(const Matrix& queries, const Matrix& keys,
                const Matrix& values, Matrix* scores) {
  if (keys.rows() != values.rows()) {
    throw ShapeError("BankScores: keys and values row counts differ");
  }
  Matrix sim;
  MatMulNT(queries, keys, &sim);
  MatMulNN(sim, values, scores);
}

}  // namespace hoigen::kernels::parallel
