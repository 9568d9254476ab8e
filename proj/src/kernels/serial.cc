#include "hoigen/kernels.h"

namespace hoigen::kernels::serial {

void MatMulNT(const Matrix& a, const Matrix& b, Matrix* c) {
  if (a.cols() != b.cols()) throw ShapeError("MatMulNT: inner dims differ");
  const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
  *c = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    double* ci = c->data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
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
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c->data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.data()[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void MatMulTN(const Matrix& a, const Matrix& b, Matrix* c) {
  if (a.rows() != b.rows()) throw ShapeError("MatMulTN: inner dims differ");
  const std::size_t m = a.cols(), n = b.cols(), k = a.rows();
  *c = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c->data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a.data()[p * m + i];
      const double* bp = b.data() + p * n;
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

}  // namespace hoigen::kernels::serial
