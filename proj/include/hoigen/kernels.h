#ifndef HOIGEN_KERNELS_H_
#define HOIGEN_KERNELS_H_

#include "hoigen/matrix.h"

// Dense kernels behind every matrix product in the library.
//
// Two implementations are kept side by side: `serial` is the reference and
// `parallel` splits output rows across OpenMP threads. Each output element
// is accumulated in the same order by both, so results are bit-identical
// and training stays reproducible regardless of thread count.
namespace hoigen::kernels {

namespace serial {
// C = A * B^T.  A: m x k, B: n x k.
void MatMulNT(const Matrix& a, const Matrix& b, Matrix* c);
// C = A * B.  A: m x k, B: k x n.
void MatMulNN(const Matrix& a, const Matrix& b, Matrix* c);
// C = A^T * B.  A: k x m, B: k x n.
void MatMulTN(const Matrix& a, const Matrix& b, Matrix* c);
// S = (Q * K^T) * V: similarity-weighted aggregation of bank values.
// Q: m x d queries, K: n x d keys, V: n x c values.
void BankScores(const Matrix& queries, const Matrix& keys,
                const Matrix& values, Matrix* scores);
}  // namespace serial

namespace parallel {
void MatMulNT(const Matrix& a, const Matrix& b, Matrix* c);
void MatMulNN(const Matrix& a, const Matrix& b, Matrix* c);
void MatMulTN(const Matrix& a, const Matrix& b, Matrix* c);
void BankScores(const Matrix& queries, const Matrix& keys,
                const Matrix& values, Matrix* scores);
// Threads the parallel variants will use (1 when built without OpenMP).
int MaxThreads();
}  // namespace parallel

// Dispatching entry points used by the rest of the library.
Matrix MatMulNT(const Matrix& a, const Matrix& b);
Matrix MatMulNN(const Matrix& a, const Matrix& b);
Matrix MatMulTN(const Matrix& a, const Matrix& b);
Matrix BankScores(const Matrix& queries, const Matrix& keys,
                  const Matrix& values);

// Selects the implementation behind the dispatching entry points.
void UseParallel(bool enabled);
bool ParallelEnabled();

}  // namespace hoigen::kernels

#endif  // HOIGEN_KERNELS_H_
