#ifndef HOIGEN_MATRIX_H_
#define HOIGEN_MATRIX_H_

#include <cstddef>
#include <span>
#include <vector>

#include "hoigen/error.h"

namespace hoigen {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data does not match shape");
    }
  }

  static Matrix FromRows(const std::vector<Vec>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void SetZero();
  void AppendRow(std::span<const double> values);
  Matrix Transposed() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> a);
// Returns a / |a|. A zero vector is returned unchanged.
Vec Normalized(std::span<const double> a);
double Cosine(std::span<const double> a, std::span<const double> b);
bool AllFinite(std::span<const double> a);

}  // namespace hoigen

#endif  // HOIGEN_MATRIX_H_
