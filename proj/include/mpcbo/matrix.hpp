#ifndef MPCBO_MATRIX_HPP
#define MPCBO_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "mpcbo/errors.hpp"

namespace mpcbo {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sizes in this project stay small (a few hundred
/// rows at most), so everything is stored contiguously and operated on
/// directly.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, Vector entries);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  Matrix transposed() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

// Parallel kernels. The serial counterparts in mpcbo::serial are the
// reference implementations the tests and the benchmark compare against.
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);
}  // namespace serial

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double frobenius_norm(const Matrix& m);
Vector vec_add(const Vector& a, const Vector& b);
Vector vec_sub(const Vector& a, const Vector& b);
Vector vec_scale(double s, const Vector& v);
bool all_finite(const Vector& v);

}  // namespace mpcbo

#endif
