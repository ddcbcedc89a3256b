#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ita {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 as needed.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix row(const std::vector<double>& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }
  void resize(std::size_t rows, std::size_t cols, double fill = 0.0) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, fill);
  }

  void add_inplace(const Matrix& other);
  void scale_inplace(double s);
  void axpy_inplace(double a, const Matrix& x);  // this += a * x

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b              (m x k) * (k x n)
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T * b            (k x m)^T * (k x n)
void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T            (m x k) * (n x k)^T
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out);

// out += a * b, etc. (accumulating variants)
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out);

// Adds a 1 x n bias row to every row of m.
void add_row_bias(Matrix& m, const Matrix& bias);

double dot(const double* a, const double* b, std::size_t n);

// log(sum_i exp(v[i])) over n entries, stable. n must be >= 1.
double log_sum_exp(const double* v, std::size_t n);

}  // namespace ita
