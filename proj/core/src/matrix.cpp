#include "ita/matrix.hpp"

#include <cassert>
#include <cmath>
#include <limits>

namespace ita {

Matrix Matrix::row(const std::vector<double>& v) {
  Matrix m(1, v.size());
  m.data_ = v;
  return m;
}

void Matrix::add_inplace(const Matrix& other) {
  assert(same_shape(other));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Matrix::scale_inplace(double s) {
  for (double& v : data_) v *= s;
}

void Matrix::axpy_inplace(double a, const Matrix& x) {
  assert(same_shape(x));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

// Core ikj kernel: out(m x n) (+)= a(m x k) * b(k x n)
void mm_ikj(const double* a, const double* b, double* out, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m * n; ++i) out[i] = 0.0;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.rows());
  out.resize(a.rows(), b.cols());
  mm_ikj(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), false);
}

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.rows());
  assert(out.rows() == a.rows() && out.cols() == b.cols());
  mm_ikj(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), true);
}

void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.rows() == b.rows());
  out.resize(a.cols(), b.cols());
  // out(j, :) += a(p, j) * b(p, :)
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double av = arow[j];
      if (av == 0.0) continue;
      double* orow = out.row_ptr(j);
      for (std::size_t q = 0; q < b.cols(); ++q) orow[q] += av * brow[q];
    }
  }
}

void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.rows() == b.rows());
  assert(out.rows() == a.cols() && out.cols() == b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double av = arow[j];
      if (av == 0.0) continue;
      double* orow = out.row_ptr(j);
      for (std::size_t q = 0; q < b.cols(); ++q) orow[q] += av * brow[q];
    }
  }
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.cols());
  out.resize(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j)
      orow[j] = dot(arow, b.row_ptr(j), a.cols());
  }
}

void matmul_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.cols());
  assert(out.rows() == a.rows() && out.cols() == b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j)
      orow[j] += dot(arow, b.row_ptr(j), a.cols());
  }
}

void add_row_bias(Matrix& m, const Matrix& bias) {
  assert(bias.rows() == 1 && bias.cols() == m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += bias(0, j);
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double log_sum_exp(const double* v, std::size_t n) {
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i)
    if (v[i] > mx) mx = v[i];
  if (!std::isfinite(mx)) return mx;  // all -inf stays -inf
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

}  // namespace ita
