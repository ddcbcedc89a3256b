#include <cmath>
#include <vector>

#include "doctest.h"
#include "ita/matrix.hpp"
#include "ita/rng.hpp"

using ita::Matrix;

TEST_CASE("matmul matches a hand-worked product") {
  Matrix a(2, 3);
  const double av[] = {1, 2, 3, 4, 5, 6};
  for (std::size_t i = 0; i < 6; ++i) a.values()[i] = av[i];
  Matrix b(3, 2);
  const double bv[] = {7, 8, 9, 10, 11, 12};
  for (std::size_t i = 0; i < 6; ++i) b.values()[i] = bv[i];

  Matrix c;
  ita::matmul(a, b, c);
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 2);
  CHECK(c(0, 0) == 58.0);   // 1*7 + 2*9 + 3*11
  CHECK(c(0, 1) == 64.0);   // 1*8 + 2*10 + 3*12
  CHECK(c(1, 0) == 139.0);  // 4*7 + 5*9 + 6*11
  CHECK(c(1, 1) == 154.0);
}

TEST_CASE("transposed products agree with explicitly transposed inputs") {
  ita::Rng rng(3);
  Matrix a(4, 3), b(4, 5);
  for (double& v : a.values()) v = rng.uniform(-1, 1);
  for (double& v : b.values()) v = rng.uniform(-1, 1);

  Matrix at(3, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) at(j, i) = a(i, j);

  Matrix direct, reference;
  ita::matmul_at_b(a, b, direct);
  ita::matmul(at, b, reference);
  REQUIRE(direct.rows() == 3);
  REQUIRE(direct.cols() == 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(direct(i, j) == doctest::Approx(reference(i, j)).epsilon(1e-13));

  Matrix bt(5, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) bt(j, i) = b(i, j);
  Matrix direct2;
  ita::matmul_a_bt(at, bt, direct2);  // (3x4)(4x5) again
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(direct2(i, j) == doctest::Approx(reference(i, j)).epsilon(1e-13));
}

TEST_CASE("accumulating products add instead of overwrite") {
  Matrix a(2, 2), b(2, 2);
  a(0, 0) = 1;
  a(1, 1) = 1;  // identity
  b(0, 0) = 5;
  b(0, 1) = 6;
  b(1, 0) = 7;
  b(1, 1) = 8;

  Matrix out(2, 2, 1.0);
  ita::matmul_acc(a, b, out);
  CHECK(out(0, 0) == 6.0);
  CHECK(out(1, 1) == 9.0);
}

TEST_CASE("add_row_bias broadcasts over rows") {
  Matrix m(2, 3, 1.0);
  const Matrix bias = Matrix::row({10, 20, 30});
  ita::add_row_bias(m, bias);
  CHECK(m(0, 0) == 11.0);
  CHECK(m(1, 2) == 31.0);
}

TEST_CASE("log_sum_exp is exact on equal entries and immune to large shifts") {
  const double two[] = {0.0, 0.0};
  CHECK(ita::log_sum_exp(two, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const double big[] = {1000.0, 1000.0};
  CHECK(ita::log_sum_exp(big, 2) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));

  const double one[] = {-3.25};
  CHECK(ita::log_sum_exp(one, 1) == -3.25);

  const double mixed[] = {-1e30, 0.0};
  CHECK(ita::log_sum_exp(mixed, 2) == doctest::Approx(0.0));
}

TEST_CASE("dot and in-place helpers") {
  const double x[] = {1, 2, 3};
  const double y[] = {4, 5, 6};
  CHECK(ita::dot(x, y, 3) == 32.0);

  Matrix m(2, 2);
  m.fill(2.0);
  m.scale_inplace(0.5);
  CHECK(m(1, 1) == 1.0);

  Matrix other(2, 2);
  other.fill(3.0);
  m.axpy_inplace(2.0, other);  // 1 + 2*3
  CHECK(m(0, 1) == 7.0);

  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
}
