#include <gtest/gtest.h>

#include <cmath>

#include "iaca/matrix.hpp"
#include "oracle.hpp"

using namespace iaca;

TEST(Matrix, IdentityTimesB) {
  Rng rng(3);
  const Matrix b = testutil::randn(rng, 2, 5);
  EXPECT_EQ(matmul(Matrix::identity(2), b), b);
}

TEST(Matrix, HandProduct) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{1}, {1}};
  EXPECT_EQ(matmul(a, b), (Matrix{{3}, {7}}));
}

TEST(Matrix, ShapeErrorNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_GE(std::count(msg.begin(), msg.end(), 'x'), 2) << msg;
  }
  EXPECT_THROW(add(Matrix(2, 2), Matrix(2, 3)), ShapeError);
  EXPECT_THROW(hadamard(Matrix(1, 2), Matrix(2, 1)), ShapeError);
  EXPECT_THROW(concat_rows(Matrix(2, 2), Matrix(2, 3)), ShapeError);
}

TEST(Matrix, TransposedProductsAgree) {
  Rng rng(5);
  const Matrix a = testutil::randn(rng, 4, 3), b = testutil::randn(rng, 4, 5), c = testutil::randn(rng, 6, 3);
  EXPECT_LT(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)), 1e-14);
  EXPECT_LT(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))), 1e-14);
}

TEST(Softmax, UniformOnZeros) {
  const Matrix s = softmax(Matrix(4, 1), Axis::Columns, 1.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s(i, 0), 0.25);
}

TEST(Softmax, LogRatios) {
  const Matrix s = softmax(Matrix{{std::log(1.0)}, {std::log(3.0)}}, Axis::Columns, 1.0);
  EXPECT_NEAR(s(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(s(1, 0), 0.75, 1e-15);
}

TEST(Softmax, SharpensAtLowTemperature) {
  const Matrix s = softmax(Matrix{{1}, {2}}, Axis::Columns, 0.01);
  EXPECT_NEAR(s(0, 0), 0.0, 1e-8);
  EXPECT_NEAR(s(1, 0), 1.0, 1e-8);
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW(softmax(Matrix(2, 2), Axis::Rows, 0.0), DomainError);
  EXPECT_THROW(softmax(Matrix(2, 2), Axis::Rows, -1.0), DomainError);
}

TEST(Softmax, SlicesSumToOneOnWideRange) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix m(6, 7);
    for (auto& x : m.data()) x = rng.uniform(-700.0, 700.0);
    for (Axis ax : {Axis::Columns, Axis::Rows}) {
      const Matrix s = softmax(m, ax);
      ASSERT_TRUE(s.all_finite());
      const std::size_t n = ax == Axis::Columns ? m.cols() : m.rows();
      for (std::size_t k = 0; k < n; ++k) {
        double total = 0.0;
        for (std::size_t i = 0; i < (ax == Axis::Columns ? m.rows() : m.cols()); ++i) {
          total += ax == Axis::Columns ? s(i, k) : s(k, i);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
    }
  }
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix m = testutil::randn(rng, 5, 4, 3.0);
    const double c = rng.uniform(-50.0, 50.0);
    Matrix shifted = m;
    for (auto& x : shifted.data()) x += c;
    EXPECT_LT(max_abs_diff(softmax(m, Axis::Columns), softmax(shifted, Axis::Columns)), 1e-12);
    EXPECT_LT(max_abs_diff(softmax(m, Axis::Rows), softmax(shifted, Axis::Rows)), 1e-12);
  }
}

TEST(Elementwise, Examples) {
  EXPECT_EQ(tanh(Matrix(3, 2)), Matrix(3, 2));
  EXPECT_EQ(relu(Matrix{{-1, 2}}), (Matrix{{0, 2}}));
  EXPECT_NEAR(tanh(Matrix{{1.0}})(0, 0), 0.761594, 1e-6);
  EXPECT_EQ(relu(Matrix{{0.0}})(0, 0), 0.0);
}

TEST(Matrix, StructuralIdentities) {
  Rng rng(13);
  const Matrix m = testutil::randn(rng, 3, 5);
  EXPECT_EQ(hadamard(m, Matrix::ones(3, 5)), m);
  EXPECT_EQ(concat_rows(m, m).rows(), 6u);
  EXPECT_EQ(concat_rows(m, m).cols(), 5u);
  EXPECT_EQ(transpose(transpose(m)), m);
}

TEST(Matrix, MatmulAssociative) {
  Rng rng(14);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix a = testutil::randn(rng, 4, 6), b = testutil::randn(rng, 6, 5), c = testutil::randn(rng, 5, 3);
    EXPECT_LT(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-9);
  }
}

TEST(Matrix, AgreesWithReferenceProduct) {
  Rng rng(15);
  const Matrix a = testutil::randn(rng, 7, 4), b = testutil::randn(rng, 4, 9);
  EXPECT_LT(ref::max_diff(ref::mm(ref::from(a), ref::from(b)), matmul(a, b)), 1e-13);
}
