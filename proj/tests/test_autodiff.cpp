#include <gtest/gtest.h>

#include "iaca/autodiff.hpp"
#include "oracle.hpp"

using namespace iaca;

namespace {

// Builds a fresh graph, evaluates f(x) and returns d f / d x from backward().
template <typename F>
Matrix tape_grad(const Matrix& x, F&& build) {
  Graph g;
  const Var v = g.leaf(x);
  g.backward(build(v));
  return g.grad(v);
}

template <typename F>
double tape_value(const Matrix& x, F&& build) {
  Graph g;
  return build(g.leaf(x)).value()(0, 0);
}

template <typename F>
void expect_fd_match(const Matrix& x, F build, double tol = 1e-4) {
  const Matrix analytic = tape_grad(x, build);
  const Matrix numeric = finite_diff([&](const Matrix& p) { return tape_value(p, build); }, x);
  EXPECT_LT(relative_error(analytic, numeric), tol);
}

}  // namespace

TEST(Backward, SumGivesOnes) {
  Rng rng(1);
  const Matrix x = testutil::randn(rng, 3, 4);
  EXPECT_EQ(tape_grad(x, [](Var v) { return sum(v); }), Matrix::ones(3, 4));
}

TEST(Backward, SumTanhAtZero) {
  EXPECT_EQ(tape_grad(Matrix(2, 3), [](Var v) { return sum(tanh(v)); }), Matrix::ones(2, 3));
}

TEST(Backward, MatmulGradient) {
  Rng rng(2);
  const Matrix a = testutil::randn(rng, 3, 4), b = testutil::randn(rng, 4, 2);
  Graph g;
  const Var va = g.leaf(a), vb = g.leaf(b);
  g.backward(sum(matmul(va, vb)));
  EXPECT_LT(max_abs_diff(g.grad(va), matmul(Matrix::ones(3, 2), transpose(b))), 1e-14);
  const Matrix fd = finite_diff([&](const Matrix& p) { return sum(matmul(p, b)); }, a, 1e-6);
  EXPECT_LT(max_abs_diff(g.grad(va), fd), 1e-8);
}

TEST(Backward, RejectsNonScalarSeed) {
  Graph g;
  const Var v = g.leaf(Matrix(2, 2));
  EXPECT_THROW(g.backward(tanh(v)), ContractError);
}

TEST(Backward, SecondCallIsStateError) {
  Graph g;
  const Var v = g.leaf(Matrix(2, 2));
  const Var s = sum(v);
  g.backward(s);
  EXPECT_THROW(g.backward(s), StateError);
  EXPECT_THROW(tanh(v), StateError);
}

TEST(Backward, SeedGradIsOneAndShapesMatch) {
  Rng rng(3);
  Graph g;
  const Var x = g.leaf(testutil::randn(rng, 3, 5));
  const Var y = tanh(matmul(transpose(x), x));
  const Var s = sum(y);
  g.backward(s);
  EXPECT_EQ(g.grad(s), Matrix{{1.0}});
  EXPECT_EQ(g.grad(y).shape(), y.value().shape());
  EXPECT_EQ(g.grad(x).shape(), x.value().shape());
}

TEST(Backward, UnreachableNodeHasZeroGrad) {
  Graph g;
  const Var a = g.leaf(Matrix::ones(2, 2));
  const Var b = g.leaf(Matrix::ones(2, 2));
  g.backward(sum(a));
  EXPECT_EQ(g.grad(b), Matrix(2, 2));
}

TEST(Backward, RepeatedUseAccumulates) {
  Graph g;
  const Var x = g.leaf(Matrix{{3.0}});
  g.backward(sum(hadamard(x, x)));
  EXPECT_DOUBLE_EQ(g.grad(x)(0, 0), 6.0);
}

TEST(FiniteDiff, Examples) {
  Rng rng(4);
  const Matrix x = testutil::randn(rng, 3, 3);
  EXPECT_LT(max_abs_diff(finite_diff([](const Matrix& p) { return sum(p); }, x), Matrix::ones(3, 3)), 1e-9);
  const Matrix g = finite_diff([](const Matrix& p) { return sum(hadamard(p, p)); }, Matrix{{1, 2}}, 1e-5);
  EXPECT_NEAR(g(0, 0), 2.0, 1e-6);
  EXPECT_NEAR(g(0, 1), 4.0, 1e-6);
}

TEST(Backward, EachOpMatchesFiniteDifferences) {
  Rng rng(5);
  const Matrix x = testutil::randn(rng, 4, 3);
  const Matrix w = testutil::randn(rng, 3, 4);
  const Matrix col = testutil::randn(rng, 4, 1);
  const Matrix row = testutil::randn(rng, 1, 3);
  const Matrix offset = testutil::randn(rng, 4, 3);
  auto c = [](Graph& g, const Matrix& m) { return g.leaf(m); };
  expect_fd_match(x, [&](Var v) { return sum(tanh(matmul(v, c(*v.graph, w)))); });
  expect_fd_match(x, [&](Var v) { return sum(hadamard(tanh(v), v)); });
  expect_fd_match(x, [&](Var v) { return sum(scale(sub(v, tanh(v)), 0.7)); });
  expect_fd_match(x, [&](Var v) { return sum(tanh(transpose(v))); });
  expect_fd_match(x, [&](Var v) { return sum(tanh(concat_rows(v, scale(v, 2.0)))); });
  expect_fd_match(x, [&](Var v) { return sum(tanh(concat_cols(v, v))); });
  expect_fd_match(x, [&](Var v) { return sum(relu(add(v, c(*v.graph, offset)))); });
  expect_fd_match(x, [&](Var v) { return sum(tanh(add_column(v, c(*v.graph, col)))); });
  expect_fd_match(x, [&](Var v) { return sum(tanh(mul_row(v, c(*v.graph, row)))); });
  expect_fd_match(x, [&](Var v) { return sum(tanh(column(v, 1))); });
  // Gradients into the broadcast operands too.
  expect_fd_match(col, [&](Var b) { return sum(tanh(add_column(c(*b.graph, x), b))); });
  expect_fd_match(row, [&](Var r) { return sum(tanh(mul_row(c(*r.graph, x), r))); });
  for (Axis ax : {Axis::Columns, Axis::Rows}) {
    for (double t : {1.0, 0.3}) {
      const Matrix weights = testutil::randn(rng, 4, 3);
      expect_fd_match(x, [&](Var v) { return sum(hadamard(softmax(v, ax, t), c(*v.graph, weights))); });
    }
  }
}

TEST(Backward, RandomCompositesMatchFiniteDifferences) {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t r = 1 + rng.below(16), k = 1 + rng.below(16);
    const Matrix x = testutil::randn(rng, r, k);
    const Matrix w = testutil::randn(rng, k, r, 0.3);
    const Matrix m = testutil::randn(rng, r, r);
    expect_fd_match(x, [&](Var v) {
      Graph& g = *v.graph;
      const Var a = softmax(matmul(v, g.leaf(w)), rep % 2 ? Axis::Rows : Axis::Columns);
      return sum(hadamard(tanh(add(a, matmul(v, transpose(v)))), g.leaf(m)));
    });
  }
}

TEST(RelativeError, Basics) {
  EXPECT_EQ(relative_error(Matrix(2, 2), Matrix(2, 2)), 0.0);
  EXPECT_NEAR(relative_error(Matrix{{1.0}}, Matrix{{1.1}}), 0.1 / 1.1, 1e-15);
}
