#include <gtest/gtest.h>

#include <vector>

#include "iaca/metrics.hpp"
#include "oracle.hpp"

using namespace iaca;

namespace {

// Textbook two-pass CCC in long double, population moments.
double ccc_reference(const std::vector<double>& p, const std::vector<double>& g) {
  const long double n = static_cast<long double>(p.size());
  long double mp = 0, mg = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mg += g[i];
  }
  mp /= n;
  mg /= n;
  long double vp = 0, vg = 0, cov = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    vp += (p[i] - mp) * (p[i] - mp);
    vg += (g[i] - mg) * (g[i] - mg);
    cov += (p[i] - mp) * (g[i] - mg);
  }
  vp /= n;
  vg /= n;
  cov /= n;
  return static_cast<double>(2 * cov / (vp + vg + (mp - mg) * (mp - mg)));
}

}  // namespace

TEST(Ccc, TaggedExamples) {
  const std::vector<double> g{0.1, -0.4, 0.7, 0.2, -0.9};
  EXPECT_DOUBLE_EQ(ccc(g, g), 1.0);
  const std::vector<double> sym{-1.0, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(ccc(sym, std::vector<double>{1.0, -0.5, -0.5}), -1.0);
  EXPECT_DOUBLE_EQ(ccc(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}), 0.0);
}

TEST(Ccc, Errors) {
  EXPECT_THROW(ccc(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(ccc(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
  const auto r = ccc_checked(std::vector<double>{0.3, 0.3}, std::vector<double>{0.3, 0.3});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_FALSE(ccc_checked(std::vector<double>{1, 2}, std::vector<double>{2, 1}).degenerate);
}

TEST(Ccc, RandomSymmetryAndBounds) {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> a(n), b(n);
    const double shift = rng.uniform(-2.0, 2.0), spread = rng.uniform(0.01, 3.0);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = shift + spread * (rng.uniform() < 0.5 ? a[i] : rng.normal());
    }
    const double ab = ccc(a, b), ba = ccc(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, ccc_reference(a, b), 1e-12);
  }
}

TEST(Ccc, PenalisesScaleUnlikePearson) {
  Rng rng(2);
  std::vector<double> a(20), a2(20);
  for (std::size_t i = 0; i < 20; ++i) {
    a[i] = rng.normal();
    a2[i] = 2 * a[i];
  }
  EXPECT_LT(ccc(a, a2), 1.0);
}

TEST(CccLoss, ValuesAndRange) {
  Rng rng(3);
  const Matrix gold = testutil::randn(rng, 1, 10);
  Graph g;
  EXPECT_NEAR(ccc_loss(g.leaf(gold), gold).value()(0, 0), 0.0, 1e-15);
  for (int rep = 0; rep < 50; ++rep) {
    Graph h;
    const double loss = ccc_loss(h.leaf(testutil::randn(rng, 1, 10)), gold).value()(0, 0);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 2.0);
  }
  EXPECT_THROW(ccc_loss(g.leaf(Matrix(1, 1)), Matrix(1, 1)), DomainError);
  EXPECT_THROW(ccc_loss(g.leaf(Matrix(1, 3)), Matrix(1, 4)), ShapeError);
}

TEST(CccLoss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 2 + rng.below(30);
    const Matrix gold = testutil::randn(rng, 1, n), pred = testutil::randn(rng, 1, n);
    Graph g;
    const Var p = g.leaf(pred);
    g.backward(ccc_loss(p, gold));
    const Matrix fd = finite_diff([&](const Matrix& x) { return 1.0 - ccc(x, gold); }, pred);
    EXPECT_LT(relative_error(g.grad(p), fd), 1e-4);
  }
}

struct PublishedPair {
  const char* label;
  double before, after, delta;
};

TEST(RelativeImprovement, ReproducesPublishedDeltas) {
  const PublishedPair pairs[] = {
      {"CA valence", 0.541, 0.632, 16.8},   {"CA arousal", 0.517, 0.597, 15.5},
      {"TCA valence", 0.564, 0.637, 12.9},  {"TCA arousal", 0.543, 0.629, 15.8},
      {"JCA valence", 0.657, 0.693, 5.5},   {"JCA arousal", 0.580, 0.609, 5.0},
      {"RJCA valence", 0.721, 0.749, 3.9},  {"RJCA arousal", 0.694, 0.725, 4.5},
  };
  for (const auto& p : pairs) {
    EXPECT_NEAR(relative_improvement_pct(p.before, p.after), p.delta, 0.1) << p.label;
  }
  EXPECT_THROW(relative_improvement_pct(0.0, 0.5), DomainError);
}
