#pragma once

#include <cstddef>
#include <span>

#include "iaca/autodiff.hpp"
#include "iaca/errors.hpp"
#include "iaca/matrix.hpp"

namespace iaca {

struct CccResult {
  double value = 0.0;
  bool degenerate = false;  // denominator was zero; value forced to 0
};

namespace detail {

struct CccMoments {
  double mean_p = 0.0, mean_g = 0.0;
  double var_p = 0.0, var_g = 0.0, cov = 0.0;
  double denom() const { return var_p + var_g + (mean_p - mean_g) * (mean_p - mean_g); }
};

inline CccMoments ccc_moments(std::span<const double> p, std::span<const double> g) {
  CccMoments m;
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.mean_p += p[i];
    m.mean_g += g[i];
  }
  m.mean_p /= n;
  m.mean_g /= n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - m.mean_p;
    const double dg = g[i] - m.mean_g;
    m.var_p += dp * dp;
    m.var_g += dg * dg;
    m.cov += dp * dg;
  }
  m.var_p /= n;
  m.var_g /= n;
  m.cov /= n;
  return m;
}

inline void check_ccc_args(std::span<const double> p, std::span<const double> g) {
  if (p.size() != g.size()) {
    throw ShapeError("ccc: length mismatch " + std::to_string(p.size()) + " vs " +
                     std::to_string(g.size()));
  }
  if (p.size() < 2) throw DomainError("ccc: need at least 2 samples");
}

}  // namespace detail

/// Concordance correlation coefficient with population (1/N) moments.
inline CccResult ccc_checked(std::span<const double> pred, std::span<const double> gold) {
  detail::check_ccc_args(pred, gold);
  // Moments are accumulated symmetrically so that ccc(a, b) == ccc(b, a) bitwise.
  const auto m = detail::ccc_moments(pred, gold);
  const double denom = m.denom();
  if (denom == 0.0) return {0.0, true};
  return {2.0 * m.cov / denom, false};
}

inline double ccc(std::span<const double> pred, std::span<const double> gold) {
  return ccc_checked(pred, gold).value;
}

inline double ccc(const Matrix& pred, const Matrix& gold) {
  if (pred.rows() != 1 || gold.rows() != 1) {
    throw ShapeError("ccc: expected row vectors, got " + pred.shape() + " and " + gold.shape());
  }
  return ccc(pred.data(), gold.data());
}

/// 1 - CCC(pred, gold) as a differentiable scalar; gold is treated as a constant.
inline Var ccc_loss(Var pred, const Matrix& gold) {
  const Matrix& p = pred.value();
  if (p.rows() != 1 || gold.rows() != 1 || p.cols() != gold.cols()) {
    throw ShapeError("ccc_loss: expected matching row vectors, got " + p.shape() + " and " +
                     gold.shape());
  }
  detail::check_ccc_args(p.data(), gold.data());
  const auto m = detail::ccc_moments(p.data(), gold.data());
  const double denom = m.denom();
  const double n = static_cast<double>(p.cols());
  Matrix dloss(1, p.cols());
  double value = 0.0;
  if (denom != 0.0) {
    value = 2.0 * m.cov / denom;
    const double gap = m.mean_p - m.mean_g;
    for (std::size_t i = 0; i < p.cols(); ++i) {
      const double dp = p[i] - m.mean_p;
      const double dg = gold[i] - m.mean_g;
      const double dcov = dg / n;
      const double dden = 2.0 * dp / n + 2.0 * gap / n;
      const double dccc = 2.0 * (dcov * denom - m.cov * dden) / (denom * denom);
      dloss[i] = -dccc;
    }
  }
  Graph::Attr attr;
  attr.aux = std::move(dloss);
  return pred.graph->push(OpTag::CccLoss, Matrix(1, 1, 1.0 - value), {pred.id}, std::move(attr));
}

/// Relative improvement in percent, (after - before) / before * 100.
inline double relative_improvement_pct(double before, double after) {
  if (before == 0.0) throw DomainError("relative improvement undefined for a zero baseline");
  return (after - before) / before * 100.0;
}

}  // namespace iaca
