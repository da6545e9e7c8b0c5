#pragma once
// Straight-line reference forward pass. Deliberately shares no code with the
// library kernels: plain nested loops over vector<vector<double>>, no graph.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "iaca/matrix.hpp"
#include "iaca/model.hpp"
#include "iaca/rng.hpp"

namespace ref {

using Grid = std::vector<std::vector<double>>;

inline Grid zeros(std::size_t r, std::size_t c) { return Grid(r, std::vector<double>(c, 0.0)); }

inline Grid from(const iaca::Matrix& m) {
  Grid g = zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline double max_diff(const Grid& g, const iaca::Matrix& m) {
  if (g.size() != m.rows() || g[0].size() != m.cols()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) worst = std::max(worst, std::fabs(g[i][j] - m(i, j)));
  return worst;
}

inline Grid mm(const Grid& a, const Grid& b) {
  Grid c = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

inline Grid tr(const Grid& a) {
  Grid t = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Grid plus(const Grid& a, const Grid& b) {
  Grid c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) c[i][j] += b[i][j];
  return c;
}

inline Grid plus_col(const Grid& a, const Grid& b) {
  Grid c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) c[i][j] += b[i][0];
  return c;
}

inline Grid scaled(Grid a, double s) {
  for (auto& row : a)
    for (auto& x : row) x *= s;
  return a;
}

inline Grid apply_tanh(Grid a) {
  for (auto& row : a)
    for (auto& x : row) x = std::tanh(x);
  return a;
}

inline Grid apply_relu(Grid a) {
  for (auto& row : a)
    for (auto& x : row) x = x < 0.0 ? 0.0 : x;
  return a;
}

inline Grid stack(const Grid& a, const Grid& b) {
  Grid c = a;
  c.insert(c.end(), b.begin(), b.end());
  return c;
}

inline Grid softmax_cols(const Grid& z, double t = 1.0) {
  Grid out = zeros(z.size(), z[0].size());
  for (std::size_t j = 0; j < z[0].size(); ++j) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < z.size(); ++i) mx = std::max(mx, z[i][j] / t);
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += std::exp(z[i][j] / t - mx);
    for (std::size_t i = 0; i < z.size(); ++i) out[i][j] = std::exp(z[i][j] / t - mx) / s;
  }
  return out;
}

inline Grid softmax_rows(const Grid& z, double t = 1.0) { return tr(softmax_cols(tr(z), t)); }

struct Pair {
  Grid xa, xv, aa, av;
};

inline Grid attend(const Grid& x, const Grid& a) { return apply_tanh(plus(x, mm(x, a))); }

inline Pair ca(const Grid& xa, const Grid& xv, const Grid& w, bool av_rows = false) {
  const Grid z = mm(mm(tr(xa), w), xv);
  Pair p;
  p.aa = softmax_cols(z);
  p.av = av_rows ? softmax_rows(tr(z)) : softmax_cols(tr(z));
  p.xa = attend(xa, p.aa);
  p.xv = attend(xv, p.av);
  return p;
}

inline Grid sa(const Grid& x, const Grid& w) { return attend(x, softmax_cols(mm(mm(tr(x), w), x))); }

struct TcaDir {
  Grid wq, wk, wv, w1, b1, w2, b2;
};

inline std::pair<Grid, Grid> tca_dir(const Grid& xq, const Grid& xc, const TcaDir& p) {
  const double d = static_cast<double>(xq.size());
  const Grid q = mm(p.wq, xq), k = mm(p.wk, xc), v = mm(p.wv, xc);
  const Grid weights = softmax_rows(scaled(mm(tr(q), k), 1.0 / std::sqrt(d)));
  const Grid h = plus(xq, mm(v, tr(weights)));
  const Grid ff = plus_col(mm(p.w2, apply_relu(plus_col(mm(p.w1, h), p.b1))), p.b2);
  return {apply_tanh(plus(h, ff)), weights};
}

inline Pair tca(const Grid& xa, const Grid& xv, const TcaDir& pa, const TcaDir& pv) {
  auto [oa, wa] = tca_dir(xa, xv, pa);
  auto [ov, wv] = tca_dir(xv, xa, pv);
  return {oa, ov, wa, wv};
}

struct Jca {
  Grid w_joint, b_joint, w_a, w_v;
};

inline Pair jca(const Grid& xa, const Grid& xv, const Jca& p) {
  const Grid j = plus_col(mm(p.w_joint, stack(xa, xv)), p.b_joint);
  Pair out;
  out.aa = softmax_cols(mm(mm(tr(xa), p.w_a), j));
  out.av = softmax_cols(mm(mm(tr(xv), p.w_v), j));
  out.xa = attend(xa, out.aa);
  out.xv = attend(xv, out.av);
  return out;
}

inline Grid mix(const std::vector<Grid>& cands, const Grid& g) {
  Grid out = zeros(cands[0].size(), cands[0][0].size());
  for (std::size_t k = 0; k < cands.size(); ++k)
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = 0; j < out[0].size(); ++j) out[i][j] += cands[k][i][j] * g[j][k];
  return apply_relu(out);
}

inline std::pair<Grid, Grid> stage1(const Grid& base, const Grid& att, const Grid& w_gl, double t) {
  const Grid g = softmax_rows(mm(tr(att), w_gl), t);
  return {mix({base, att}, g), g};
}

inline Grid joint(const Grid& ga, const Grid& gv, const Grid& w, const Grid& b) {
  return plus_col(mm(w, stack(ga, gv)), b);
}

inline std::pair<Grid, Grid> stage2(const Grid& ga, const Grid& gv, const Grid& gav, const Grid& w_avl, double t) {
  const Grid g = softmax_rows(mm(tr(stack(stack(ga, gv), gav)), w_avl), t);
  return {mix({ga, gv, gav}, g), g};
}

inline Grid head(const Grid& x, const Grid& wh, const Grid& bh, const Grid& wo, const Grid& bo) {
  return apply_tanh(plus_col(mm(wo, apply_relu(plus_col(mm(wh, x), bh))), bo));
}

struct Forward {
  Grid prediction, xa, xv, aa, av, gate_a, gate_v, gate_av;
};

inline Forward forward(const iaca::FusionModel& m, const iaca::Matrix& xa_m, const iaca::Matrix& xv_m) {
  using iaca::Variant;
  const auto& c = m.config();
  auto P = [&](const std::string& n) { return from(m.at(n)); };
  auto jp = [&](const std::string& pre) { return Jca{P(pre + "w_joint"), P(pre + "b_joint"), P(pre + "w_a"), P(pre + "w_v")}; };
  auto tp = [&](const std::string& pre) {
    return TcaDir{P(pre + "wq"), P(pre + "wk"), P(pre + "wv"), P(pre + "w1"), P(pre + "b1"), P(pre + "w2"), P(pre + "b2")};
  };
  const Grid xa = from(xa_m), xv = from(xv_m);
  Pair att;
  switch (c.variant) {
    case Variant::CA: att = ca(xa, xv, P("ca.w"), c.av_axis == iaca::Axis::Rows); break;
    case Variant::TCA: att = tca(xa, xv, tp("tca.a."), tp("tca.v.")); break;
    case Variant::JCA: att = jca(xa, xv, jp("jca.")); break;
    case Variant::RJCA:
      att = jca(xa, xv, jp("rjca.0."));
      for (std::size_t t = 1; t < c.rjca_iterations; ++t) {
        att = jca(att.xa, att.xv, jp("rjca." + std::to_string(c.rjca_shared ? 0 : t) + "."));
      }
      break;
  }
  Forward f;
  f.xa = att.xa;
  f.xv = att.xv;
  f.aa = att.aa;
  f.av = att.av;
  const Grid wh = P("head.w_hidden"), bh = P("head.b_hidden"), wo = P("head.w_out"), bo = P("head.b_out");
  if (!c.iaca) {
    f.prediction = head(joint(att.xa, att.xv, P("joint.w"), P("joint.b")), wh, bh, wo, bo);
    return f;
  }
  Grid base_a = xa, base_v = xv;
  if (c.stage1_input == iaca::Stage1Input::SelfAttended) {
    base_a = sa(xa, P("sa.a.w"));
    base_v = sa(xv, P("sa.v.w"));
  }
  auto [ga, gsa] = stage1(base_a, att.xa, P("gate.w_gl_a"), c.temperature);
  auto [gv, gsv] = stage1(base_v, att.xv, P("gate.w_gl_v"), c.temperature);
  const Grid gav = joint(ga, gv, P("joint.w"), P("joint.b"));
  auto [fused, gs2] = stage2(ga, gv, gav, P("gate.w_avl"), c.temperature);
  f.prediction = head(fused, wh, bh, wo, bo);
  f.gate_a = gsa;
  f.gate_v = gsv;
  f.gate_av = gs2;
  return f;
}

}  // namespace ref

namespace testutil {

inline iaca::Matrix randn(iaca::Rng& rng, std::size_t r, std::size_t c, double sd = 1.0) {
  iaca::Matrix m(r, c);
  for (auto& x : m.data()) x = sd * rng.normal();
  return m;
}

/// Starting model with every parameter (biases included) randomised so no
/// gradient path is trivially zero.
// gate_sd < 0 means "same as sd". Gate logits are divided by the temperature,
// so large gate weights saturate the softmax and flatten its gradient.
inline iaca::FusionModel random_model(const iaca::ModelConfig& cfg, std::uint64_t seed, double sd = 0.5,
                                      double gate_sd = -1.0) {
  iaca::FusionModel m = iaca::init_model(cfg, seed);
  iaca::Rng rng(iaca::derive_seed(seed, 99));
  for (auto& [name, value] : m.parameters()) {
    const double s = gate_sd >= 0.0 && name.rfind("gate.", 0) == 0 ? gate_sd : sd;
    for (auto& x : value.data()) x = s * rng.normal();
  }
  return m;
}

}  // namespace testutil
