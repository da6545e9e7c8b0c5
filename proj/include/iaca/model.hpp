#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iaca/attention.hpp"
#include "iaca/autodiff.hpp"
#include "iaca/errors.hpp"
#include "iaca/gating.hpp"
#include "iaca/rng.hpp"

namespace iaca {

enum class Variant : std::uint8_t { CA, TCA, JCA, RJCA };
enum class Stage1Input : std::uint8_t { Raw, SelfAttended };

inline constexpr Variant kAllVariants[] = {Variant::CA, Variant::TCA, Variant::JCA, Variant::RJCA};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::CA: return "CA";
    case Variant::TCA: return "TCA";
    case Variant::JCA: return "JCA";
    case Variant::RJCA: return "RJCA";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (Variant v : kAllVariants)
    if (to_string(v) == s) return v;
  throw DomainError("unknown variant '" + std::string(s) + "' (expected CA, TCA, JCA or RJCA)");
}

inline std::string_view to_string(Axis a) { return a == Axis::Columns ? "columns" : "rows"; }

inline Axis parse_axis(std::string_view s) {
  if (s == "columns") return Axis::Columns;
  if (s == "rows") return Axis::Rows;
  throw DomainError("unknown axis '" + std::string(s) + "' (expected columns or rows)");
}

inline std::string_view to_string(Stage1Input s) {
  return s == Stage1Input::Raw ? "raw" : "self_attended";
}

inline Stage1Input parse_stage1_input(std::string_view s) {
  if (s == "raw") return Stage1Input::Raw;
  if (s == "self_attended") return Stage1Input::SelfAttended;
  throw DomainError("unknown stage1_input '" + std::string(s) + "' (expected raw or self_attended)");
}

struct ModelConfig {
  Variant variant = Variant::CA;
  bool iaca = true;
  std::size_t d = 32;
  std::size_t hidden = 16;
  double temperature = 0.1;
  Axis av_axis = Axis::Columns;
  Stage1Input stage1_input = Stage1Input::Raw;
  std::size_t rjca_iterations = 2;
  bool rjca_shared = true;

  void validate() const {
    if (d < 1 || hidden < 1) throw DomainError("model dimensions must be positive");
    if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
    if (variant == Variant::RJCA && rjca_iterations == 0) {
      throw DomainError("rjca_iterations must be >= 1");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Ordered, named parameter matrices of one model instance.
class FusionModel {
 public:
  FusionModel() = default;
  explicit FusionModel(ModelConfig cfg) : config_(cfg) { config_.validate(); }

  const ModelConfig& config() const noexcept { return config_; }

  void add(std::string name, Matrix value) {
    if (find(name) != nullptr) throw ContractError("duplicate parameter '" + name + "'");
    params_.emplace_back(std::move(name), std::move(value));
  }

  const Matrix* find(std::string_view name) const {
    for (const auto& [n, m] : params_)
      if (n == name) return &m;
    return nullptr;
  }
  Matrix& at(std::string_view name) {
    for (auto& [n, m] : params_)
      if (n == name) return m;
    throw ContractError("no parameter named '" + std::string(name) + "'");
  }
  const Matrix& at(std::string_view name) const { return const_cast<FusionModel*>(this)->at(name); }

  std::vector<std::pair<std::string, Matrix>>& parameters() noexcept { return params_; }
  const std::vector<std::pair<std::string, Matrix>>& parameters() const noexcept { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.second.size();
    return n;
  }

  friend bool operator==(const FusionModel&, const FusionModel&) = default;

 private:
  ModelConfig config_;
  std::vector<std::pair<std::string, Matrix>> params_;
};

namespace detail {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = stddev * rng.normal();
  return m;
}

inline std::vector<std::string> rjca_prefixes(const ModelConfig& c) {
  std::vector<std::string> out;
  const std::size_t n = c.rjca_shared ? 1 : c.rjca_iterations;
  for (std::size_t t = 0; t < n; ++t) out.push_back("rjca." + std::to_string(t) + ".");
  return out;
}

inline void add_jca(FusionModel& m, Rng& rng, const std::string& prefix, std::size_t d) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  m.add(prefix + "w_joint", random_matrix(rng, d, 2 * d, 1.0 / std::sqrt(2.0 * static_cast<double>(d))));
  m.add(prefix + "b_joint", Matrix(d, 1));
  m.add(prefix + "w_a", random_matrix(rng, d, d, sd / std::sqrt(static_cast<double>(d))));
  m.add(prefix + "w_v", random_matrix(rng, d, d, sd / std::sqrt(static_cast<double>(d))));
}

inline void add_tca_direction(FusionModel& m, Rng& rng, const std::string& prefix, std::size_t d) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (const char* name : {"wq", "wk", "wv"}) m.add(prefix + name, random_matrix(rng, d, d, sd));
  m.add(prefix + "w1", random_matrix(rng, d, d, sd));
  m.add(prefix + "b1", Matrix(d, 1));
  m.add(prefix + "w2", random_matrix(rng, d, d, 0.5 * sd));
  m.add(prefix + "b2", Matrix(d, 1));
}

}  // namespace detail

inline constexpr double kGateInit = 0.1;

/// Freshly initialised parameters for `cfg`, deterministic in `seed`.
inline FusionModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  FusionModel m(cfg);
  Rng rng(seed);
  const std::size_t d = cfg.d;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  switch (cfg.variant) {
    case Variant::CA:
      m.add("ca.w", detail::random_matrix(rng, d, d, sd / std::sqrt(static_cast<double>(d))));
      break;
    case Variant::TCA:
      detail::add_tca_direction(m, rng, "tca.a.", d);
      detail::add_tca_direction(m, rng, "tca.v.", d);
      break;
    case Variant::JCA:
      detail::add_jca(m, rng, "jca.", d);
      break;
    case Variant::RJCA:
      for (const auto& prefix : detail::rjca_prefixes(cfg)) detail::add_jca(m, rng, prefix, d);
      break;
  }
  if (cfg.iaca) {
    if (cfg.stage1_input == Stage1Input::SelfAttended) {
      m.add("sa.a.w", detail::random_matrix(rng, d, d, sd / std::sqrt(static_cast<double>(d))));
      m.add("sa.v.w", detail::random_matrix(rng, d, d, sd / std::sqrt(static_cast<double>(d))));
    }
    m.add("gate.w_gl_a", detail::random_matrix(rng, d, 2, kGateInit * sd));
    m.add("gate.w_gl_v", detail::random_matrix(rng, d, 2, kGateInit * sd));
    m.add("gate.w_avl", detail::random_matrix(rng, 3 * d, 3, kGateInit * sd / std::sqrt(3.0)));
  }
  m.add("joint.w", detail::random_matrix(rng, d, 2 * d, 1.0 / std::sqrt(2.0 * static_cast<double>(d))));
  m.add("joint.b", Matrix(d, 1));
  m.add("head.w_hidden", detail::random_matrix(rng, cfg.hidden, d, std::sqrt(2.0) * sd));
  m.add("head.b_hidden", Matrix(cfg.hidden, 1));
  m.add("head.w_out", detail::random_matrix(rng, 1, cfg.hidden, 1.0 / std::sqrt(static_cast<double>(cfg.hidden))));
  m.add("head.b_out", Matrix(1, 1));
  return m;
}

/// Parameters of a model placed on a graph as leaves, addressable by name.
class BoundParams {
 public:
  BoundParams(Graph& g, const FusionModel& m) {
    for (const auto& [name, value] : m.parameters()) vars_.emplace(name, g.leaf(value));
  }
  Var operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ContractError("model has no parameter '" + name + "'");
    return it->second;
  }
  const std::map<std::string, Var>& all() const noexcept { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

struct ForwardResult {
  Var prediction;  // 1 x L
  Var x_att_a, x_att_v;
  Var a_a, a_v;
  std::optional<Var> gate_a, gate_v, gate_av;  // present when IACA is enabled
};

inline JcaParams bind_jca(const BoundParams& p, const std::string& prefix) {
  return {p[prefix + "w_joint"], p[prefix + "b_joint"], p[prefix + "w_a"], p[prefix + "w_v"]};
}

inline TcaDirectionParams bind_tca(const BoundParams& p, const std::string& prefix) {
  return {p[prefix + "wq"], p[prefix + "wk"], p[prefix + "wv"], p[prefix + "w1"],
          p[prefix + "b1"], p[prefix + "w2"], p[prefix + "b2"]};
}

inline AttendedPair variant_attention(Var xa, Var xv, const BoundParams& p, const ModelConfig& cfg) {
  switch (cfg.variant) {
    case Variant::CA:
      return cross_attention(xa, xv, CrossAttentionParams{p["ca.w"]}, cfg.av_axis);
    case Variant::TCA:
      return tca_block(xa, xv, TcaParams{bind_tca(p, "tca.a."), bind_tca(p, "tca.v.")});
    case Variant::JCA:
      return joint_cross_attention(xa, xv, bind_jca(p, "jca."));
    case Variant::RJCA: {
      std::vector<JcaParams> sets;
      for (const auto& prefix : detail::rjca_prefixes(cfg)) sets.push_back(bind_jca(p, prefix));
      return recursive_jca(xa, xv, sets, cfg.rjca_iterations);
    }
  }
  throw ContractError("unreachable variant");
}

/// Variant attention, then either the two-stage gates or plain joint fusion, then the head.
inline ForwardResult iaca_forward(Var xa, Var xv, const BoundParams& p, const ModelConfig& cfg) {
  if (xa.rows() != cfg.d) {
    throw ShapeError("iaca_forward: model expects d=" + std::to_string(cfg.d) + ", features are " +
                     xa.value().shape());
  }
  const AttendedPair att = variant_attention(xa, xv, p, cfg);
  ForwardResult r{{}, att.x_att_a, att.x_att_v, att.a_a, att.a_v, {}, {}, {}};
  const JointParams joint{p["joint.w"], p["joint.b"]};
  const HeadParams head{p["head.w_hidden"], p["head.b_hidden"], p["head.w_out"], p["head.b_out"]};
  if (!cfg.iaca) {
    r.prediction = predict(joint_representation(att.x_att_a, att.x_att_v, joint), head);
    return r;
  }
  Var base_a = xa;
  Var base_v = xv;
  if (cfg.stage1_input == Stage1Input::SelfAttended) {
    base_a = self_attention(xa, SelfAttentionParams{p["sa.a.w"]});
    base_v = self_attention(xv, SelfAttentionParams{p["sa.v.w"]});
  }
  const auto ga = stage1_gate(base_a, att.x_att_a, p["gate.w_gl_a"], cfg.temperature);
  const auto gv = stage1_gate(base_v, att.x_att_v, p["gate.w_gl_v"], cfg.temperature);
  const Var x_gav = joint_representation(ga.features, gv.features, joint);
  const auto gav = stage2_gate(ga.features, gv.features, x_gav, p["gate.w_avl"], cfg.temperature);
  r.prediction = predict(gav.features, head);
  r.gate_a = ga.scores;
  r.gate_v = gv.scores;
  r.gate_av = gav.scores;
  return r;
}

/// Forward pass values detached from any graph.
struct ForwardValues {
  Matrix prediction;
  Matrix x_att_a, x_att_v;
  Matrix a_a, a_v;
  std::optional<Matrix> gate_a, gate_v, gate_av;
};

inline ForwardValues forward_values(const FusionModel& model, const Matrix& xa, const Matrix& xv) {
  Graph g;
  const BoundParams p(g, model);
  const auto r = iaca_forward(g.leaf(xa), g.leaf(xv), p, model.config());
  ForwardValues v{r.prediction.value(), r.x_att_a.value(), r.x_att_v.value(),
                  r.a_a.value(), r.a_v.value(), {}, {}, {}};
  if (r.gate_a) {
    v.gate_a = r.gate_a->value();
    v.gate_v = r.gate_v->value();
    v.gate_av = r.gate_av->value();
  }
  return v;
}

}  // namespace iaca
