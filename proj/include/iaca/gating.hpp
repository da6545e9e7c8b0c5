#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "iaca/autodiff.hpp"
#include "iaca/errors.hpp"

namespace iaca {

struct JointParams {
  Var w_joint;  // d x 2d
  Var b_joint;  // d x 1
};

/// MLP head d -> h -> 1 with ReLU hidden activation and tanh output squashing.
struct HeadParams {
  Var w_hidden;  // h x d_in
  Var b_hidden;  // h x 1
  Var w_out;     // 1 x h
  Var b_out;     // 1 x 1
};

struct GateOutput {
  Var features;  // d x L, entrywise >= 0
  Var scores;    // L x K, rows on the simplex
};

namespace detail {

inline void require_temperature(double t, const char* op) {
  if (!(t > 0.0)) {
    throw DomainError(std::string(op) + ": temperature must be positive, got " + std::to_string(t));
  }
}

/// sum_k candidate_k (x) replicate(scores[:, k]) followed by ReLU.
inline Var gated_mixture(const std::vector<Var>& candidates, Var scores) {
  Var mix = mul_row(candidates[0], transpose(column(scores, 0)));
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    mix = add(mix, mul_row(candidates[k], transpose(column(scores, k))));
  }
  return relu(mix);
}

}  // namespace detail

/// First-stage gate for one modality. Score column 0 weights `x_base` (raw or
/// self-attended features), column 1 weights the cross-attended `x_att`.
inline GateOutput stage1_gate(Var x_base, Var x_att, Var w_gl, double temperature) {
  detail::require_temperature(temperature, "stage1_gate");
  if (!x_base.value().same_shape(x_att.value())) {
    throw ShapeError("stage1_gate: candidate shapes differ " + x_base.value().shape() + " vs " +
                     x_att.value().shape());
  }
  if (w_gl.rows() != x_att.rows() || w_gl.cols() != 2) {
    throw ShapeError("stage1_gate: expected gate weights " + Matrix::shape_string(x_att.rows(), 2) +
                     ", got " + w_gl.value().shape());
  }
  const Var logits = matmul(transpose(x_att), w_gl);
  const Var scores = softmax(logits, Axis::Rows, temperature);
  return {detail::gated_mixture({x_base, x_att}, scores), scores};
}

/// Concatenation + FC back to dimension d.
inline Var joint_representation(Var x_ga, Var x_gv, const JointParams& p) {
  if (!x_ga.value().same_shape(x_gv.value())) {
    throw ShapeError("joint_representation: shapes differ " + x_ga.value().shape() + " vs " +
                     x_gv.value().shape());
  }
  const std::size_t d = x_ga.rows();
  if (p.w_joint.rows() != d || p.w_joint.cols() != 2 * d) {
    throw ShapeError("joint_representation: expected weights " + Matrix::shape_string(d, 2 * d) +
                     ", got " + p.w_joint.value().shape());
  }
  return add_column(matmul(p.w_joint, concat_rows(x_ga, x_gv)), p.b_joint);
}

/// Second-stage gate over (audio, visual, joint). The gate reads all three
/// candidates for a clip stacked into one 3d column.
inline GateOutput stage2_gate(Var x_ga, Var x_gv, Var x_gav, Var w_avl, double temperature) {
  detail::require_temperature(temperature, "stage2_gate");
  if (!x_ga.value().same_shape(x_gv.value()) || !x_ga.value().same_shape(x_gav.value())) {
    throw ShapeError("stage2_gate: candidate shapes differ " + x_ga.value().shape() + ", " +
                     x_gv.value().shape() + ", " + x_gav.value().shape());
  }
  const std::size_t d = x_ga.rows();
  if (w_avl.rows() != 3 * d || w_avl.cols() != 3) {
    throw ShapeError("stage2_gate: expected gate weights " + Matrix::shape_string(3 * d, 3) +
                     ", got " + w_avl.value().shape());
  }
  const Var stacked = concat_rows(concat_rows(x_ga, x_gv), x_gav);
  const Var scores = softmax(matmul(transpose(stacked), w_avl), Axis::Rows, temperature);
  return {detail::gated_mixture({x_ga, x_gv, x_gav}, scores), scores};
}

/// Per-clip prediction in [-1, 1], returned as 1 x L.
inline Var predict(Var x_fused, const HeadParams& head) {
  if (head.w_hidden.cols() != x_fused.rows()) {
    throw ShapeError("predict: head expects " + std::to_string(head.w_hidden.cols()) +
                     " input rows, features are " + x_fused.value().shape());
  }
  const Var hidden = relu(add_column(matmul(head.w_hidden, x_fused), head.b_hidden));
  return tanh(add_column(matmul(head.w_out, hidden), head.b_out));
}

}  // namespace iaca
