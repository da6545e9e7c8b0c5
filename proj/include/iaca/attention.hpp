#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "iaca/autodiff.hpp"
#include "iaca/errors.hpp"

namespace iaca {

/// Cross-correlation weights W (d x d).
struct CrossAttentionParams {
  Var w;
};

/// Intra-modal attention weights W_s (d x d).
struct SelfAttentionParams {
  Var w;
};

/// One direction of the transformer-style block: queries from one modality,
/// keys and values from the other, then a per-clip feed-forward layer.
struct TcaDirectionParams {
  Var wq, wk, wv;   // d x d
  Var w1, b1;       // d x d, d x 1
  Var w2, b2;       // d x d, d x 1
};

struct TcaParams {
  TcaDirectionParams audio;   // audio queries attend to visual keys/values
  TcaDirectionParams visual;  // visual queries attend to audio keys/values
};

/// Joint-feature cross-attention: J = W_j [xa; xv] + b_j, each modality attends against J.
struct JcaParams {
  Var w_joint;  // d x 2d
  Var b_joint;  // d x 1
  Var w_a;      // d x d
  Var w_v;      // d x d
};

/// Attended features plus the attention maps that produced them.
struct AttendedPair {
  Var x_att_a;
  Var x_att_v;
  Var a_a;
  Var a_v;
};

namespace detail {

inline void require_pair(Var xa, Var xv, const char* op) {
  if (xa.rows() != xv.rows() || xa.cols() != xv.cols()) {
    throw ShapeError(std::string(op) + ": modality shapes differ " + xa.value().shape() + " vs " +
                     xv.value().shape());
  }
}

inline void require_square(Var w, std::size_t d, const char* op) {
  if (w.rows() != d || w.cols() != d) {
    throw ShapeError(std::string(op) + ": expected weights " + Matrix::shape_string(d, d) +
                     ", got " + w.value().shape());
  }
}

/// tanh(x + x A): the residual attention pattern shared by every variant.
inline Var residual_attend(Var x, Var attention) { return tanh(add(x, matmul(x, attention))); }

}  // namespace detail

/// Z = xa^T W xv, an L x L cross-correlation between clips of the two modalities.
inline Var cross_correlation(Var xa, Var xv, const CrossAttentionParams& p) {
  detail::require_pair(xa, xv, "cross_correlation");
  detail::require_square(p.w, xa.rows(), "cross_correlation");
  return matmul(transpose(xa), matmul(p.w, xv));
}

/// A_a = column softmax of Z; A_v = softmax of Z^T along `av_axis` (columns by default).
inline AttendedPair cross_attention(Var xa, Var xv, const CrossAttentionParams& p,
                                    Axis av_axis = Axis::Columns) {
  const Var z = cross_correlation(xa, xv, p);
  const Var a_a = softmax(z, Axis::Columns);
  const Var a_v = softmax(transpose(z), av_axis);
  return {detail::residual_attend(xa, a_a), detail::residual_attend(xv, a_v), a_a, a_v};
}

/// tanh(x + x softmax_columns(x^T W_s x)).
inline Var self_attention(Var x, const SelfAttentionParams& p) {
  detail::require_square(p.w, x.rows(), "self_attention");
  const Var z = matmul(transpose(x), matmul(p.w, x));
  return detail::residual_attend(x, softmax(z, Axis::Columns));
}

struct TcaDirectionOutput {
  Var out;
  Var weights;  // L x L, rows are queries
};

inline TcaDirectionOutput tca_direction(Var x_query, Var x_context, const TcaDirectionParams& p) {
  const std::size_t d = x_query.rows();
  for (Var w : {p.wq, p.wk, p.wv, p.w1, p.w2}) detail::require_square(w, d, "tca_block");
  const Var q = matmul(p.wq, x_query);
  const Var k = matmul(p.wk, x_context);
  const Var v = matmul(p.wv, x_context);
  const Var scores = scale(matmul(transpose(q), k), 1.0 / std::sqrt(static_cast<double>(d)));
  const Var weights = softmax(scores, Axis::Rows);
  const Var h = add(x_query, matmul(v, transpose(weights)));
  const Var ff = add_column(matmul(p.w2, relu(add_column(matmul(p.w1, h), p.b1))), p.b2);
  // Bounded like the other variants so the gates see features on a common scale.
  return {tanh(add(h, ff)), weights};
}

inline AttendedPair tca_block(Var xa, Var xv, const TcaParams& p) {
  detail::require_pair(xa, xv, "tca_block");
  const auto a = tca_direction(xa, xv, p.audio);
  const auto v = tca_direction(xv, xa, p.visual);
  return {a.out, v.out, a.weights, v.weights};
}

inline Var joint_feature(Var xa, Var xv, Var w_joint, Var b_joint) {
  const std::size_t d = xa.rows();
  if (w_joint.rows() != d || w_joint.cols() != 2 * d) {
    throw ShapeError("joint feature: expected weights " + Matrix::shape_string(d, 2 * d) +
                     ", got " + w_joint.value().shape());
  }
  return add_column(matmul(w_joint, concat_rows(xa, xv)), b_joint);
}

inline AttendedPair joint_cross_attention(Var xa, Var xv, const JcaParams& p) {
  detail::require_pair(xa, xv, "joint_cross_attention");
  const Var j = joint_feature(xa, xv, p.w_joint, p.b_joint);
  detail::require_square(p.w_a, xa.rows(), "joint_cross_attention");
  detail::require_square(p.w_v, xa.rows(), "joint_cross_attention");
  const Var a_a = softmax(matmul(transpose(xa), matmul(p.w_a, j)), Axis::Columns);
  const Var a_v = softmax(matmul(transpose(xv), matmul(p.w_v, j)), Axis::Columns);
  return {detail::residual_attend(xa, a_a), detail::residual_attend(xv, a_v), a_a, a_v};
}

/// Applies joint_cross_attention `iterations` times, feeding outputs back in.
/// `params` holds one entry when weights are shared, otherwise one per iteration.
inline AttendedPair recursive_jca(Var xa, Var xv, const std::vector<JcaParams>& params,
                                  std::size_t iterations) {
  if (iterations == 0) throw DomainError("recursive_jca: iterations must be >= 1");
  if (params.size() != 1 && params.size() != iterations) {
    throw ContractError("recursive_jca: expected 1 or " + std::to_string(iterations) +
                        " parameter sets, got " + std::to_string(params.size()));
  }
  AttendedPair out = joint_cross_attention(xa, xv, params[0]);
  for (std::size_t t = 1; t < iterations; ++t) {
    out = joint_cross_attention(out.x_att_a, out.x_att_v, params[params.size() == 1 ? 0 : t]);
  }
  return out;
}

}  // namespace iaca
