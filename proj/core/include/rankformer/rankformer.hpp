#pragma once

#include <vector>

#include "rankformer/config.hpp"
#include "rankformer/graph.hpp"
#include "rankformer/types.hpp"

namespace rankformer {

// Per-layer cached aggregates. Everything here is recomputed from the current
// embeddings at the top of each layer; nothing survives across layers.
struct LayerWorkspace {
  Vec b_pos, b_neg;   // benchmark terms b_u^+ / b_u^-, length n
  Vec c_user;         // normalizers C_u, length n
  Vec c_item;         // normalizers C_i, length m
  Mat pos_item_sum;   // n x d, sum of item embeddings over N_u^+
  RowVec sum_item_emb;        // sum_{i in I} z_i
  Mat item_moment;            // d x d, sum_{i in I} z_i z_i^T
  Mat user_moment_scaled;     // d x d, sum_u z_u z_u^T / (m - d_u)
  RowVec user_scaled_sum;     // sum_u z_u / (m - d_u)
  RowVec user_bpos_scaled_sum;  // sum_u (b_u^+ + alpha) z_u / (m - d_u)
  double sum_bpos_scaled = 0.0;  // sum_u b_u^+ / (m - d_u)
  double sum_inv_mdu = 0.0;      // sum_u 1 / (m - d_u)

  // Degenerate users: d_u == 0 has no positive side, d_u == m has no
  // negative side. The undefined side of every formula is treated as zero.
  std::vector<std::uint8_t> user_no_positives;
  std::vector<std::uint8_t> user_no_negatives;
};

struct NormalizeReport {
  Index degenerate_rows = 0;  // rows with (near-)zero norm, returned unchanged
};

// Divides each row by max(norm, eps). Near-zero rows pass through and are
// counted in the report.
Mat normalize_rows(const Mat& z, double eps = 1e-12, NormalizeReport* report = nullptr);

// Step 1: benchmark terms plus the cached global sums they depend on.
void compute_benchmarks(const InteractionGraph& g, const Mat& z, LayerWorkspace& ws);

// Step 2: normalizers C_u, C_i. With unit rows and alpha >= 2 the absolute
// values drop and both sides reduce to closed forms; otherwise the positive
// side is an exact edge scan and the negative side a clamped closed form.
void compute_normalizers(const InteractionGraph& g, const Mat& z, double alpha,
                         bool closed_form_ok, double epsilon_div, LayerWorkspace& ws);

// Scalar attention weights, Eq.-level definitions. Used by the oracle and by
// tests; the fast path never materializes these per pair.
double attention_weight_pos(const InteractionGraph& g, const Mat& z, Index u, Index i,
                            const Vec& b_neg, double alpha);
double attention_weight_neg(const InteractionGraph& g, const Mat& z, Index u, Index i,
                            const Vec& b_pos, double alpha);

// One Rankformer layer via the linear-complexity aggregation:
// negative-side sums are rewritten through complement identities against the
// cached global moments, so no user-item pair is ever touched directly.
// Cost O((n+m) d^2 + E d). If `ws_out` is given the layer's workspace is
// copied out for inspection.
Mat rankformer_layer(const InteractionGraph& g, const Mat& z, const RankformerConfig& cfg,
                     LayerWorkspace* ws_out = nullptr);

// First-layer warm-up: uniform positive-only mean aggregation, no attention.
// Zero-degree rows are kept unchanged.
Mat warmup_layer(const InteractionGraph& g, const Mat& z, double tau);

struct ForwardOptions {
  bool keep_snapshots = false;
};

struct ForwardResult {
  Mat final;
  std::vector<Mat> snapshots;  // per-layer outputs incl. input, when requested
};

// Stacks cfg.layers layers (warm-up first when configured). Scoring consumes
// the final-layer embeddings via inner products.
ForwardResult rankformer_forward(const InteractionGraph& g, const Mat& z0,
                                 const RankformerConfig& cfg, const ForwardOptions& opts = {});

}  // namespace rankformer
