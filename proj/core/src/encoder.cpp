#include "rankformer/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace rankformer {

Mat encoder_forward(const InteractionGraph& g, const Mat& z0, const EncoderConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case EncoderConfig::Kind::rankformer:
      return rankformer_forward(g, z0, cfg.rankformer).final;
    case EncoderConfig::Kind::mf:
      return z0;
    case EncoderConfig::Kind::lightgcn:
      return baseline_forward(g, z0, cfg.baseline);
  }
  throw std::logic_error("unknown encoder kind");
}

namespace {

using Var = ad::Tape::Var;
using Edges = ad::Tape::Edges;

// Graph-derived constants reused across layers.
struct GraphConsts {
  Edges edges;
  Vec inv_du;        // 1/d_u, 0 when d_u == 0
  Vec inv_mdu;       // 1/(m - d_u), 0 when d_u == m
  Vec side_count;    // rows of C_u: 2, or 1 when one side is missing
  Vec has_negatives; // 1 when d_u < m
  Vec user_zero_deg, item_zero_deg;
  Vec inv_di;        // 1/d_i, 0 when d_i == 0
  Vec inv_du_e, inv_mdu_e;  // per-edge gathers
  Vec lightgcn_w_e;         // 1/sqrt(d_u d_i)
  Vec alpha_gi_pos;         // per-item alpha * sum_{u in N_i+} 1/d_u
  Vec alpha_gi_neg;         // per-item alpha * (t3 - sum_{u in N_i+} 1/(m-d_u))
};

GraphConsts make_graph_consts(const InteractionGraph& g, double alpha) {
  GraphConsts c;
  c.edges = ad::Tape::make_edge_list(g);
  const Index n = g.n, m = g.m;
  c.inv_du.setZero(n);
  c.inv_mdu.setZero(n);
  c.side_count.setZero(n);
  c.has_negatives.setZero(n);
  c.user_zero_deg.setZero(n);
  for (Index u = 0; u < n; ++u) {
    const Index du = g.user_degree[u];
    if (du > 0) c.inv_du[u] = 1.0 / static_cast<double>(du);
    if (du < m) {
      c.inv_mdu[u] = 1.0 / static_cast<double>(m - du);
      c.has_negatives[u] = 1.0;
    }
    c.side_count[u] = (du > 0 ? 1.0 : 0.0) + (du < m ? 1.0 : 0.0);
    if (du == 0) c.user_zero_deg[u] = 1.0;
  }
  c.inv_di.setZero(m);
  c.item_zero_deg.setZero(m);
  for (Index i = 0; i < m; ++i) {
    if (g.item_degree[i] > 0) {
      c.inv_di[i] = 1.0 / static_cast<double>(g.item_degree[i]);
    } else {
      c.item_zero_deg[i] = 1.0;
    }
  }
  const std::size_t ne = c.edges->size();
  c.inv_du_e.resize(ne);
  c.inv_mdu_e.resize(ne);
  c.lightgcn_w_e.resize(ne);
  for (std::size_t k = 0; k < ne; ++k) {
    const Index u = c.edges->u[k], i = c.edges->i[k];
    c.inv_du_e[k] = c.inv_du[u];
    c.inv_mdu_e[k] = c.inv_mdu[u];
    c.lightgcn_w_e[k] =
        1.0 / std::sqrt(static_cast<double>(g.user_degree[u]) * static_cast<double>(g.item_degree[i]));
  }
  double t3 = c.inv_mdu.sum();
  c.alpha_gi_pos.setZero(m);
  c.alpha_gi_neg.setConstant(m, alpha * t3);
  for (std::size_t k = 0; k < ne; ++k) {
    const Index u = c.edges->u[k], i = c.edges->i[k];
    c.alpha_gi_pos[i] += alpha * c.inv_du[u];
    c.alpha_gi_neg[i] -= alpha * c.inv_mdu[u];
  }
  return c;
}

struct Pair {
  Var users, items;
};

Pair warmup_tape_layer(ad::Tape& t, const GraphConsts& gc, Pair z, double tau) {
  const Vec ones = Vec::Ones(static_cast<Index>(gc.edges->size()));
  Var pu = t.scatter_to_users_c(ones, z.items, gc.edges);
  Var out_u = t.add(t.scale(z.users, 1.0 - tau), t.rows_scale(pu, tau * gc.inv_du));
  out_u = t.add(out_u, t.rows_scale(z.users, tau * gc.user_zero_deg));
  Var pi = t.scatter_to_items_c(ones, z.users, gc.edges);
  Var out_i = t.add(t.scale(z.items, 1.0 - tau), t.rows_scale(pi, tau * gc.inv_di));
  out_i = t.add(out_i, t.rows_scale(z.items, tau * gc.item_zero_deg));
  return {out_u, out_i};
}

Pair lightgcn_tape_layer(ad::Tape& t, const GraphConsts& gc, Pair z) {
  Var out_u = t.scatter_to_users_c(gc.lightgcn_w_e, z.items, gc.edges);
  Var out_i = t.scatter_to_items_c(gc.lightgcn_w_e, z.users, gc.edges);
  return {out_u, out_i};
}

// One Rankformer layer recorded with gradients flowing through the attention
// weights and normalizers. Mirrors the fast-path algebra in rankformer.cpp.
Pair rankformer_tape_layer_through(ad::Tape& t, const GraphConsts& gc, Pair z,
                                   const RankformerConfig& cfg) {
  const Index n = gc.edges->n, m = gc.edges->m;
  const double tau = cfg.tau, alpha = cfg.alpha, eps = cfg.epsilon_div;

  Var zu = cfg.normalize_embeddings ? t.row_normalize(z.users, eps) : z.users;
  Var zi = cfg.normalize_embeddings ? t.row_normalize(z.items, eps) : z.items;

  const Vec ones = Vec::Ones(static_cast<Index>(gc.edges->size()));
  Var p = t.scatter_to_users_c(ones, zi, gc.edges);  // sum of positive items
  Var si = t.col_sum(zi);
  Var si_rep = t.repeat_row(si, n);
  Var dpos = t.row_dot(zu, p);
  Var b_pos = t.rows_scale(dpos, gc.inv_du);
  Var b_neg = t.rows_scale(t.sub(t.row_dot(zu, si_rep), dpos), gc.inv_mdu);

  Var w = t.edge_dot(zu, zi, gc.edges);
  Var q = t.scatter_to_users(w, zi, gc.edges);  // sum (z_u.z_i) z_i over N_u+
  Var mi = t.matmul_tn(zi, zi);
  Var r = t.sub(t.matmul(zu, mi), q);

  Var coef_pos = t.rows_scale(t.add_const(b_neg, -alpha), gc.inv_du);   // (b- - a)/d_u
  Var coef_neg = t.rows_scale(t.add_const(b_pos, alpha), gc.inv_mdu);   // (b+ + a)/(m-d_u)

  Var agg_u = t.sub(t.rows_scale(q, gc.inv_du), t.rows_scale_var(p, coef_pos));
  Var p_neg = t.sub(si_rep, p);
  agg_u = t.add(agg_u, t.sub(t.rows_scale(r, gc.inv_mdu), t.rows_scale_var(p_neg, coef_neg)));

  // Item aggregation.
  Var w_du = t.rows_scale(w, gc.inv_du_e);
  Var fp = t.scatter_to_items(w_du, zu, gc.edges);
  Var sp = t.scatter_to_items(t.gather_user(coef_pos, gc.edges), zu, gc.edges);
  Var agg_i = t.sub(fp, sp);

  Var zu_scaled = t.rows_scale(zu, gc.inv_mdu);
  Var mu = t.matmul_tn(zu_scaled, zu);
  Var w_mdu = t.rows_scale(w, gc.inv_mdu_e);
  Var qm = t.scatter_to_items(w_mdu, zu, gc.edges);
  Var neg_sim = t.sub(t.matmul(zi, mu), qm);
  Var coef_neg_e = t.gather_user(coef_neg, gc.edges);
  Var vw = t.scatter_to_items(coef_neg_e, zu, gc.edges);
  Var wg = t.col_sum(t.rows_scale_var(zu, coef_neg));
  agg_i = t.add(agg_i, t.sub(neg_sim, t.sub(t.repeat_row(wg, m), vw)));

  Var out_u, out_i;
  if (!cfg.use_normalizers) {
    out_u = t.add(t.scale(z.users, 1.0 - tau), t.scale(agg_u, tau));
    out_i = t.add(t.scale(z.items, 1.0 - tau), t.scale(agg_i, tau));
    return {out_u, out_i};
  }

  // C_u. Outside the closed-form regime the positive side is the exact
  // per-edge absolute sum and the negative side a clamped closed form.
  Var cu_base = t.add_const(t.sub(b_pos, b_neg), alpha);
  Var abs_pos_e;  // |omega+| per edge, only needed on the fallback path
  if (!cfg.closed_form_normalizers_ok()) {
    Var b_neg_e = t.gather_user(b_neg, gc.edges);
    abs_pos_e = t.rows_scale(t.cw_abs(t.add_const(t.sub(w, b_neg_e), alpha)), gc.inv_du_e);
  }
  Var cu;
  if (cfg.closed_form_normalizers_ok()) {
    cu = t.rows_scale(cu_base, gc.side_count);
  } else {
    Var pos_abs = t.edge_sum_to_users(abs_pos_e, gc.edges);
    Var neg_closed = t.cw_clamp_min(t.rows_scale(cu_base, gc.has_negatives), 0.0);
    cu = t.add(pos_abs, neg_closed);
  }
  cu = t.cw_clamp_min(cu, eps);

  // C_i, Step 2 closed forms with complement sums.
  Var ci_pos;
  if (cfg.closed_form_normalizers_ok()) {
    Var a_pos = t.scatter_to_items_c(gc.inv_du_e, zu, gc.edges);
    Var b_neg_du_e = t.rows_scale(t.gather_user(b_neg, gc.edges), gc.inv_du_e);
    Var bi = t.edge_sum_to_items(b_neg_du_e, gc.edges);
    ci_pos = t.add(t.sub(t.row_dot(zi, a_pos), bi), t.constant(Mat(gc.alpha_gi_pos)));
  } else {
    ci_pos = t.edge_sum_to_items(abs_pos_e, gc.edges);
  }
  Var t1 = t.col_sum(zu_scaled);
  Var a2 = t.scatter_to_items_c(gc.inv_mdu_e, zu, gc.edges);
  Var a_til = t.sub(t.repeat_row(t1, m), a2);
  Var b_pos_mdu = t.rows_scale(b_pos, gc.inv_mdu);
  Var t2 = t.sum_all(b_pos_mdu);
  Var b2 = t.edge_sum_to_items(t.gather_user(b_pos_mdu, gc.edges), gc.edges);
  Var ci_neg = t.add(t.sub(t.repeat_row(t2, m), b2), t.constant(Mat(gc.alpha_gi_neg)));
  ci_neg = t.sub(ci_neg, t.row_dot(zi, a_til));
  if (!cfg.closed_form_normalizers_ok()) {
    ci_neg = t.cw_clamp_min(ci_neg, 0.0);
  }
  Var ci = t.cw_clamp_min(t.add(ci_pos, ci_neg), eps);

  Var ucoef = t.scale(t.cw_inv(cu), tau);
  Var icoef = t.scale(t.cw_inv(ci), tau);
  out_u = t.add(t.scale(z.users, 1.0 - tau), t.rows_scale_var(agg_u, ucoef));
  out_i = t.add(t.scale(z.items, 1.0 - tau), t.rows_scale_var(agg_i, icoef));
  return {out_u, out_i};
}

// Detached variant: all weight quantities are numbers captured from the
// current values; only the aggregated embeddings stay differentiable.
Pair rankformer_tape_layer_detached(ad::Tape& t, const InteractionGraph& g,
                                    const GraphConsts& gc, Pair z, const RankformerConfig& cfg) {
  const Index n = gc.edges->n, m = gc.edges->m;
  const double tau = cfg.tau, alpha = cfg.alpha, eps = cfg.epsilon_div;

  Var zu = cfg.normalize_embeddings ? t.row_normalize(z.users, eps) : z.users;
  Var zi = cfg.normalize_embeddings ? t.row_normalize(z.items, eps) : z.items;

  // Frozen weight context from the plain fast path at the recorded values.
  Mat z_val(n + m, t.value(zu).cols());
  z_val.topRows(n) = t.value(zu);
  z_val.bottomRows(m) = t.value(zi);
  LayerWorkspace ws;
  compute_benchmarks(g, z_val, ws);
  if (cfg.use_normalizers) {
    compute_normalizers(g, z_val, alpha, cfg.closed_form_normalizers_ok(), eps, ws);
  } else {
    ws.c_user.setOnes(n);
    ws.c_item.setOnes(m);
  }
  const auto users0 = z_val.topRows(n);
  const auto items0 = z_val.bottomRows(m);

  const std::size_t ne = gc.edges->size();
  Vec w_pos_e(ne), w_neg_e(ne);
  for (std::size_t k = 0; k < ne; ++k) {
    const Index u = gc.edges->u[k], i = gc.edges->i[k];
    const double dot = users0.row(u).dot(items0.row(i));
    w_pos_e[k] = (dot - ws.b_neg[u] + alpha) * gc.inv_du[u];
    w_neg_e[k] = (dot - ws.b_pos[u] - alpha) * gc.inv_mdu[u];  // 0 when d_u == m
  }
  Vec coef_neg0(n);  // (b+ + a)/(m-d_u), 0 when d_u == m
  for (Index u = 0; u < n; ++u) coef_neg0[u] = (ws.b_pos[u] + alpha) * gc.inv_mdu[u];

  // Users: positive scatter with frozen weights, negative side via the
  // all-items complement with a frozen-mixed moment.
  Var agg_u = t.scatter_to_users_c(w_pos_e, zi, gc.edges);
  Mat users0_m = users0, items0_m = items0;
  Var mixed_mi = t.matmul_tn_lc(items0_m, zi);           // d x d: sum z0_i z_i^T
  Var sim_all = t.matmul_lc(users0_m, mixed_mi);         // row u: sum_i (z0_u.z0_i) z_i
  Var si_rep = t.repeat_row(t.col_sum(zi), n);
  Var neg_glob = t.sub(t.rows_scale(sim_all, gc.inv_mdu), t.rows_scale(si_rep, coef_neg0));
  agg_u = t.add(agg_u, t.sub(neg_glob, t.scatter_to_users_c(w_neg_e, zi, gc.edges)));

  // Items: same pattern against the scaled user moment.
  Var agg_i = t.scatter_to_items_c(w_pos_e, zu, gc.edges);
  Mat users0_scaled = users0_m;
  for (Index u = 0; u < n; ++u) users0_scaled.row(u) *= gc.inv_mdu[u];
  Var mixed_mu = t.matmul_tn_lc(users0_scaled, zu);      // d x d: sum z0_u z_u^T/(m-d_u)
  Var sim_all_i = t.matmul_lc(items0_m, mixed_mu);
  Var wg = t.repeat_row(t.col_sum(t.rows_scale(zu, coef_neg0)), m);
  Var neg_glob_i = t.sub(sim_all_i, wg);
  agg_i = t.add(agg_i, t.sub(neg_glob_i, t.scatter_to_items_c(w_neg_e, zu, gc.edges)));

  Vec ucoef = tau * ws.c_user.cwiseInverse();
  Vec icoef = tau * ws.c_item.cwiseInverse();
  Var out_u = t.add(t.scale(z.users, 1.0 - tau), t.rows_scale(agg_u, ucoef));
  Var out_i = t.add(t.scale(z.items, 1.0 - tau), t.rows_scale(agg_i, icoef));
  return {out_u, out_i};
}

}  // namespace

std::unique_ptr<EncoderProgram> record_encoder(const InteractionGraph& g, const Mat& z0,
                                               const EncoderConfig& cfg, GradMode mode) {
  cfg.validate();
  if (z0.rows() != g.n + g.m) throw std::invalid_argument("embedding rows != n+m");
  auto program = std::make_unique<EncoderProgram>();
  ad::Tape& t = program->tape;
  program->z0 = t.input(z0);
  Pair z{t.slice_rows(program->z0, 0, g.n), t.slice_rows(program->z0, g.n, g.m)};

  switch (cfg.kind) {
    case EncoderConfig::Kind::mf:
      break;
    case EncoderConfig::Kind::lightgcn: {
      const GraphConsts gc = make_graph_consts(g, 0.0);
      if (cfg.baseline.layers > 0) {
        Pair combined = z;
        Pair current = z;
        for (int l = 0; l < cfg.baseline.layers; ++l) {
          current = lightgcn_tape_layer(t, gc, current);
          if (cfg.baseline.combine == BaselineConfig::Combine::mean) {
            combined = {t.add(combined.users, current.users), t.add(combined.items, current.items)};
          }
        }
        if (cfg.baseline.combine == BaselineConfig::Combine::mean) {
          const double inv = 1.0 / static_cast<double>(cfg.baseline.layers + 1);
          z = {t.scale(combined.users, inv), t.scale(combined.items, inv)};
        } else {
          z = current;
        }
      }
      break;
    }
    case EncoderConfig::Kind::rankformer: {
      const GraphConsts gc = make_graph_consts(g, cfg.rankformer.alpha);
      for (int l = 0; l < cfg.rankformer.layers; ++l) {
        if (l == 0 && cfg.rankformer.warmup_first_layer) {
          z = warmup_tape_layer(t, gc, z, cfg.rankformer.tau);
        } else if (mode == GradMode::through_layers) {
          z = rankformer_tape_layer_through(t, gc, z, cfg.rankformer);
        } else {
          z = rankformer_tape_layer_detached(t, g, gc, z, cfg.rankformer);
        }
      }
      break;
    }
  }
  program->users = z.users;
  program->items = z.items;
  return program;
}

}  // namespace rankformer
