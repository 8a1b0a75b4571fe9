#include "rankformer/rankformer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rankformer/threading.hpp"

namespace rankformer {

namespace {

void check_shape(const InteractionGraph& g, const Mat& z) {
  if (z.rows() != g.n + g.m) {
    throw std::invalid_argument("embedding matrix has " + std::to_string(z.rows()) +
                                " rows, expected n+m = " + std::to_string(g.n + g.m));
  }
}

}  // namespace

Mat normalize_rows(const Mat& z, double eps, NormalizeReport* report) {
  Mat out = z;
  Index degenerate = 0;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm <= eps) {
      ++degenerate;
      continue;
    }
    out.row(r) /= norm;
  }
  if (report) report->degenerate_rows = degenerate;
  return out;
}

void compute_benchmarks(const InteractionGraph& g, const Mat& z, LayerWorkspace& ws) {
  check_shape(g, z);
  const Index n = g.n, m = g.m, d = z.cols();
  const auto users = z.topRows(n);
  const auto items = z.bottomRows(m);

  ws.b_pos.setZero(n);
  ws.b_neg.setZero(n);
  ws.pos_item_sum.setZero(n, d);
  ws.user_no_positives.assign(n, 0);
  ws.user_no_negatives.assign(n, 0);
  ws.sum_item_emb = items.colwise().sum();

  parallel_for(0, n, [&](Index lo, Index hi) {
    for (Index u = lo; u < hi; ++u) {
      const Index du = g.user_degree[u];
      auto pos = ws.pos_item_sum.row(u);
      for (Index i : g.items_of(u)) pos += items.row(i);
      if (du == 0) {
        ws.user_no_positives[u] = 1;
      } else {
        ws.b_pos[u] = users.row(u).dot(pos) / static_cast<double>(du);
      }
      if (du == m) {
        ws.user_no_negatives[u] = 1;
      } else {
        ws.b_neg[u] = users.row(u).dot(ws.sum_item_emb - pos) / static_cast<double>(m - du);
      }
    }
  });
}

void compute_normalizers(const InteractionGraph& g, const Mat& z, double alpha,
                         bool closed_form_ok, double epsilon_div, LayerWorkspace& ws) {
  const Index n = g.n, m = g.m, d = z.cols();
  const auto users = z.topRows(n);
  const auto items = z.bottomRows(m);

  ws.c_user.setZero(n);
  ws.c_item.setZero(m);

  // User side. Both absolute sums collapse to b+ - b- + alpha; each side
  // only exists when the corresponding neighbor set is nonempty.
  parallel_for(0, n, [&](Index lo, Index hi) {
    for (Index u = lo; u < hi; ++u) {
      const double base = ws.b_pos[u] - ws.b_neg[u] + alpha;
      double c = 0.0;
      if (closed_form_ok) {
        if (!ws.user_no_positives[u]) c += base;
        if (!ws.user_no_negatives[u]) c += base;
      } else {
        if (!ws.user_no_positives[u]) {
          const Index du = g.user_degree[u];
          double abs_pos = 0.0;
          for (Index i : g.items_of(u)) {
            abs_pos += std::abs(users.row(u).dot(items.row(i)) - ws.b_neg[u] + alpha);
          }
          c += abs_pos / static_cast<double>(du);
        }
        if (!ws.user_no_negatives[u]) c += std::max(base, 0.0);
      }
      ws.c_user[u] = std::max(c, epsilon_div);
    }
  });

  // Item side, Step 2 closed forms. Negative-side neighbor sums become
  // global-sum-minus-positive-scan complements; users with no negatives
  // contribute zero to both ends so the complements stay consistent.
  Vec t2_terms = Vec::Zero(n);   // b+_u / (m - d_u)
  Vec t3_terms = Vec::Zero(n);   // 1 / (m - d_u)
  ws.user_scaled_sum.setZero(d);
  for (Index u = 0; u < n; ++u) {
    if (ws.user_no_negatives[u]) continue;
    const double inv = 1.0 / static_cast<double>(m - g.user_degree[u]);
    t2_terms[u] = ws.b_pos[u] * inv;
    t3_terms[u] = inv;
    ws.user_scaled_sum += users.row(u) * inv;
  }
  ws.sum_bpos_scaled = t2_terms.sum();
  ws.sum_inv_mdu = t3_terms.sum();
  const double t2 = ws.sum_bpos_scaled;
  const double t3 = ws.sum_inv_mdu;

  parallel_for(0, m, [&](Index lo, Index hi) {
    RowVec pos_users_over_du(d), neg_users_scaled(d);
    for (Index i = lo; i < hi; ++i) {
      pos_users_over_du.setZero();
      neg_users_scaled.setZero();
      double b_neg_over_du = 0.0, inv_du_sum = 0.0;
      double t2_local = 0.0, t3_local = 0.0;
      double abs_pos_exact = 0.0;
      for (Index u : g.users_of(i)) {
        const double inv_du = 1.0 / static_cast<double>(g.user_degree[u]);
        pos_users_over_du += users.row(u) * inv_du;
        b_neg_over_du += ws.b_neg[u] * inv_du;
        inv_du_sum += inv_du;
        if (!ws.user_no_negatives[u]) {
          const double inv_mdu = 1.0 / static_cast<double>(m - g.user_degree[u]);
          neg_users_scaled += users.row(u) * inv_mdu;
          t2_local += ws.b_pos[u] * inv_mdu;
          t3_local += inv_mdu;
        }
        if (!closed_form_ok) {
          abs_pos_exact += std::abs(users.row(u).dot(items.row(i)) - ws.b_neg[u] + alpha) * inv_du;
        }
      }
      const double pos_side =
          closed_form_ok ? items.row(i).dot(pos_users_over_du) - b_neg_over_du + alpha * inv_du_sum
                         : abs_pos_exact;
      double neg_side = -items.row(i).dot(ws.user_scaled_sum - neg_users_scaled) +
                        (t2 - t2_local) + alpha * (t3 - t3_local);
      if (!closed_form_ok) neg_side = std::max(neg_side, 0.0);
      ws.c_item[i] = std::max(pos_side + neg_side, epsilon_div);
    }
  });
}

double attention_weight_pos(const InteractionGraph& g, const Mat& z, Index u, Index i,
                            const Vec& b_neg, double alpha) {
  const Index du = g.user_degree[u];
  if (du == 0) throw std::invalid_argument("attention_weight_pos: user has no positives");
  const double sim = z.row(u).dot(z.row(g.n + i));
  return (sim - b_neg[u] + alpha) / static_cast<double>(du);
}

double attention_weight_neg(const InteractionGraph& g, const Mat& z, Index u, Index i,
                            const Vec& b_pos, double alpha) {
  const Index du = g.user_degree[u];
  if (du == g.m) throw std::invalid_argument("attention_weight_neg: user has no negatives");
  const double sim = z.row(u).dot(z.row(g.n + i));
  return (sim - b_pos[u] - alpha) / static_cast<double>(g.m - du);
}

Mat rankformer_layer(const InteractionGraph& g, const Mat& z, const RankformerConfig& cfg,
                     LayerWorkspace* ws_out) {
  check_shape(g, z);
  cfg.validate();
  const Index n = g.n, m = g.m, d = z.cols();
  const double tau = cfg.tau, alpha = cfg.alpha;

  // Weights and aggregation run on the (optionally) normalized matrix; the
  // (1 - tau) retention term keeps the layer input so tau = 0 is an exact
  // fixed point.
  const Mat zn = cfg.normalize_embeddings ? normalize_rows(z, cfg.epsilon_div) : z;
  const auto users = zn.topRows(n);
  const auto items = zn.bottomRows(m);

  LayerWorkspace ws;
  compute_benchmarks(g, zn, ws);

  ws.item_moment = items.transpose() * items;
  Mat users_scaled = users;  // rows scaled by 1/(m - d_u); zero when d_u == m
  Vec bpos_coef = Vec::Zero(n);
  for (Index u = 0; u < n; ++u) {
    if (ws.user_no_negatives[u]) {
      users_scaled.row(u).setZero();
      continue;
    }
    const double inv = 1.0 / static_cast<double>(m - g.user_degree[u]);
    users_scaled.row(u) *= inv;
    bpos_coef[u] = (ws.b_pos[u] + alpha) * inv;
  }
  ws.user_moment_scaled = users_scaled.transpose() * users;
  ws.user_bpos_scaled_sum.setZero(d);
  for (Index u = 0; u < n; ++u) {
    ws.user_bpos_scaled_sum += bpos_coef[u] * users.row(u);
  }

  if (cfg.use_normalizers) {
    compute_normalizers(g, zn, alpha, cfg.closed_form_normalizers_ok(), cfg.epsilon_div, ws);
  } else {
    ws.c_user.setOnes(n);
    ws.c_item.setOnes(m);
    ws.user_scaled_sum = users_scaled.colwise().sum();
  }

  Mat out(n + m, d);

  // User rows: positive sums by edge scan, negative sums via the
  // sum-over-all-items complement against the item moment matrix.
  parallel_for(0, n, [&](Index lo, Index hi) {
    RowVec q(d), agg(d);
    for (Index u = lo; u < hi; ++u) {
      const Index du = g.user_degree[u];
      q.setZero();
      for (Index i : g.items_of(u)) {
        q += users.row(u).dot(items.row(i)) * items.row(i);
      }
      agg.setZero();
      if (du > 0) {
        agg += (q - (ws.b_neg[u] - alpha) * ws.pos_item_sum.row(u)) / static_cast<double>(du);
      }
      if (du < m) {
        const RowVec neg_sim = users.row(u) * ws.item_moment - q;
        const RowVec neg_plain = ws.sum_item_emb - ws.pos_item_sum.row(u);
        agg += (neg_sim - (ws.b_pos[u] + alpha) * neg_plain) / static_cast<double>(m - du);
      }
      out.row(u) = (1.0 - tau) * z.row(u) + (tau / ws.c_user[u]) * agg;
    }
  });

  // Item rows: per-edge terms carry the owning user's degree scaling, the
  // negative remainder comes from the scaled user moment and global sums.
  parallel_for(0, m, [&](Index lo, Index hi) {
    RowVec fp(d), sp(d), qm(d), vw(d), agg(d);
    for (Index i = lo; i < hi; ++i) {
      fp.setZero();
      sp.setZero();
      qm.setZero();
      vw.setZero();
      for (Index u : g.users_of(i)) {
        const double dot = users.row(u).dot(items.row(i));
        const double inv_du = 1.0 / static_cast<double>(g.user_degree[u]);
        fp += dot * inv_du * users.row(u);
        sp += (ws.b_neg[u] - alpha) * inv_du * users.row(u);
        if (!ws.user_no_negatives[u]) {
          const double inv_mdu = 1.0 / static_cast<double>(m - g.user_degree[u]);
          qm += dot * inv_mdu * users.row(u);
          vw += (ws.b_pos[u] + alpha) * inv_mdu * users.row(u);
        }
      }
      agg = fp - sp;
      agg += (items.row(i) * ws.user_moment_scaled - qm) - (ws.user_bpos_scaled_sum - vw);
      out.row(n + i) = (1.0 - tau) * z.row(n + i) + (tau / ws.c_item[i]) * agg;
    }
  });

  if (!out.allFinite()) {
    Index bad = -1;
    for (Index r = 0; r < out.rows() && bad < 0; ++r) {
      if (!out.row(r).allFinite()) bad = r;
    }
    throw std::runtime_error("rankformer layer produced non-finite values at row " +
                             std::to_string(bad));
  }
  if (ws_out) *ws_out = std::move(ws);
  return out;
}

Mat warmup_layer(const InteractionGraph& g, const Mat& z, double tau) {
  check_shape(g, z);
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau must be in [0, 1]");
  const Index n = g.n, m = g.m, d = z.cols();
  Mat out(n + m, d);

  parallel_for(0, n, [&](Index lo, Index hi) {
    RowVec mean(d);
    for (Index u = lo; u < hi; ++u) {
      const Index du = g.user_degree[u];
      if (du == 0) {
        out.row(u) = z.row(u);
        continue;
      }
      mean.setZero();
      for (Index i : g.items_of(u)) mean += z.row(n + i);
      out.row(u) = (1.0 - tau) * z.row(u) + (tau / static_cast<double>(du)) * mean;
    }
  });
  parallel_for(0, m, [&](Index lo, Index hi) {
    RowVec mean(d);
    for (Index i = lo; i < hi; ++i) {
      const Index di = g.item_degree[i];
      if (di == 0) {
        out.row(n + i) = z.row(n + i);
        continue;
      }
      mean.setZero();
      for (Index u : g.users_of(i)) mean += z.row(u);
      out.row(n + i) = (1.0 - tau) * z.row(n + i) + (tau / static_cast<double>(di)) * mean;
    }
  });
  return out;
}

ForwardResult rankformer_forward(const InteractionGraph& g, const Mat& z0,
                                 const RankformerConfig& cfg, const ForwardOptions& opts) {
  cfg.validate();
  ForwardResult result;
  result.final = z0;
  if (opts.keep_snapshots) result.snapshots.push_back(z0);
  for (int l = 0; l < cfg.layers; ++l) {
    try {
      if (l == 0 && cfg.warmup_first_layer) {
        result.final = warmup_layer(g, result.final, cfg.tau);
      } else {
        result.final = rankformer_layer(g, result.final, cfg);
      }
    } catch (const std::runtime_error& err) {
      throw std::runtime_error("layer " + std::to_string(l + 1) + ": " + err.what());
    }
    if (opts.keep_snapshots) result.snapshots.push_back(result.final);
  }
  return result;
}

}  // namespace rankformer
