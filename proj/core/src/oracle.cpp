#include "rankformer/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rankformer/rankformer.hpp"

namespace rankformer::oracle {

namespace {

void check_small(const InteractionGraph& g) {
  if (g.n * g.m > 1'000'000) {
    throw std::runtime_error("oracle guard: instance too large (n*m > 1e6)");
  }
}

void check_shape(const InteractionGraph& g, const Mat& z) {
  if (z.rows() != g.n + g.m) throw std::invalid_argument("embedding rows != n+m");
}

}  // namespace

Mat naive_layer(const InteractionGraph& g, const Mat& z, const RankformerConfig& cfg) {
  check_small(g);
  check_shape(g, z);
  cfg.validate();
  const Index n = g.n, m = g.m, d = z.cols();
  const double tau = cfg.tau, alpha = cfg.alpha;

  const Mat zn = cfg.normalize_embeddings ? normalize_rows(z, cfg.epsilon_div) : z;
  const auto users = zn.topRows(n);
  const auto items = zn.bottomRows(m);

  // Benchmarks straight from the definition.
  Vec b_pos = Vec::Zero(n), b_neg = Vec::Zero(n);
  for (Index u = 0; u < n; ++u) {
    const Index du = g.user_degree[u];
    double pos = 0.0, neg = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double dot = users.row(u).dot(items.row(i));
      if (g.has_edge(u, i)) {
        pos += dot;
      } else {
        neg += dot;
      }
    }
    if (du > 0) b_pos[u] = pos / static_cast<double>(du);
    if (du < m) b_neg[u] = neg / static_cast<double>(m - du);
  }

  Mat out(n + m, d);
  RowVec agg(d);

  for (Index u = 0; u < n; ++u) {
    const Index du = g.user_degree[u];
    agg.setZero();
    double sum_abs = 0.0;
    for (Index i = 0; i < m; ++i) {
      double w;
      if (g.has_edge(u, i)) {
        w = attention_weight_pos(g, zn, u, i, b_neg, alpha);
      } else {
        if (du == m) continue;
        w = attention_weight_neg(g, zn, u, i, b_pos, alpha);
      }
      agg += w * items.row(i);
      sum_abs += std::abs(w);
    }
    const double c = cfg.use_normalizers ? std::max(sum_abs, cfg.epsilon_div) : 1.0;
    out.row(u) = (1.0 - tau) * z.row(u) + (tau / c) * agg;
  }

  for (Index i = 0; i < m; ++i) {
    agg.setZero();
    double sum_abs = 0.0;
    for (Index u = 0; u < n; ++u) {
      const Index du = g.user_degree[u];
      double w;
      if (g.has_edge(u, i)) {
        w = attention_weight_pos(g, zn, u, i, b_neg, alpha);
      } else {
        if (du == m) continue;  // unreachable: such users are positive for every item
        w = attention_weight_neg(g, zn, u, i, b_pos, alpha);
      }
      agg += w * users.row(u);
      sum_abs += std::abs(w);
    }
    const double c = cfg.use_normalizers ? std::max(sum_abs, cfg.epsilon_div) : 1.0;
    out.row(n + i) = (1.0 - tau) * z.row(n + i) + (tau / c) * agg;
  }
  return out;
}

SurrogateLossReport surrogate_loss(const InteractionGraph& g, const Mat& z, double alpha) {
  check_small(g);
  check_shape(g, z);
  const Index n = g.n, m = g.m;

  SurrogateLossReport report;
  report.grad.setZero(z.rows(), z.cols());
  report.omega_min = std::numeric_limits<double>::infinity();
  report.omega_max = -std::numeric_limits<double>::infinity();

  double pair_value = 0.0, pair_energy = 0.0;
  for (Index u = 0; u < n; ++u) {
    const Index du = g.user_degree[u];
    if (du == 0 || du == m) {
      ++report.skipped_users;
      continue;
    }
    const double k = 1.0 / (static_cast<double>(du) * static_cast<double>(m - du));
    for (Index i : g.items_of(u)) {
      const double s_ui = z.row(u).dot(z.row(n + i));
      for (Index j = 0; j < m; ++j) {
        if (g.has_edge(u, j)) continue;
        const double s_uj = z.row(u).dot(z.row(n + j));
        const double delta = s_ui - s_uj;
        const double omega = delta + alpha;
        report.omega_min = std::min(report.omega_min, omega);
        report.omega_max = std::max(report.omega_max, omega);
        pair_value += k * omega * delta;
        pair_energy += k * (0.5 * delta * delta + alpha * delta);
        const double c = k * omega;
        report.grad.row(u) -= c * (z.row(n + i) - z.row(n + j));
        report.grad.row(n + i) -= c * z.row(u);
        report.grad.row(n + j) += c * z.row(u);
      }
    }
  }
  const double sq = z.squaredNorm();
  report.value = -pair_value + sq;
  report.energy = -pair_energy + 0.5 * sq;
  report.grad += z;
  if (report.omega_min > report.omega_max) report.omega_min = report.omega_max = 0.0;
  if (!std::isfinite(report.value) || !report.grad.allFinite()) {
    throw std::runtime_error("surrogate loss produced non-finite values");
  }
  return report;
}

double surrogate_energy(const InteractionGraph& g, const Mat& z, double alpha) {
  const Index n = g.n, m = g.m;
  double pair_energy = 0.0;
  for (Index u = 0; u < n; ++u) {
    const Index du = g.user_degree[u];
    if (du == 0 || du == m) continue;
    const double k = 1.0 / (static_cast<double>(du) * static_cast<double>(m - du));
    for (Index i : g.items_of(u)) {
      const double s_ui = z.row(u).dot(z.row(n + i));
      for (Index j = 0; j < m; ++j) {
        if (g.has_edge(u, j)) continue;
        const double delta = s_ui - z.row(u).dot(z.row(n + j));
        pair_energy += k * (0.5 * delta * delta + alpha * delta);
      }
    }
  }
  return -pair_energy + 0.5 * z.squaredNorm();
}

Mat surrogate_energy_fd_grad(const InteractionGraph& g, const Mat& z, double alpha) {
  Mat grad(z.rows(), z.cols());
  Mat probe = z;
  for (Index r = 0; r < z.rows(); ++r) {
    for (Index c = 0; c < z.cols(); ++c) {
      const double h = 1e-4 * (1.0 + std::abs(z(r, c)));
      probe(r, c) = z(r, c) + h;
      const double up = surrogate_energy(g, probe, alpha);
      probe(r, c) = z(r, c) - h;
      const double down = surrogate_energy(g, probe, alpha);
      probe(r, c) = z(r, c);
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

GradientStepReport gradient_step_equivalence(const InteractionGraph& g, const Mat& z,
                                             double tau, double alpha) {
  RankformerConfig cfg;
  cfg.tau = tau;
  cfg.alpha = alpha;
  cfg.layers = 1;
  cfg.warmup_first_layer = false;
  cfg.normalize_embeddings = false;
  cfg.use_normalizers = false;

  const Mat layer_naive = naive_layer(g, z, cfg);
  const Mat layer_fast = rankformer_layer(g, z, cfg);
  const SurrogateLossReport report = surrogate_loss(g, z, alpha);

  const Mat step = z - tau * report.grad;
  const Mat step_fd = z - tau * surrogate_energy_fd_grad(g, z, alpha);

  GradientStepReport out;
  out.max_abs_diff_analytic = std::max((layer_naive - step).cwiseAbs().maxCoeff(),
                                       (layer_fast - step).cwiseAbs().maxCoeff());
  out.max_abs_diff_fd = std::max((layer_naive - step_fd).cwiseAbs().maxCoeff(),
                                 (layer_fast - step_fd).cwiseAbs().maxCoeff());
  return out;
}

ResidualScalingReport lookahead_residual_scaling_fn(const ScalarFn& value, const GradFn& grad,
                                                    const Vec& theta0,
                                                    const std::vector<double>& taus,
                                                    double noise_floor) {
  const Index p = theta0.size();
  const Vec g0 = grad(theta0);

  // Hessian columns by central differences of the analytic gradient.
  Mat hessian(p, p);
  Vec probe = theta0;
  for (Index k = 0; k < p; ++k) {
    const double h = 1e-4 * (1.0 + std::abs(theta0[k]));
    probe[k] = theta0[k] + h;
    const Vec up = grad(probe);
    probe[k] = theta0[k] - h;
    const Vec down = grad(probe);
    probe[k] = theta0[k];
    hessian.col(k) = (up - down) / (2.0 * h);
  }
  hessian = ((hessian + hessian.transpose()) / 2.0).eval();

  ResidualScalingReport report;
  for (double tau : taus) {
    // grad of theta -> value(theta - tau * grad(theta)) by central FD.
    Vec grad_lr(p);
    for (Index k = 0; k < p; ++k) {
      const double h = 1e-5 * (1.0 + std::abs(theta0[k]));
      probe[k] = theta0[k] + h;
      const double up = value(probe - tau * grad(probe));
      probe[k] = theta0[k] - h;
      const double down = value(probe - tau * grad(probe));
      probe[k] = theta0[k];
      grad_lr[k] = (up - down) / (2.0 * h);
    }
    const Vec truncation2 = g0 - 2.0 * tau * (hessian * g0);
    const Vec truncation3 = g0 - 3.0 * tau * (hessian * g0);
    ResidualScalingReport::Row row;
    row.tau = tau;
    row.residual = (grad_lr - truncation2).norm();
    row.residual_over_tau2 = row.residual / (tau * tau);
    row.residual_paper_const = (grad_lr - truncation3).norm();
    report.rows.push_back(row);
  }

  // Consecutive halvings: rows are expected largest-tau first.
  int valid = 0;
  bool all_in_band = true;
  for (std::size_t k = 0; k + 1 < report.rows.size(); ++k) {
    const auto& big = report.rows[k];
    const auto& small = report.rows[k + 1];
    if (std::abs(big.tau - 2.0 * small.tau) > 1e-12 * big.tau) continue;
    if (small.tau < noise_floor) continue;                  // tau noise floor
    if (small.residual < 1e-10 * (1.0 + g0.norm())) continue;  // FD noise floor
    const double ratio = big.residual / small.residual;
    report.ratios.push_back(ratio);
    ++valid;
    if (ratio < 3.0 || ratio > 5.0) all_in_band = false;
  }
  report.pass = valid >= 2 && all_in_band;
  return report;
}

ResidualScalingReport lookahead_residual_scaling(const InteractionGraph& g, const Mat& z,
                                                 const std::vector<double>& taus, double alpha,
                                                 double noise_floor) {
  check_shape(g, z);
  if (z.size() > 200) {
    throw std::invalid_argument("residual scaling oracle requires (n+m)*d <= 200 parameters");
  }
  const Index rows = z.rows(), cols = z.cols();
  const auto to_mat = [rows, cols](const Vec& theta) {
    return Mat(Eigen::Map<const Mat>(theta.data(), rows, cols));
  };
  const ScalarFn value = [&, alpha](const Vec& theta) {
    return surrogate_energy(g, to_mat(theta), alpha);
  };
  const GradFn gradient = [&, alpha](const Vec& theta) {
    const Mat grad = surrogate_loss(g, to_mat(theta), alpha).grad;
    return Vec(Eigen::Map<const Vec>(grad.data(), grad.size()));
  };
  const Vec theta0 = Eigen::Map<const Vec>(z.data(), z.size());
  return lookahead_residual_scaling_fn(value, gradient, theta0, taus, noise_floor);
}

}  // namespace rankformer::oracle
