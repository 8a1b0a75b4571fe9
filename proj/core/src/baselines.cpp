#include "rankformer/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "rankformer/threading.hpp"

namespace rankformer {

Mat lightgcn_layer(const InteractionGraph& g, const Mat& z) {
  if (z.rows() != g.n + g.m) throw std::invalid_argument("embedding rows != n+m");
  const Index n = g.n, m = g.m, d = z.cols();
  Mat out = Mat::Zero(n + m, d);

  parallel_for(0, n, [&](Index lo, Index hi) {
    for (Index u = lo; u < hi; ++u) {
      const double du = static_cast<double>(g.user_degree[u]);
      for (Index i : g.items_of(u)) {
        out.row(u) += z.row(n + i) / std::sqrt(du * static_cast<double>(g.item_degree[i]));
      }
    }
  });
  parallel_for(0, m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) {
      const double di = static_cast<double>(g.item_degree[i]);
      for (Index u : g.users_of(i)) {
        out.row(n + i) += z.row(u) / std::sqrt(static_cast<double>(g.user_degree[u]) * di);
      }
    }
  });
  return out;
}

Mat baseline_forward(const InteractionGraph& g, const Mat& z0, const BaselineConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BaselineConfig::Kind::mf || cfg.layers == 0) return z0;

  Mat current = z0;
  Mat combined = z0;
  for (int l = 0; l < cfg.layers; ++l) {
    current = lightgcn_layer(g, current);
    if (cfg.combine == BaselineConfig::Combine::mean) combined += current;
  }
  if (cfg.combine == BaselineConfig::Combine::last) return current;
  return combined / static_cast<double>(cfg.layers + 1);
}

}  // namespace rankformer
