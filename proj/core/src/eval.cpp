#include "rankformer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "rankformer/rng.hpp"
#include "rankformer/threading.hpp"

namespace rankformer {

RankedList score_and_rank(const Mat& z, Index n, Index m, Index u,
                          std::span<const Index> masked_sorted, int k) {
  if (u < 0 || u >= n) throw std::invalid_argument("score_and_rank: user out of range");
  const auto items = z.bottomRows(m);
  Vec scores = items * z.row(u).transpose();
  for (Index i : masked_sorted) scores[i] = -std::numeric_limits<double>::infinity();

  const Index unmasked = m - static_cast<Index>(masked_sorted.size());
  const Index take = std::min<Index>(k, unmasked);

  std::vector<Index> order(m);
  for (Index i = 0; i < m; ++i) order[i] = i;
  const auto better = [&scores](Index a, Index b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + take, order.end(), better);

  RankedList out;
  out.items.assign(order.begin(), order.begin() + take);
  out.truncated = take < k;
  return out;
}

double recall_at_k(std::span<const Index> topk, std::span<const Index> relevant_sorted, int k) {
  if (relevant_sorted.empty()) throw std::invalid_argument("recall_at_k: empty relevant set");
  const int limit = std::min<int>(k, static_cast<int>(topk.size()));
  Index hits = 0;
  for (int r = 0; r < limit; ++r) {
    if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), topk[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
}

double ndcg_at_k(std::span<const Index> topk, std::span<const Index> relevant_sorted, int k) {
  if (relevant_sorted.empty()) throw std::invalid_argument("ndcg_at_k: empty relevant set");
  const int limit = std::min<int>(k, static_cast<int>(topk.size()));
  double dcg = 0.0;
  for (int r = 0; r < limit; ++r) {
    if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), topk[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  const int ideal = std::min<int>(k, static_cast<int>(relevant_sorted.size()));
  double idcg = 0.0;
  for (int r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

EvalResult evaluate(const InteractionGraph& g_train, const Mat& z,
                    const std::vector<Edge>& heldout, const std::vector<Edge>& extra_mask,
                    const EvalConfig& cfg) {
  cfg.validate();
  if (heldout.empty()) throw std::invalid_argument("evaluate: empty held-out set");
  const Index n = g_train.n, m = g_train.m;

  std::unordered_map<Index, std::vector<Index>> relevant, extra;
  for (const Edge& e : heldout) relevant[e.u].push_back(e.i);
  for (const Edge& e : extra_mask) extra[e.u].push_back(e.i);

  std::vector<Index> users;
  users.reserve(relevant.size());
  for (auto& [u, items] : relevant) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    users.push_back(u);
  }
  std::sort(users.begin(), users.end());

  const int max_k = *std::max_element(cfg.ks.begin(), cfg.ks.end());
  const std::size_t nk = cfg.ks.size();

  // Per-user metric rows, reduced sequentially afterwards so the result does
  // not depend on the thread count.
  Mat recall_rows = Mat::Zero(static_cast<Index>(users.size()), static_cast<Index>(nk));
  Mat ndcg_rows = Mat::Zero(static_cast<Index>(users.size()), static_cast<Index>(nk));

  parallel_for(0, static_cast<Index>(users.size()), [&](Index lo, Index hi) {
    std::vector<Index> mask;
    for (Index row = lo; row < hi; ++row) {
      const Index u = users[row];
      mask.clear();
      if (cfg.mask_train) {
        const auto train_items = g_train.items_of(u);
        mask.assign(train_items.begin(), train_items.end());
      }
      if (auto it = extra.find(u); it != extra.end()) {
        mask.insert(mask.end(), it->second.begin(), it->second.end());
      }
      std::sort(mask.begin(), mask.end());
      mask.erase(std::unique(mask.begin(), mask.end()), mask.end());

      const RankedList ranked = score_and_rank(z, n, m, u, mask, max_k);
      const auto& rel = relevant.at(u);
      for (std::size_t kk = 0; kk < nk; ++kk) {
        recall_rows(row, static_cast<Index>(kk)) = recall_at_k(ranked.items, rel, cfg.ks[kk]);
        ndcg_rows(row, static_cast<Index>(kk)) = ndcg_at_k(ranked.items, rel, cfg.ks[kk]);
      }
    }
  });

  EvalResult result;
  result.users_evaluated = static_cast<Index>(users.size());
  for (std::size_t kk = 0; kk < nk; ++kk) {
    EvalResult::PerK per;
    per.k = cfg.ks[kk];
    per.recall = recall_rows.col(static_cast<Index>(kk)).sum() / static_cast<double>(users.size());
    per.ndcg = ndcg_rows.col(static_cast<Index>(kk)).sum() / static_cast<double>(users.size());
    result.per_k.push_back(per);
  }
  return result;
}

std::vector<SweepRow> layer_sweep(const DatasetSplit& split, const EncoderConfig& encoder_cfg,
                                  int max_layers, Index dim, std::uint64_t seed,
                                  const EvalConfig& eval_cfg) {
  if (max_layers < 1) throw std::invalid_argument("layer_sweep: max_layers must be >= 1");
  const InteractionGraph& g = split.train;

  Rng rng = Rng::derive(seed, "sweep-init");
  Mat z0(g.n + g.m, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Index r = 0; r < z0.rows(); ++r) {
    for (Index c = 0; c < dim; ++c) z0(r, c) = rng.normal() * scale;
  }

  const std::vector<Edge>& heldout = split.test.empty() ? split.val : split.test;
  std::vector<Edge> extra;
  if (!split.test.empty() && eval_cfg.mask_val_at_test) extra = split.val;

  std::vector<SweepRow> rows;
  for (int layers = 0; layers <= max_layers; ++layers) {
    EncoderConfig cfg = encoder_cfg;
    std::string name;
    switch (cfg.kind) {
      case EncoderConfig::Kind::rankformer:
        cfg.rankformer.layers = layers;
        name = "rankformer";
        break;
      case EncoderConfig::Kind::lightgcn:
        cfg.baseline.layers = layers;
        name = "lightgcn";
        break;
      case EncoderConfig::Kind::mf:
        name = "mf";
        break;
    }
    const Mat encoded = encoder_forward(g, z0, cfg);
    const EvalResult res = evaluate(g, encoded, heldout, extra, eval_cfg);
    rows.push_back({name, layers, res.per_k.at(0).ndcg});
    if (cfg.kind == EncoderConfig::Kind::mf) break;  // layers have no effect
  }
  return rows;
}

}  // namespace rankformer
