#pragma once

#include <span>
#include <string>
#include <vector>

#include "rankformer/config.hpp"
#include "rankformer/encoder.hpp"
#include "rankformer/graph.hpp"
#include "rankformer/types.hpp"

namespace rankformer {

struct RankedList {
  std::vector<Index> items;
  bool truncated = false;  // fewer than K unmasked items existed
};

// Scores all items for user u (inner product against the item rows), masks,
// and returns the top-K item indices. Ties break by ascending item index, so
// the ranking is deterministic.
RankedList score_and_rank(const Mat& z, Index n, Index m, Index u,
                          std::span<const Index> masked_sorted, int k);

// |topk(1..K) intersect relevant| / |relevant|.
double recall_at_k(std::span<const Index> topk, std::span<const Index> relevant_sorted, int k);

// Binary-relevance DCG/IDCG with log2(rank+1) discounts, IDCG truncated at
// min(K, |relevant|).
double ndcg_at_k(std::span<const Index> topk, std::span<const Index> relevant_sorted, int k);

struct EvalResult {
  struct PerK {
    int k = 0;
    double recall = 0.0;
    double ndcg = 0.0;
  };
  std::vector<PerK> per_k;
  Index users_evaluated = 0;
};

// Unweighted mean of per-user metrics over users with at least one held-out
// positive. Train positives are masked per cfg.mask_train; extra_mask carries
// the validation edges when scoring the test split.
EvalResult evaluate(const InteractionGraph& g_train, const Mat& z,
                    const std::vector<Edge>& heldout, const std::vector<Edge>& extra_mask,
                    const EvalConfig& cfg);

struct SweepRow {
  std::string encoder;
  int layers = 0;
  double ndcg20 = 0.0;
};

// Untrained layer sweep: one shared Gaussian init (scaled by 1/sqrt(d)), then
// test NDCG@20 of each encoder at L = 0..max_layers without any training.
std::vector<SweepRow> layer_sweep(const DatasetSplit& split, const EncoderConfig& encoder_cfg,
                                  int max_layers, Index dim, std::uint64_t seed,
                                  const EvalConfig& eval_cfg);

}  // namespace rankformer
