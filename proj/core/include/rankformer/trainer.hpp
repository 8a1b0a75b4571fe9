#pragma once

#include <iosfwd>
#include <vector>

#include "rankformer/config.hpp"
#include "rankformer/encoder.hpp"
#include "rankformer/graph.hpp"
#include "rankformer/rng.hpp"
#include "rankformer/types.hpp"

namespace rankformer {

struct BprTriple {
  Index u, i, j;  // positive item i, sampled negative j
};

// Uniform positives over train edges; negatives by uniform rejection over the
// user's complement. batch_size 0 takes every train edge once (full batch).
// Users interacting with every item cannot be sampled a negative; they are
// skipped and counted.
std::vector<BprTriple> sample_bpr_batch(const InteractionGraph& g, Index batch_size,
                                        int negatives_per_positive, Rng& rng,
                                        Index* skipped_users = nullptr);

// Mean over the batch of -ln sigmoid(pos - neg), computed as softplus(neg - pos).
double bpr_loss(const Vec& scores_pos, const Vec& scores_neg);

struct BackwardResult {
  double loss = 0.0;  // batch loss (plus the L2 term when weight_decay > 0)
  Mat grad;           // d loss / d z0, same shape as z0
};

// Exact reverse-mode gradient of the sampled BPR batch loss through the
// encoder, with respect to the base embeddings. weight_decay adds
// wd * |Z0|^2 to the recorded loss; the training loop leaves it at zero and
// applies decay decoupled in the optimizer instead.
BackwardResult backward(const InteractionGraph& g, const Mat& z0, const EncoderConfig& cfg,
                        const std::vector<BprTriple>& batch, GradMode mode,
                        double weight_decay = 0.0);

struct AdamState {
  Mat m, v;
  long step = 0;

  static AdamState like(const Mat& params) {
    return {Mat::Zero(params.rows(), params.cols()), Mat::Zero(params.rows(), params.cols()), 0};
  }
};

// Adam with bias correction plus decoupled weight decay (lr * wd * param).
void optimizer_step(AdamState& state, Mat& params, const Mat& grad, double lr,
                    double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                    double eps = 1e-8);

struct HistoryRow {
  int epoch = 0;
  double loss = 0.0;
  double recall20 = 0.0;
  double ndcg20 = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Mat best_embeddings;  // base embeddings of the best validation checkpoint
  int best_epoch = 0;
  double best_val_metric = 0.0;
  std::vector<HistoryRow> history;
  bool diverged = false;
};

// Full loop: seeded Gaussian init scaled by 1/sqrt(d), sampled BPR epochs,
// validation NDCG@20 after each epoch, early stop on patience. On divergence
// (non-finite loss) the last good checkpoint is returned with the flag set.
TrainResult train(const DatasetSplit& split, const EncoderConfig& encoder_cfg,
                  const TrainConfig& train_cfg, std::ostream* log = nullptr);

}  // namespace rankformer
