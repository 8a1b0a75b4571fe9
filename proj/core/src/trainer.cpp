#include "rankformer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rankformer/eval.hpp"

namespace rankformer {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

std::vector<BprTriple> sample_bpr_batch(const InteractionGraph& g, Index batch_size,
                                        int negatives_per_positive, Rng& rng,
                                        Index* skipped_users) {
  if (g.e == 0) throw std::invalid_argument("cannot sample from an empty graph");
  const std::vector<Edge> edges = g.edges();
  Index skipped = 0;
  std::vector<BprTriple> batch;

  const auto emit = [&](const Edge& edge) {
    if (g.user_degree[edge.u] == g.m) {
      ++skipped;
      return;
    }
    for (int r = 0; r < negatives_per_positive; ++r) {
      Index j;
      do {
        j = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(g.m)));
      } while (g.has_edge(edge.u, j));
      batch.push_back({edge.u, edge.i, j});
    }
  };

  if (batch_size == 0) {
    batch.reserve(edges.size() * static_cast<std::size_t>(negatives_per_positive));
    for (const Edge& edge : edges) emit(edge);
  } else {
    batch.reserve(static_cast<std::size_t>(batch_size) * negatives_per_positive);
    for (Index b = 0; b < batch_size; ++b) {
      emit(edges[rng.uniform_index(edges.size())]);
    }
  }
  if (skipped_users) *skipped_users = skipped;
  return batch;
}

double bpr_loss(const Vec& scores_pos, const Vec& scores_neg) {
  if (scores_pos.size() != scores_neg.size()) {
    throw std::invalid_argument("bpr_loss: score vectors must have equal length");
  }
  if (scores_pos.size() == 0) return 0.0;
  double total = 0.0;
  for (Index k = 0; k < scores_pos.size(); ++k) {
    total += softplus(scores_neg[k] - scores_pos[k]);
  }
  return total / static_cast<double>(scores_pos.size());
}

BackwardResult backward(const InteractionGraph& g, const Mat& z0, const EncoderConfig& cfg,
                        const std::vector<BprTriple>& batch, GradMode mode,
                        double weight_decay) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  auto program = record_encoder(g, z0, cfg, mode);
  ad::Tape& t = program->tape;

  std::vector<Index> us, is, js;
  us.reserve(batch.size());
  is.reserve(batch.size());
  js.reserve(batch.size());
  for (const BprTriple& triple : batch) {
    us.push_back(triple.u);
    is.push_back(triple.i);
    js.push_back(triple.j);
  }
  ad::Tape::Var pu = t.gather_rows(program->users, us);
  ad::Tape::Var pi = t.gather_rows(program->items, is);
  ad::Tape::Var pj = t.gather_rows(program->items, js);
  ad::Tape::Var delta = t.sub(t.row_dot(pu, pi), t.row_dot(pu, pj));
  ad::Tape::Var loss = t.mean_all(t.softplus(t.scale(delta, -1.0)));
  if (weight_decay > 0.0) {
    loss = t.add(loss, t.scale(t.sum_all(t.cw_mul(program->z0, program->z0)), weight_decay));
  }

  t.backward(loss);

  BackwardResult result;
  result.loss = t.value(loss)(0, 0);
  result.grad = t.grad(program->z0);
  if (!std::isfinite(result.loss) || !result.grad.allFinite()) {
    throw std::runtime_error("backward produced non-finite gradients");
  }
  return result;
}

void optimizer_step(AdamState& state, Mat& params, const Mat& grad, double lr,
                    double weight_decay, double beta1, double beta2, double eps) {
  if (params.rows() != grad.rows() || params.cols() != grad.cols()) {
    throw std::invalid_argument("optimizer_step: shape mismatch");
  }
  if (state.m.size() == 0) state = AdamState::like(params);
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const Mat m_hat = state.m / bc1;
  const Mat v_hat = state.v / bc2;
  if (weight_decay > 0.0) params *= (1.0 - lr * weight_decay);
  params -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
}

TrainResult train(const DatasetSplit& split, const EncoderConfig& encoder_cfg,
                  const TrainConfig& train_cfg, std::ostream* log) {
  encoder_cfg.validate();
  train_cfg.validate();
  if (split.val.empty()) throw std::invalid_argument("train requires a nonempty validation set");

  const InteractionGraph& g = split.train;
  const Index d = train_cfg.embedding_dim;

  Rng init_rng = Rng::derive(train_cfg.seed, "init");
  Mat z0(g.n + g.m, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Index r = 0; r < z0.rows(); ++r) {
    for (Index c = 0; c < d; ++c) z0(r, c) = init_rng.normal() * scale;
  }

  EvalConfig eval_cfg;
  eval_cfg.ks = {20};

  TrainResult result;
  result.best_embeddings = z0;
  result.best_val_metric = -1.0;
  AdamState adam = AdamState::like(z0);

  int epochs_since_best = 0;
  const auto t_start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    Rng epoch_rng = Rng::derive(train_cfg.seed, "sampler", static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    int batches = 0;

    const auto run_batch = [&](const std::vector<BprTriple>& batch) {
      BackwardResult back = backward(g, z0, encoder_cfg, batch, train_cfg.grad_mode, 0.0);
      optimizer_step(adam, z0, back.grad, train_cfg.lr, train_cfg.weight_decay);
      epoch_loss += back.loss;
      ++batches;
    };

    try {
      if (train_cfg.batch_size == 0) {
        run_batch(sample_bpr_batch(g, 0, train_cfg.negatives_per_positive, epoch_rng));
      } else {
        const Index per_epoch = (g.e + train_cfg.batch_size - 1) / train_cfg.batch_size;
        for (Index b = 0; b < per_epoch; ++b) {
          run_batch(sample_bpr_batch(g, train_cfg.batch_size, train_cfg.negatives_per_positive,
                                     epoch_rng));
        }
      }
    } catch (const std::runtime_error&) {
      result.diverged = true;
      if (log) *log << "epoch " << epoch << ": divergence, stopping\n";
      break;
    }
    epoch_loss /= std::max(batches, 1);

    const Mat encoded = encoder_forward(g, z0, encoder_cfg);
    const EvalResult val = evaluate(g, encoded, split.val, {}, eval_cfg);
    const double metric = val.per_k.at(0).ndcg;

    HistoryRow row;
    row.epoch = epoch;
    row.loss = epoch_loss;
    row.recall20 = val.per_k.at(0).recall;
    row.ndcg20 = metric;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.history.push_back(row);
    if (log) {
      *log << "epoch " << epoch << " loss " << epoch_loss << " val recall@20 " << row.recall20
           << " val ndcg@20 " << metric << "\n";
    }

    if (metric > result.best_val_metric) {
      result.best_val_metric = metric;
      result.best_epoch = epoch;
      result.best_embeddings = z0;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= train_cfg.patience) break;
    }
  }
  return result;
}

}  // namespace rankformer
