#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankformer {

struct RankformerConfig {
  double tau = 0.5;     // per-layer step size, [0, 1]
  double alpha = 2.0;   // offset separating positive and negative weights
  int layers = 2;       // L
  double lambda_reg = 1.0;  // regularizer weight inside the layer; the derivation fixes it to 1
  bool warmup_first_layer = true;
  bool normalize_embeddings = true;
  bool use_normalizers = true;  // divide by C_u / C_i; off means C == 1
  double epsilon_div = 1e-12;

  void validate() const {
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau must be in [0, 1]");
    if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    if (layers < 0) throw std::invalid_argument("layers must be >= 0");
    if (epsilon_div <= 0.0) throw std::invalid_argument("epsilon_div must be > 0");
  }

  // The closed-form normalizers assume unit rows and alpha >= 2 (weight signs
  // are then fixed); outside that regime a slower guarded path is used.
  bool closed_form_normalizers_ok() const { return normalize_embeddings && alpha >= 2.0; }
};

struct BaselineConfig {
  enum class Kind { mf, lightgcn };
  enum class Combine { last, mean };
  Kind kind = Kind::lightgcn;
  int layers = 0;
  Combine combine = Combine::mean;

  void validate() const {
    if (layers < 0) throw std::invalid_argument("layers must be >= 0");
    if (kind == Kind::mf && layers != 0) throw std::invalid_argument("mf takes layers = 0");
  }
};

enum class GradMode { through_layers, detached_weights };

struct TrainConfig {
  double lr = 0.1;
  double weight_decay = 1e-4;
  int epochs = 100;
  int batch_size = 0;  // 0 = full batch (every train edge once per epoch)
  int negatives_per_positive = 1;
  int patience = 10;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::through_layers;
  int embedding_dim = 64;

  void validate() const {
    if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 0) throw std::invalid_argument("batch_size must be >= 0");
    if (negatives_per_positive < 1) throw std::invalid_argument("negatives_per_positive must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
  }
};

struct EvalConfig {
  std::vector<int> ks{20};
  bool mask_train = true;
  bool mask_val_at_test = true;

  void validate() const {
    if (ks.empty()) throw std::invalid_argument("ks must be nonempty");
    for (int k : ks) {
      if (k < 1) throw std::invalid_argument("each K must be >= 1");
    }
  }
};

}  // namespace rankformer
