#pragma once

#include <memory>

#include "rankformer/autodiff.hpp"
#include "rankformer/baselines.hpp"
#include "rankformer/config.hpp"
#include "rankformer/rankformer.hpp"

namespace rankformer {

struct EncoderConfig {
  enum class Kind { rankformer, mf, lightgcn };
  Kind kind = Kind::rankformer;
  RankformerConfig rankformer;
  BaselineConfig baseline;

  void validate() const {
    if (kind == Kind::rankformer) {
      rankformer.validate();
    } else {
      baseline.validate();
    }
  }
};

// Plain (tape-free) forward used for evaluation and checkpoints.
Mat encoder_forward(const InteractionGraph& g, const Mat& z0, const EncoderConfig& cfg);

// The encoder recorded on a tape, for training. `z0` is the one input; user
// and item rows of the final embeddings are exposed separately so the loss
// can gather from them. With GradMode::detached_weights the attention
// weights, benchmarks and normalizers are frozen at the recorded values and
// gradients only flow through the aggregated embeddings.
struct EncoderProgram {
  ad::Tape tape;
  ad::Tape::Var z0;
  ad::Tape::Var users;
  ad::Tape::Var items;
};

std::unique_ptr<EncoderProgram> record_encoder(const InteractionGraph& g, const Mat& z0,
                                               const EncoderConfig& cfg, GradMode mode);

}  // namespace rankformer
