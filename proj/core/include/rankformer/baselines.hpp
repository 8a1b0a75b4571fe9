#pragma once

#include "rankformer/config.hpp"
#include "rankformer/graph.hpp"
#include "rankformer/types.hpp"

namespace rankformer {

// Symmetric-normalized neighbor sum: z'_u = sum_{i in N_u+} z_i / sqrt(d_u d_i)
// and the mirror for items. Isolated nodes map to a zero row.
Mat lightgcn_layer(const InteractionGraph& g, const Mat& z);

// mf returns the embeddings unchanged; lightgcn stacks layers and combines
// them (mean includes the layer-0 input).
Mat baseline_forward(const InteractionGraph& g, const Mat& z0, const BaselineConfig& cfg);

}  // namespace rankformer
