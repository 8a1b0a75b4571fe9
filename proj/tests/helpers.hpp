#pragma once

#include <vector>

#include "rankformer/graph.hpp"
#include "rankformer/synthetic.hpp"
#include "rankformer/types.hpp"

namespace rftest {

using rankformer::Index;
using rankformer::Mat;

// The worked single-user instance: u likes i0, dislikes i1, embeddings are
// the standard basis so every quantity is hand-checkable.
inline rankformer::InteractionGraph worked_graph() {
  return rankformer::build_graph({{0, 0}}, 1, 2);
}

inline Mat worked_embeddings() {
  Mat z(3, 2);
  z << 1, 0,  // user
      1, 0,   // positive item
      0, 1;   // negative item
  return z;
}

// Random normalized instance helpers shared across suites.
inline Mat unit_rows(const Mat& z) {
  Mat out = z;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm > 0) out.row(r) /= norm;
  }
  return out;
}

}  // namespace rftest
