#pragma once

#include <cstdint>

#include "rankformer/graph.hpp"

namespace rankformer {

// Two disjoint user/item blocks; every user interacts only inside its own
// block. Perfect ranking is attainable, which makes this the end-to-end
// trainability benchmark.
RawInteractions make_two_clique_dataset(Index users_per_clique, Index items_per_clique,
                                        Index interactions_per_user, std::uint64_t seed);

struct LatentFactorSpec {
  Index n_users = 1400;
  Index n_items = 900;
  int n_clusters = 12;
  Index mean_degree = 24;
  double in_cluster_prob = 0.85;  // remaining mass spread uniformly
  double popularity_skew = 0.8;   // within-cluster Zipf exponent
  std::uint64_t seed = 0;
};

// Clustered interaction data with a popularity-skewed item distribution;
// stands in for a small public dataset in the desk-scale experiments.
RawInteractions make_latent_factor_dataset(const LatentFactorSpec& spec);

// Random bipartite instance for property tests: every user gets a degree in
// [1, max_degree] with distinct random items.
InteractionGraph random_bipartite(Index n, Index m, Index max_degree, std::uint64_t seed);

// Seeded Gaussian embeddings scaled by 1/sqrt(d).
Mat random_embeddings(Index rows, Index dim, std::uint64_t seed);

}  // namespace rankformer
