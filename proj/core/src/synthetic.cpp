#include "rankformer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rankformer/rng.hpp"

namespace rankformer {

RawInteractions make_two_clique_dataset(Index users_per_clique, Index items_per_clique,
                                        Index interactions_per_user, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "two-clique");
  RawInteractions raw;
  for (int clique = 0; clique < 2; ++clique) {
    for (Index u = 0; u < users_per_clique; ++u) {
      const Index user_id = clique * users_per_clique + u;
      std::set<Index> chosen;
      while (static_cast<Index>(chosen.size()) < std::min(interactions_per_user, items_per_clique)) {
        chosen.insert(static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(items_per_clique))));
      }
      for (Index item : chosen) {
        const Index item_id = clique * items_per_clique + item;
        raw.pairs.emplace_back("u" + std::to_string(user_id), "i" + std::to_string(item_id));
      }
    }
  }
  return raw;
}

RawInteractions make_latent_factor_dataset(const LatentFactorSpec& spec) {
  Rng rng = Rng::derive(spec.seed, "latent-factor");
  const Index items_per_cluster = spec.n_items / spec.n_clusters;

  // Zipf-ish weights over the items of one cluster.
  std::vector<double> cumulative(static_cast<std::size_t>(items_per_cluster));
  double total = 0.0;
  for (Index r = 0; r < items_per_cluster; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), spec.popularity_skew);
    cumulative[static_cast<std::size_t>(r)] = total;
  }

  const auto draw_in_cluster = [&](Rng& r) {
    const double x = r.uniform() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), x);
    return static_cast<Index>(it - cumulative.begin());
  };

  RawInteractions raw;
  for (Index u = 0; u < spec.n_users; ++u) {
    const int cluster = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(spec.n_clusters)));
    // Degree between half and double the mean.
    const Index lo = std::max<Index>(1, spec.mean_degree / 2);
    const Index hi = spec.mean_degree * 2;
    const Index degree = lo + static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1)));
    std::set<Index> chosen;
    int attempts = 0;
    while (static_cast<Index>(chosen.size()) < degree && attempts < 20 * degree) {
      ++attempts;
      Index item;
      if (rng.uniform() < spec.in_cluster_prob) {
        item = cluster * items_per_cluster + draw_in_cluster(rng);
      } else {
        item = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(spec.n_items)));
      }
      chosen.insert(item);
    }
    for (Index item : chosen) {
      raw.pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(item));
    }
  }
  return raw;
}

InteractionGraph random_bipartite(Index n, Index m, Index max_degree, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "random-bipartite");
  std::vector<Edge> edges;
  for (Index u = 0; u < n; ++u) {
    const Index degree = 1 + static_cast<Index>(rng.uniform_index(
                                 static_cast<std::size_t>(std::min(max_degree, m))));
    std::set<Index> chosen;
    while (static_cast<Index>(chosen.size()) < degree) {
      chosen.insert(static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(m))));
    }
    for (Index i : chosen) edges.push_back({u, i});
  }
  return build_graph(edges, n, m);
}

Mat random_embeddings(Index rows, Index dim, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "embeddings");
  Mat z(rows, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < dim; ++c) z(r, c) = rng.normal() * scale;
  }
  return z;
}

}  // namespace rankformer
