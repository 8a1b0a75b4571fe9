#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rankformer/types.hpp"

namespace rankformer {

enum class FileFormat { tsv, csv };

// Raw interaction log as read from disk: ordered (user key, item key) pairs.
// Duplicates are allowed here; they are removed before k-core filtering.
struct RawInteractions {
  std::vector<std::pair<std::string, std::string>> pairs;
};

struct Edge {
  Index u = 0;
  Index i = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Immutable bipartite interaction graph in CSR form, kept in both
// orientations. Adjacency lists are sorted, indices are contiguous and
// 0-based. Safe to share across threads once built.
struct InteractionGraph {
  Index n = 0;  // users
  Index m = 0;  // items
  Index e = 0;  // edges

  std::vector<Index> user_ptr, user_items;  // user -> sorted positive items
  std::vector<Index> item_ptr, item_users;  // item -> sorted positive users
  std::vector<Index> user_degree, item_degree;

  std::vector<std::string> user_keys, item_keys;
  std::unordered_map<std::string, Index> user_index, item_index;

  std::span<const Index> items_of(Index u) const {
    return {user_items.data() + user_ptr[u], static_cast<std::size_t>(user_ptr[u + 1] - user_ptr[u])};
  }
  std::span<const Index> users_of(Index i) const {
    return {item_users.data() + item_ptr[i], static_cast<std::size_t>(item_ptr[i + 1] - item_ptr[i])};
  }
  bool has_edge(Index u, Index i) const;

  // Edges in user-CSR order; shared by the trainer's tape ops.
  std::vector<Edge> edges() const;
};

struct DatasetSplit {
  InteractionGraph train;       // adjacency from train edges, indices over the full key universe
  std::vector<Edge> val, test;  // held-out edges in the same index space
  std::uint64_t seed = 0;
};

struct SplitOptions {
  std::uint64_t seed = 0;
  bool per_user = false;  // default: global edge-level split
};

// Reads one interaction per line ("user<sep>item[<sep>extra...]"); lines
// starting with '#' and blank lines are skipped, extra fields ignored.
RawInteractions load_interactions(const std::filesystem::path& path, FileFormat format);

RawInteractions deduplicate(const RawInteractions& raw);

// Maximal subset where every surviving user and item has at least k distinct
// interactions (iterative pruning to fixpoint). Deduplicates first.
RawInteractions apply_k_core(const RawInteractions& raw, int k);

// 7:1:2 split: floor(0.7 E) train, floor(0.1 E) val, remainder test, over a
// seeded uniform permutation of the deduplicated edges. The train graph is
// indexed over the full key universe so held-out-only users/items still get
// embedding rows (they just have zero train degree).
DatasetSplit split_dataset(const RawInteractions& raw, const SplitOptions& options);

// Index-based construction over an explicit universe.
InteractionGraph build_graph(const std::vector<Edge>& edges, Index n, Index m);

// Key-based construction; the universe is exactly the keys present in raw
// (first-appearance order). Empty input is an error.
InteractionGraph build_graph(const RawInteractions& raw);

}  // namespace rankformer
