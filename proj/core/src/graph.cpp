#include "rankformer/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rankformer/rng.hpp"

namespace rankformer {

bool InteractionGraph::has_edge(Index u, Index i) const {
  auto items = items_of(u);
  return std::binary_search(items.begin(), items.end(), i);
}

std::vector<Edge> InteractionGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(e));
  for (Index u = 0; u < n; ++u) {
    for (Index i : items_of(u)) out.push_back({u, i});
  }
  return out;
}

RawInteractions load_interactions(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open interaction file: " + path.string());
  }
  const char sep = format == FileFormat::tsv ? '\t' : ',';
  RawInteractions raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto first = line.find(sep);
    if (first == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed line (expected at least 2 fields)");
    }
    auto second = line.find(sep, first + 1);
    if (second == std::string::npos) second = line.size();
    std::string user = line.substr(0, first);
    std::string item = line.substr(first + 1, second - first - 1);
    if (user.empty() || item.empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": empty key");
    }
    raw.pairs.emplace_back(std::move(user), std::move(item));
  }
  return raw;
}

RawInteractions deduplicate(const RawInteractions& raw) {
  std::set<std::pair<std::string, std::string>> seen;
  RawInteractions out;
  out.pairs.reserve(raw.pairs.size());
  for (const auto& p : raw.pairs) {
    if (seen.insert(p).second) out.pairs.push_back(p);
  }
  return out;
}

RawInteractions apply_k_core(const RawInteractions& raw, int k) {
  if (k < 1) throw std::invalid_argument("k-core requires k >= 1");
  RawInteractions current = deduplicate(raw);
  for (;;) {
    std::unordered_map<std::string, int> du, di;
    for (const auto& [u, i] : current.pairs) {
      ++du[u];
      ++di[i];
    }
    RawInteractions next;
    next.pairs.reserve(current.pairs.size());
    for (const auto& p : current.pairs) {
      if (du[p.first] >= k && di[p.second] >= k) next.pairs.push_back(p);
    }
    const bool stable = next.pairs.size() == current.pairs.size();
    current = std::move(next);
    if (stable) break;
  }
  if (current.pairs.empty()) {
    throw std::runtime_error("k-core eliminated all data (k=" + std::to_string(k) + ")");
  }
  return current;
}

namespace {

InteractionGraph finish_graph(std::vector<Edge> edges, InteractionGraph g) {
  const Index n = g.n, m = g.m;
  g.e = static_cast<Index>(edges.size());
  g.user_degree.assign(n, 0);
  g.item_degree.assign(m, 0);
  for (const Edge& e : edges) {
    if (e.u < 0 || e.u >= n || e.i < 0 || e.i >= m) {
      throw std::invalid_argument("edge index out of range");
    }
    ++g.user_degree[e.u];
    ++g.item_degree[e.i];
  }
  g.user_ptr.assign(n + 1, 0);
  g.item_ptr.assign(m + 1, 0);
  for (Index u = 0; u < n; ++u) g.user_ptr[u + 1] = g.user_ptr[u] + g.user_degree[u];
  for (Index i = 0; i < m; ++i) g.item_ptr[i + 1] = g.item_ptr[i] + g.item_degree[i];
  g.user_items.assign(g.e, 0);
  g.item_users.assign(g.e, 0);
  std::vector<Index> ucur(g.user_ptr.begin(), g.user_ptr.end() - 1);
  std::vector<Index> icur(g.item_ptr.begin(), g.item_ptr.end() - 1);
  for (const Edge& e : edges) {
    g.user_items[ucur[e.u]++] = e.i;
    g.item_users[icur[e.i]++] = e.u;
  }
  for (Index u = 0; u < n; ++u) {
    std::sort(g.user_items.begin() + g.user_ptr[u], g.user_items.begin() + g.user_ptr[u + 1]);
  }
  for (Index i = 0; i < m; ++i) {
    std::sort(g.item_users.begin() + g.item_ptr[i], g.item_users.begin() + g.item_ptr[i + 1]);
  }
  return g;
}

}  // namespace

InteractionGraph build_graph(const std::vector<Edge>& edges, Index n, Index m) {
  InteractionGraph g;
  g.n = n;
  g.m = m;
  return finish_graph(edges, std::move(g));
}

InteractionGraph build_graph(const RawInteractions& raw) {
  if (raw.pairs.empty()) throw std::runtime_error("cannot build a graph from an empty edge set");
  InteractionGraph g;
  std::vector<Edge> edges;
  edges.reserve(raw.pairs.size());
  for (const auto& [ukey, ikey] : raw.pairs) {
    auto [uit, unew] = g.user_index.try_emplace(ukey, static_cast<Index>(g.user_keys.size()));
    if (unew) g.user_keys.push_back(ukey);
    auto [iit, inew] = g.item_index.try_emplace(ikey, static_cast<Index>(g.item_keys.size()));
    if (inew) g.item_keys.push_back(ikey);
    edges.push_back({uit->second, iit->second});
  }
  g.n = static_cast<Index>(g.user_keys.size());
  g.m = static_cast<Index>(g.item_keys.size());
  return finish_graph(std::move(edges), std::move(g));
}

DatasetSplit split_dataset(const RawInteractions& raw, const SplitOptions& options) {
  const RawInteractions data = deduplicate(raw);
  if (data.pairs.size() < 10) {
    throw std::runtime_error("split requires at least 10 edges, got " +
                             std::to_string(data.pairs.size()));
  }

  // Index the full key universe first so held-out edges stay addressable.
  InteractionGraph universe;
  std::vector<Edge> edges;
  edges.reserve(data.pairs.size());
  for (const auto& [ukey, ikey] : data.pairs) {
    auto [uit, unew] = universe.user_index.try_emplace(ukey, static_cast<Index>(universe.user_keys.size()));
    if (unew) universe.user_keys.push_back(ukey);
    auto [iit, inew] = universe.item_index.try_emplace(ikey, static_cast<Index>(universe.item_keys.size()));
    if (inew) universe.item_keys.push_back(ikey);
    edges.push_back({uit->second, iit->second});
  }
  universe.n = static_cast<Index>(universe.user_keys.size());
  universe.m = static_cast<Index>(universe.item_keys.size());

  DatasetSplit split;
  split.seed = options.seed;
  std::vector<Edge> train_edges;

  if (!options.per_user) {
    Rng rng = Rng::derive(options.seed, "split/global");
    rng.shuffle(edges);
    const std::size_t total = edges.size();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(total)));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(total)));
    train_edges.assign(edges.begin(), edges.begin() + n_train);
    split.val.assign(edges.begin() + n_train, edges.begin() + n_train + n_val);
    split.test.assign(edges.begin() + n_train + n_val, edges.end());
  } else {
    std::vector<std::vector<Index>> per_user(universe.n);
    for (const Edge& e : edges) per_user[e.u].push_back(e.i);
    for (Index u = 0; u < universe.n; ++u) {
      auto& items = per_user[u];
      std::sort(items.begin(), items.end());
      Rng rng = Rng::derive(options.seed, "split/per-user", static_cast<std::uint64_t>(u));
      rng.shuffle(items);
      const std::size_t total = items.size();
      const std::size_t n_train = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(total)));
      const std::size_t n_val = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(total)));
      for (std::size_t t = 0; t < total; ++t) {
        const Edge e{u, items[t]};
        if (t < n_train) {
          train_edges.push_back(e);
        } else if (t < n_train + n_val) {
          split.val.push_back(e);
        } else {
          split.test.push_back(e);
        }
      }
    }
  }

  if (train_edges.empty()) throw std::runtime_error("split produced an empty train set");
  split.train = build_graph(train_edges, universe.n, universe.m);
  split.train.user_keys = std::move(universe.user_keys);
  split.train.item_keys = std::move(universe.item_keys);
  split.train.user_index = std::move(universe.user_index);
  split.train.item_index = std::move(universe.item_index);
  return split;
}

}  // namespace rankformer
