#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netexp/common.hpp"

namespace netexp {

// Hop distance; unreachable (or beyond a cap) is kUnreachable, which compares
// greater than every finite distance.
using dist_t = std::uint32_t;
inline constexpr dist_t kUnreachable = std::numeric_limits<dist_t>::max();

struct LoadReport {
  long edges_in = 0;
  long duplicates = 0;
  long self_loops = 0;
};

// Immutable network. Out-neighbor lists are kept as given (directionality
// matters for exposure counting); the symmetric closure, used for every
// distance-based quantity, is built eagerly so the object is safe to share
// across threads.
class Graph {
 public:
  Graph() = default;

  Graph(long n, const std::vector<std::pair<int, int>>& edges, bool directed,
        LoadReport* report = nullptr)
      : n_(n), directed_(directed) {
    if (n < 0) throw data_error("graph: negative unit count");
    LoadReport rep;
    rep.edges_in = static_cast<long>(edges.size());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& [s, d] : edges) {
      if (s < 0 || s >= n || d < 0 || d >= n)
        throw data_error("graph: edge endpoint " + std::to_string(s < 0 || s >= n ? s : d) +
                         " out of range [0," + std::to_string(n) + ")");
      if (s == d) {
        ++rep.self_loops;
        continue;
      }
      adj[static_cast<std::size_t>(s)].push_back(d);
      if (!directed) adj[static_cast<std::size_t>(d)].push_back(s);
    }
    long dup = 0;
    for (auto& nbrs : adj) {
      std::sort(nbrs.begin(), nbrs.end());
      auto last = std::unique(nbrs.begin(), nbrs.end());
      dup += static_cast<long>(nbrs.end() - last);
      nbrs.erase(last, nbrs.end());
    }
    rep.duplicates = directed ? dup : dup / 2;
    out_ = std::move(adj);
    build_symmetric();
    if (report) *report = rep;
  }

  // From prebuilt adjacency lists (generators); lists are sorted and deduped.
  static Graph from_adjacency(std::vector<std::vector<int>> out, bool directed) {
    Graph g;
    g.n_ = static_cast<long>(out.size());
    for (long i = 0; i < g.n_; ++i) {
      auto& nbrs = out[static_cast<std::size_t>(i)];
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
      nbrs.erase(std::remove(nbrs.begin(), nbrs.end(), static_cast<int>(i)), nbrs.end());
    }
    g.out_ = std::move(out);
    g.directed_ = directed;
    g.build_symmetric();
    return g;
  }

  long n() const { return n_; }
  bool directed() const { return directed_; }
  const std::vector<int>& out_neighbors(int i) const {
    return out_[static_cast<std::size_t>(i)];
  }
  // Symmetric closure: edge i-j present if either direction exists.
  const std::vector<int>& sym_neighbors(int i) const {
    return sym_[static_cast<std::size_t>(i)];
  }

  long edge_count_directed() const {
    long m = 0;
    for (const auto& nbrs : out_) m += static_cast<long>(nbrs.size());
    return m;
  }

 private:
  void build_symmetric() {
    if (!directed_) {
      sym_ = out_;
      return;
    }
    sym_.assign(static_cast<std::size_t>(n_), {});
    for (long i = 0; i < n_; ++i)
      for (int j : out_[static_cast<std::size_t>(i)]) {
        sym_[static_cast<std::size_t>(i)].push_back(j);
        sym_[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
      }
    for (auto& nbrs : sym_) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
  }

  long n_ = 0;
  bool directed_ = false;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> sym_;
};

struct DistanceProfile {
  int source = 0;
  std::vector<dist_t> dist;
  std::optional<dist_t> cap;
};

// BFS hop distances on the symmetric view; entries beyond `cap` are reported
// as unreachable.
inline DistanceProfile bfs_distances(const Graph& g, int source,
                                     std::optional<dist_t> cap = std::nullopt) {
  if (source < 0 || source >= g.n())
    throw data_error("bfs_distances: source " + std::to_string(source) + " out of range");
  DistanceProfile profile;
  profile.source = source;
  profile.cap = cap;
  profile.dist.assign(static_cast<std::size_t>(g.n()), kUnreachable);
  profile.dist[static_cast<std::size_t>(source)] = 0;
  std::deque<int> queue{source};
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    dist_t du = profile.dist[static_cast<std::size_t>(u)];
    if (cap && du >= *cap) continue;
    for (int v : g.sym_neighbors(u)) {
      if (profile.dist[static_cast<std::size_t>(v)] == kUnreachable) {
        profile.dist[static_cast<std::size_t>(v)] = du + 1;
        queue.push_back(v);
      }
    }
  }
  return profile;
}

// {j : path distance(i,j) <= K}; always contains i.
inline std::vector<int> k_neighborhood(const Graph& g, int i, dist_t k) {
  auto profile = bfs_distances(g, i, k);
  std::vector<int> members;
  for (long j = 0; j < g.n(); ++j)
    if (profile.dist[static_cast<std::size_t>(j)] <= k) members.push_back(static_cast<int>(j));
  return members;
}

// n^-1 * sum_i |N(i,m)|^k.
inline double neighborhood_moment(const Graph& g, dist_t m, int k) {
  if (k < 1) throw data_error("neighborhood_moment: power must be >= 1");
  if (g.n() == 0) return 0.0;
  double total = 0.0;
  for (long i = 0; i < g.n(); ++i) {
    auto profile = bfs_distances(g, static_cast<int>(i), m);
    long size = 0;
    for (dist_t d : profile.dist)
      if (d <= m) ++size;
    total += std::pow(static_cast<double>(size), static_cast<double>(k));
  }
  return total / static_cast<double>(g.n());
}

// Average shell size: n^-1 * sum_i |{j : dist(i,j) = s}|.
inline double boundary_sizes(const Graph& g, dist_t s) {
  if (g.n() == 0) return 0.0;
  double total = 0.0;
  for (long i = 0; i < g.n(); ++i) {
    auto profile = bfs_distances(g, static_cast<int>(i), s);
    long count = 0;
    for (dist_t d : profile.dist)
      if (d == s) ++count;
    total += static_cast<double>(count);
  }
  return total / static_cast<double>(g.n());
}

// For every shell distance s, sum over pairs at distance exactly s of
// rowsum(i)*rowsum(j). Index s of the result holds the s-shell total; pairs
// with i == j land at s = 0. One BFS per source, O(n * (V + E)).
inline std::vector<double> j_count_profile(const Graph& g,
                                           const std::vector<double>& row_sums) {
  if (static_cast<long>(row_sums.size()) != g.n())
    throw data_error("j_count_profile: row_sums size mismatch");
  for (double v : row_sums)
    if (v < 0.0) throw data_error("j_count_profile: negative row sum");
  std::vector<double> totals;
  std::vector<double> shell;
  for (long i = 0; i < g.n(); ++i) {
    auto profile = bfs_distances(g, static_cast<int>(i));
    shell.clear();
    for (long j = 0; j < g.n(); ++j) {
      dist_t d = profile.dist[static_cast<std::size_t>(j)];
      if (d == kUnreachable) continue;
      if (shell.size() <= d) shell.resize(d + 1, 0.0);
      shell[d] += row_sums[static_cast<std::size_t>(j)];
    }
    if (totals.size() < shell.size()) totals.resize(shell.size(), 0.0);
    for (std::size_t s = 0; s < shell.size(); ++s)
      totals[s] += row_sums[static_cast<std::size_t>(i)] * shell[s];
  }
  return totals;
}

inline double j_count(const Graph& g, dist_t s, const std::vector<double>& row_sums) {
  auto totals = j_count_profile(g, row_sums);
  return s < totals.size() ? totals[s] : 0.0;
}

struct AplResult {
  double value = 0.0;
  long largest_component_size = 0;
  bool singleton = false;  // largest component has a single unit; value is 0
};

// Mean path distance over ordered pairs inside the largest component of the
// symmetric view.
inline AplResult average_path_length(const Graph& g) {
  if (g.n() < 1) throw data_error("average_path_length: empty graph");
  std::vector<int> component(static_cast<std::size_t>(g.n()), -1);
  int n_components = 0;
  std::vector<long> sizes;
  for (long i = 0; i < g.n(); ++i) {
    if (component[static_cast<std::size_t>(i)] >= 0) continue;
    long size = 0;
    std::deque<int> queue{static_cast<int>(i)};
    component[static_cast<std::size_t>(i)] = n_components;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      ++size;
      for (int v : g.sym_neighbors(u))
        if (component[static_cast<std::size_t>(v)] < 0) {
          component[static_cast<std::size_t>(v)] = n_components;
          queue.push_back(v);
        }
    }
    sizes.push_back(size);
    ++n_components;
  }
  int largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  AplResult result;
  result.largest_component_size = sizes[static_cast<std::size_t>(largest)];
  if (result.largest_component_size <= 1) {
    result.singleton = true;
    return result;
  }
  double total = 0.0;
  for (long i = 0; i < g.n(); ++i) {
    if (component[static_cast<std::size_t>(i)] != largest) continue;
    auto profile = bfs_distances(g, static_cast<int>(i));
    for (long j = 0; j < g.n(); ++j) {
      if (j == i || component[static_cast<std::size_t>(j)] != largest) continue;
      total += static_cast<double>(profile.dist[static_cast<std::size_t>(j)]);
    }
  }
  const double m = static_cast<double>(result.largest_component_size);
  result.value = total / (m * (m - 1.0));
  return result;
}

// Mean degree on the stored view: out-degree for directed graphs, symmetric
// degree otherwise.
inline double average_degree(const Graph& g) {
  if (g.n() == 0) return 0.0;
  return static_cast<double>(g.edge_count_directed()) / static_cast<double>(g.n());
}

// Undirected graph linking i and j when they share a symmetric-view neighbor
// but are not directly connected.
inline Graph common_friend_graph(const Graph& g) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.n()));
  std::vector<char> direct(static_cast<std::size_t>(g.n()), 0);
  std::vector<char> two_hop(static_cast<std::size_t>(g.n()), 0);
  std::vector<int> touched;
  for (long i = 0; i < g.n(); ++i) {
    for (int j : g.sym_neighbors(static_cast<int>(i))) direct[static_cast<std::size_t>(j)] = 1;
    touched.clear();
    for (int k : g.sym_neighbors(static_cast<int>(i)))
      for (int j : g.sym_neighbors(k))
        if (!two_hop[static_cast<std::size_t>(j)]) {
          two_hop[static_cast<std::size_t>(j)] = 1;
          touched.push_back(j);
        }
    for (int j : touched) {
      two_hop[static_cast<std::size_t>(j)] = 0;
      if (j != static_cast<int>(i) && !direct[static_cast<std::size_t>(j)])
        adj[static_cast<std::size_t>(i)].push_back(j);
    }
    for (int j : g.sym_neighbors(static_cast<int>(i))) direct[static_cast<std::size_t>(j)] = 0;
  }
  return Graph::from_adjacency(std::move(adj), false);
}

}  // namespace netexp
