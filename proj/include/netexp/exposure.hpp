#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "netexp/graph.hpp"

namespace netexp {

enum class ExposureKind { Direct, AnyTreatedNeighbor, AnyTreatedFriendOfFriend };

// One binary exposure component. `arm_filter` lists the treatment arm values
// counted as "treated" by this component (multi-arm treatments declare the
// relevant arms; binary treatments use the default {1}).
struct ExposureComponent {
  ExposureKind kind = ExposureKind::Direct;
  std::vector<int> arm_filter{1};

  bool treated(int arm) const {
    return std::find(arm_filter.begin(), arm_filter.end(), arm) != arm_filter.end();
  }
  int locality() const {
    switch (kind) {
      case ExposureKind::Direct:
        return 0;
      case ExposureKind::AnyTreatedNeighbor:
        return 1;
      case ExposureKind::AnyTreatedFriendOfFriend:
        return 2;
    }
    return 0;
  }
};

// Finite-support exposure mapping: a single component, or a factorial of up
// to three components.
struct ExposureMapping {
  std::vector<ExposureComponent> components;

  static ExposureMapping direct() { return {{{ExposureKind::Direct, {1}}}}; }
  static ExposureMapping any_treated_neighbor() {
    return {{{ExposureKind::AnyTreatedNeighbor, {1}}}};
  }
  static ExposureMapping factorial(std::vector<ExposureComponent> comps) {
    return {std::move(comps)};
  }

  int n_components() const { return static_cast<int>(components.size()); }
  long support_size() const { return 1L << components.size(); }
  int locality() const {
    int k = 0;
    for (const auto& c : components) k = std::max(k, c.locality());
    return k;
  }
  void validate() const {
    if (components.empty() || components.size() > 3)
      throw config_error("exposure mapping needs 1 to 3 components");
    for (const auto& c : components)
      if (c.arm_filter.empty()) throw config_error("exposure component with empty arm filter");
  }
};

// Enumerated support in canonical order: component 0 is the most significant
// digit, so a two-component mapping enumerates (0,0),(0,1),(1,0),(1,1).
struct ExposureSupport {
  std::vector<std::vector<int>> values;  // one tuple per support index
  int locality = 0;

  std::string label(long t) const {
    const auto& tuple = values[static_cast<std::size_t>(t)];
    if (tuple.size() == 1) return std::to_string(tuple[0]);
    std::string out = "(";
    for (std::size_t c = 0; c < tuple.size(); ++c) {
      if (c) out += ",";
      out += std::to_string(tuple[c]);
    }
    return out + ")";
  }
};

inline ExposureSupport exposure_support(const ExposureMapping& m) {
  m.validate();
  ExposureSupport support;
  support.locality = m.locality();
  const int c = m.n_components();
  for (long t = 0; t < m.support_size(); ++t) {
    std::vector<int> tuple(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) tuple[static_cast<std::size_t>(k)] = (t >> (c - 1 - k)) & 1;
    support.values.push_back(std::move(tuple));
  }
  return support;
}

// Evaluates a mapping for repeated treatment draws. The friend-of-friend
// adjacency is built once at construction.
class ExposureEvaluator {
 public:
  ExposureEvaluator(ExposureMapping mapping, const Graph& g)
      : mapping_(std::move(mapping)), graph_(&g) {
    mapping_.validate();
    for (const auto& comp : mapping_.components)
      if (comp.kind == ExposureKind::AnyTreatedFriendOfFriend && !fof_) {
        fof_ = common_friend_graph(g);
      }
  }

  const ExposureMapping& mapping() const { return mapping_; }

  // Per-unit support indices.
  std::vector<int> exposures(const std::vector<int>& d) const {
    if (static_cast<long>(d.size()) != graph_->n())
      throw data_error("compute_exposures: treatment vector has " +
                       std::to_string(d.size()) + " entries, graph has " +
                       std::to_string(graph_->n()));
    const int c = mapping_.n_components();
    std::vector<int> t(static_cast<std::size_t>(graph_->n()), 0);
    for (int k = 0; k < c; ++k) {
      const auto& comp = mapping_.components[static_cast<std::size_t>(k)];
      const int shift = c - 1 - k;
      switch (comp.kind) {
        case ExposureKind::Direct:
          for (long i = 0; i < graph_->n(); ++i)
            if (comp.treated(d[static_cast<std::size_t>(i)]))
              t[static_cast<std::size_t>(i)] |= 1 << shift;
          break;
        case ExposureKind::AnyTreatedNeighbor:
          // Directed inputs count treated out-neighbors.
          for (long i = 0; i < graph_->n(); ++i)
            for (int j : graph_->out_neighbors(static_cast<int>(i)))
              if (comp.treated(d[static_cast<std::size_t>(j)])) {
                t[static_cast<std::size_t>(i)] |= 1 << shift;
                break;
              }
          break;
        case ExposureKind::AnyTreatedFriendOfFriend:
          for (long i = 0; i < graph_->n(); ++i)
            for (int j : fof_->sym_neighbors(static_cast<int>(i)))
              if (comp.treated(d[static_cast<std::size_t>(j)])) {
                t[static_cast<std::size_t>(i)] |= 1 << shift;
                break;
              }
          break;
      }
    }
    return t;
  }

 private:
  ExposureMapping mapping_;
  const Graph* graph_;
  std::optional<Graph> fof_;
};

inline std::vector<int> compute_exposures(const ExposureMapping& m,
                                          const std::vector<int>& d, const Graph& g) {
  return ExposureEvaluator(m, g).exposures(d);
}

}  // namespace netexp
