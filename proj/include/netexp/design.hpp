#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/rng.hpp"

namespace netexp {

// P(no marked unit drawn): choose `draws` of `total` units, `marked` of which
// are marked. Exact product form of the hypergeometric zero-count.
inline double hypergeometric_none(long total, long draws, long marked) {
  if (marked <= 0) return 1.0;
  if (total - marked < draws) return 0.0;
  double p = 1.0;
  for (long j = 0; j < draws; ++j)
    p *= static_cast<double>(total - marked - j) / static_cast<double>(total - j);
  return p;
}

struct IidBernoulliDesign {
  Eigen::VectorXd p;  // per-unit treatment probability; 0 for ineligible units
};

struct BlockCompleteDesign {
  std::vector<int> block_of;      // per-unit block id, -1 for ineligible units
  std::vector<long> block_size;   // per block
  std::vector<long> treat_count;  // per block
};

// Units are visited in a freshly drawn random order; a unit whose
// already-visited symmetric neighbors include a treated one has its base
// probability multiplied by `modifier_factor` (clamped to [0,1]).
struct SequentialNeighborDesign {
  Eigen::VectorXd base_p;
  double modifier_factor = 1.0;
};

class Design {
 public:
  using Spec = std::variant<IidBernoulliDesign, BlockCompleteDesign, SequentialNeighborDesign>;

  static Design iid_bernoulli(Eigen::VectorXd p, std::vector<bool> eligible = {}) {
    Design d;
    const long n = p.size();
    d.eligible_ = normalize_mask(std::move(eligible), n);
    for (long i = 0; i < n; ++i) {
      if (!d.eligible_[static_cast<std::size_t>(i)]) p[i] = 0.0;
      if (p[i] < 0.0 || p[i] > 1.0)
        throw config_error("iid_bernoulli: probability out of [0,1] for unit " + std::to_string(i));
    }
    d.spec_ = IidBernoulliDesign{std::move(p)};
    return d;
  }

  static Design iid_bernoulli(long n, double p) {
    return iid_bernoulli(Eigen::VectorXd::Constant(n, p));
  }

  // `block_of[i] < 0` marks unit i ineligible. Treated counts are given per
  // block; see block_complete_frac for the fraction rule.
  static Design block_complete(std::vector<int> block_of, std::vector<long> treat_count) {
    Design d;
    const long n = static_cast<long>(block_of.size());
    int n_blocks = 0;
    for (int b : block_of) n_blocks = std::max(n_blocks, b + 1);
    if (static_cast<long>(treat_count.size()) != n_blocks)
      throw config_error("block_complete: treat_count size does not match block count");
    std::vector<long> sizes(static_cast<std::size_t>(n_blocks), 0);
    d.eligible_.assign(static_cast<std::size_t>(n), false);
    for (long i = 0; i < n; ++i)
      if (block_of[static_cast<std::size_t>(i)] >= 0) {
        ++sizes[static_cast<std::size_t>(block_of[static_cast<std::size_t>(i)])];
        d.eligible_[static_cast<std::size_t>(i)] = true;
      }
    for (int b = 0; b < n_blocks; ++b) {
      if (sizes[static_cast<std::size_t>(b)] == 0)
        throw config_error("block_complete: empty block " + std::to_string(b));
      if (treat_count[static_cast<std::size_t>(b)] < 0 ||
          treat_count[static_cast<std::size_t>(b)] > sizes[static_cast<std::size_t>(b)])
        throw config_error("block_complete: treated count out of range in block " +
                           std::to_string(b));
    }
    d.spec_ = BlockCompleteDesign{std::move(block_of), std::move(sizes), std::move(treat_count)};
    return d;
  }

  // Treated count per block is round-half-away-from-zero of frac * size.
  static Design block_complete_frac(const std::vector<int>& block_of, double frac) {
    if (frac < 0.0 || frac > 1.0) throw config_error("block_complete: treat_frac out of [0,1]");
    int n_blocks = 0;
    for (int b : block_of) n_blocks = std::max(n_blocks, b + 1);
    std::vector<long> sizes(static_cast<std::size_t>(n_blocks), 0);
    for (int b : block_of)
      if (b >= 0) ++sizes[static_cast<std::size_t>(b)];
    std::vector<long> counts(static_cast<std::size_t>(n_blocks), 0);
    for (int b = 0; b < n_blocks; ++b) {
      long c = std::llround(frac * static_cast<double>(sizes[static_cast<std::size_t>(b)]));
      counts[static_cast<std::size_t>(b)] = std::min(std::max(c, 0L), sizes[static_cast<std::size_t>(b)]);
    }
    return block_complete(block_of, std::move(counts));
  }

  static Design sequential_neighbor(Eigen::VectorXd base_p, double modifier_factor,
                                    std::vector<bool> eligible = {}) {
    Design d;
    const long n = base_p.size();
    d.eligible_ = normalize_mask(std::move(eligible), n);
    for (long i = 0; i < n; ++i) {
      if (!d.eligible_[static_cast<std::size_t>(i)]) base_p[i] = 0.0;
      if (base_p[i] < 0.0 || base_p[i] > 1.0)
        throw config_error("sequential_neighbor: base probability out of [0,1]");
    }
    if (modifier_factor < 0.0)
      throw config_error("sequential_neighbor: negative modifier factor");
    d.spec_ = SequentialNeighborDesign{std::move(base_p), modifier_factor};
    return d;
  }

  const Spec& spec() const { return spec_; }
  const std::vector<bool>& eligible() const { return eligible_; }
  long n() const { return static_cast<long>(eligible_.size()); }

 private:
  static std::vector<bool> normalize_mask(std::vector<bool> mask, long n) {
    if (mask.empty()) mask.assign(static_cast<std::size_t>(n), true);
    if (static_cast<long>(mask.size()) != n)
      throw config_error("eligibility mask size mismatch");
    return mask;
  }

  Spec spec_;
  std::vector<bool> eligible_;
};

// One realization of the treatment vector. Ineligible units are always
// control. The graph is consulted only by sequential designs.
inline std::vector<int> draw_assignment(const Design& design, const Graph& g, RngStream& rng) {
  const long n = design.n();
  if (g.n() != n) throw data_error("draw_assignment: design and graph sizes differ");
  std::vector<int> d(static_cast<std::size_t>(n), 0);
  if (const auto* iid = std::get_if<IidBernoulliDesign>(&design.spec())) {
    for (long i = 0; i < n; ++i)
      if (design.eligible()[static_cast<std::size_t>(i)] && rng.bernoulli(iid->p[i])) d[static_cast<std::size_t>(i)] = 1;
  } else if (const auto* block = std::get_if<BlockCompleteDesign>(&design.spec())) {
    std::vector<std::vector<int>> members(block->block_size.size());
    for (long i = 0; i < n; ++i)
      if (block->block_of[static_cast<std::size_t>(i)] >= 0)
        members[static_cast<std::size_t>(block->block_of[static_cast<std::size_t>(i)])].push_back(static_cast<int>(i));
    for (std::size_t b = 0; b < members.size(); ++b) {
      auto& units = members[b];
      const long k = block->treat_count[b];
      // partial Fisher-Yates: first k slots become the treated set
      for (long j = 0; j < k; ++j) {
        std::size_t pick = static_cast<std::size_t>(j) +
                           static_cast<std::size_t>(rng.bounded(units.size() - static_cast<std::size_t>(j)));
        std::swap(units[static_cast<std::size_t>(j)], units[pick]);
        d[static_cast<std::size_t>(units[static_cast<std::size_t>(j)])] = 1;
      }
    }
  } else {
    const auto& seq = std::get<SequentialNeighborDesign>(design.spec());
    std::vector<int> order;
    for (long i = 0; i < n; ++i)
      if (design.eligible()[static_cast<std::size_t>(i)]) order.push_back(static_cast<int>(i));
    rng.shuffle(order);
    std::vector<char> processed(static_cast<std::size_t>(n), 0);
    for (int i : order) {
      double p = seq.base_p[i];
      for (int j : g.sym_neighbors(i))
        if (processed[static_cast<std::size_t>(j)] && d[static_cast<std::size_t>(j)] == 1) {
          p = std::min(1.0, std::max(0.0, p * seq.modifier_factor));
          break;
        }
      if (rng.bernoulli(p)) d[static_cast<std::size_t>(i)] = 1;
      processed[static_cast<std::size_t>(i)] = 1;
    }
  }
  return d;
}

struct PropensityTable {
  enum class Method { Exact, MonteCarlo };

  Eigen::MatrixXd pi;  // n x |support|
  Method method = Method::Exact;
  long mc_draws = 0;
  std::uint64_t mc_seed = 0;
  Eigen::MatrixXd mc_std_err;  // empty when exact
};

namespace detail {

// P(component = 1) per unit, for closed-form cases. Independence across
// components is only claimed under IID designs; callers enforce that.
inline Eigen::VectorXd component_one_probability(const ExposureComponent& comp,
                                                 const Design& design, const Graph& g) {
  const long n = design.n();
  Eigen::VectorXd prob(n);
  const bool treats0 = comp.treated(0);
  const bool treats1 = comp.treated(1);
  if (const auto* iid = std::get_if<IidBernoulliDesign>(&design.spec())) {
    // per-unit treated-arm probability under arm filter
    auto arm_prob = [&](long j) {
      return iid->p[j] * (treats1 ? 1.0 : 0.0) + (1.0 - iid->p[j]) * (treats0 ? 1.0 : 0.0);
    };
    switch (comp.kind) {
      case ExposureKind::Direct:
        for (long i = 0; i < n; ++i) prob[i] = arm_prob(i);
        return prob;
      case ExposureKind::AnyTreatedNeighbor:
        for (long i = 0; i < n; ++i) {
          double none = 1.0;
          for (int j : g.out_neighbors(static_cast<int>(i))) none *= 1.0 - arm_prob(j);
          prob[i] = 1.0 - none;
        }
        return prob;
      default:
        throw config_error(
            "exact_propensity: friend-of-friend exposures have no closed form; use mc_propensity");
    }
  }
  if (const auto* block = std::get_if<BlockCompleteDesign>(&design.spec())) {
    switch (comp.kind) {
      case ExposureKind::Direct:
        for (long i = 0; i < n; ++i) {
          int b = block->block_of[static_cast<std::size_t>(i)];
          double treated =
              b < 0 ? 0.0
                    : static_cast<double>(block->treat_count[static_cast<std::size_t>(b)]) /
                          static_cast<double>(block->block_size[static_cast<std::size_t>(b)]);
          prob[i] = treated * (treats1 ? 1.0 : 0.0) + (1.0 - treated) * (treats0 ? 1.0 : 0.0);
        }
        return prob;
      case ExposureKind::AnyTreatedNeighbor: {
        if (treats0 || !treats1)
          throw config_error(
              "exact_propensity: block designs support neighbor exposures only with arm filter "
              "{1}; use mc_propensity");
        const long n_blocks = static_cast<long>(block->block_size.size());
        std::vector<long> in_block(static_cast<std::size_t>(n_blocks));
        for (long i = 0; i < n; ++i) {
          std::fill(in_block.begin(), in_block.end(), 0L);
          for (int j : g.out_neighbors(static_cast<int>(i))) {
            int b = block->block_of[static_cast<std::size_t>(j)];
            if (b >= 0) ++in_block[static_cast<std::size_t>(b)];
          }
          double none = 1.0;
          for (long b = 0; b < n_blocks; ++b)
            if (in_block[static_cast<std::size_t>(b)] > 0)
              none *= hypergeometric_none(block->block_size[static_cast<std::size_t>(b)],
                                          block->treat_count[static_cast<std::size_t>(b)],
                                          in_block[static_cast<std::size_t>(b)]);
          prob[i] = 1.0 - none;
        }
        return prob;
      }
      default:
        throw config_error(
            "exact_propensity: friend-of-friend exposures have no closed form; use mc_propensity");
    }
  }
  throw config_error(
      "exact_propensity: sequential designs have no closed-form propensities; use mc_propensity");
}

}  // namespace detail

// Closed-form generalized propensity scores. Supported pairs: direct or
// any-treated-neighbor components under IID Bernoulli or block-complete
// designs; factorial mappings only under IID Bernoulli, where the components
// depend on disjoint treatment coordinates (no self-links) and are therefore
// independent.
inline PropensityTable exact_propensity(const ExposureMapping& m, const Design& design,
                                        const Graph& g) {
  m.validate();
  if (m.n_components() > 1 && !std::holds_alternative<IidBernoulliDesign>(design.spec()))
    throw config_error(
        "exact_propensity: factorial mappings are closed-form only under IID Bernoulli designs; "
        "use mc_propensity");
  const long n = design.n();
  const int c = m.n_components();
  std::vector<Eigen::VectorXd> marginal;
  marginal.reserve(static_cast<std::size_t>(c));
  for (const auto& comp : m.components)
    marginal.push_back(detail::component_one_probability(comp, design, g));
  PropensityTable table;
  table.method = PropensityTable::Method::Exact;
  table.pi.resize(n, m.support_size());
  for (long t = 0; t < m.support_size(); ++t) {
    Eigen::VectorXd cell = Eigen::VectorXd::Ones(n);
    for (int k = 0; k < c; ++k) {
      const bool bit = (t >> (c - 1 - k)) & 1;
      const auto& p1 = marginal[static_cast<std::size_t>(k)];
      if (bit)
        cell.array() *= p1.array();
      else
        cell.array() *= 1.0 - p1.array();
    }
    table.pi.col(t) = cell;
  }
  return table;
}

// Monte-Carlo propensities over R independent assignment draws. Counts are
// integers accumulated per chunk, so the result is identical for any thread
// count at a fixed seed.
inline PropensityTable mc_propensity(const ExposureMapping& m, const Design& design,
                                     const Graph& g, long draws, std::uint64_t seed,
                                     int threads = 1) {
  m.validate();
  if (draws < 1) throw config_error("mc_propensity: draw count must be >= 1");
  const long n = design.n();
  const long support = m.support_size();
  ExposureEvaluator evaluator(m, g);

  const long chunk = 4096;
  const long n_chunks = (draws + chunk - 1) / chunk;
  std::vector<std::vector<std::int64_t>> counts(
      static_cast<std::size_t>(n_chunks),
      std::vector<std::int64_t>(static_cast<std::size_t>(n * support), 0));
  parallel_for(n_chunks, threads, [&](long ci) {
    auto& local = counts[static_cast<std::size_t>(ci)];
    const long lo = ci * chunk;
    const long hi = std::min(draws, lo + chunk);
    for (long r = lo; r < hi; ++r) {
      RngStream rng(seed, static_cast<std::uint64_t>(r));
      auto d = draw_assignment(design, g, rng);
      auto t = evaluator.exposures(d);
      for (long i = 0; i < n; ++i)
        ++local[static_cast<std::size_t>(i * support + t[static_cast<std::size_t>(i)])];
    }
  });

  PropensityTable table;
  table.method = PropensityTable::Method::MonteCarlo;
  table.mc_draws = draws;
  table.mc_seed = seed;
  table.pi.setZero(n, support);
  for (const auto& local : counts)
    for (long i = 0; i < n; ++i)
      for (long t = 0; t < support; ++t)
        table.pi(i, t) += static_cast<double>(local[static_cast<std::size_t>(i * support + t)]);
  table.pi /= static_cast<double>(draws);
  table.mc_std_err =
      (table.pi.array() * (1.0 - table.pi.array()) / static_cast<double>(draws)).sqrt();
  return table;
}

// Units with strictly interior propensities for every support value.
struct EffectiveSample {
  std::vector<int> units;
};

inline EffectiveSample effective_sample(const PropensityTable& table) {
  EffectiveSample sample;
  for (long i = 0; i < table.pi.rows(); ++i) {
    bool interior = true;
    for (long t = 0; t < table.pi.cols(); ++t)
      if (!(table.pi(i, t) > 0.0 && table.pi(i, t) < 1.0)) {
        interior = false;
        break;
      }
    if (interior) sample.units.push_back(static_cast<int>(i));
  }
  if (sample.units.empty())
    throw data_error("effective sample is empty: no unit has interior propensities for all "
                     "exposure values");
  return sample;
}

// Realized effective sample sizes per exposure value.
inline std::vector<long> cell_counts(const std::vector<int>& exposures,
                                     const std::vector<int>& units, long support) {
  std::vector<long> counts(static_cast<std::size_t>(support), 0);
  for (int i : units) ++counts[static_cast<std::size_t>(exposures[static_cast<std::size_t>(i)])];
  return counts;
}

// Log2 of the assignment-space size, or a negative value when the design is
// not enumerable (sequential designs).
inline double assignment_space_log2(const Design& design) {
  if (const auto* iid = std::get_if<IidBernoulliDesign>(&design.spec())) {
    double bits = 0.0;
    for (long i = 0; i < design.n(); ++i)
      if (iid->p[i] > 0.0 && iid->p[i] < 1.0) bits += 1.0;
    return bits;
  }
  if (const auto* block = std::get_if<BlockCompleteDesign>(&design.spec())) {
    double bits = 0.0;
    for (std::size_t b = 0; b < block->block_size.size(); ++b) {
      double log_choose = 0.0;
      long m = block->block_size[b], k = block->treat_count[b];
      for (long j = 0; j < k; ++j)
        log_choose += std::log2(static_cast<double>(m - j)) - std::log2(static_cast<double>(j + 1));
      bits += log_choose;
    }
    return bits;
  }
  return -1.0;
}

// Visits every assignment with its probability. Only IID Bernoulli and
// block-complete designs are enumerable; guard with assignment_space_log2.
inline void for_each_assignment(const Design& design,
                                const std::function<void(const std::vector<int>&, double)>& fn) {
  const long n = design.n();
  std::vector<int> d(static_cast<std::size_t>(n), 0);
  if (const auto* iid = std::get_if<IidBernoulliDesign>(&design.spec())) {
    std::vector<long> free_units;
    for (long i = 0; i < n; ++i) {
      if (iid->p[i] >= 1.0)
        d[static_cast<std::size_t>(i)] = 1;
      else if (iid->p[i] > 0.0)
        free_units.push_back(i);
    }
    if (free_units.size() > 30)
      throw numerical_error("for_each_assignment: assignment space too large");
    const std::uint64_t total = 1ULL << free_units.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double prob = 1.0;
      for (std::size_t b = 0; b < free_units.size(); ++b) {
        bool treated = (mask >> b) & 1ULL;
        d[static_cast<std::size_t>(free_units[b])] = treated ? 1 : 0;
        prob *= treated ? iid->p[free_units[b]] : 1.0 - iid->p[free_units[b]];
      }
      fn(d, prob);
    }
    return;
  }
  if (const auto* block = std::get_if<BlockCompleteDesign>(&design.spec())) {
    std::vector<std::vector<int>> members(block->block_size.size());
    for (long i = 0; i < n; ++i)
      if (block->block_of[static_cast<std::size_t>(i)] >= 0)
        members[static_cast<std::size_t>(block->block_of[static_cast<std::size_t>(i)])].push_back(static_cast<int>(i));
    // product over blocks of all k-subsets, each block uniform
    std::function<void(std::size_t, double)> recurse = [&](std::size_t b, double prob) {
      if (b == members.size()) {
        fn(d, prob);
        return;
      }
      const auto& units = members[b];
      const long m = static_cast<long>(units.size());
      const long k = block->treat_count[b];
      double n_subsets = 1.0;
      for (long j = 0; j < k; ++j)
        n_subsets *= static_cast<double>(m - j) / static_cast<double>(j + 1);
      const double block_prob = 1.0 / n_subsets;
      std::vector<long> pick(static_cast<std::size_t>(k));
      std::function<void(long, long)> choose = [&](long start, long depth) {
        if (depth == k) {
          recurse(b + 1, prob * block_prob);
          return;
        }
        for (long j = start; j < m; ++j) {
          d[static_cast<std::size_t>(units[static_cast<std::size_t>(j)])] = 1;
          choose(j + 1, depth + 1);
          d[static_cast<std::size_t>(units[static_cast<std::size_t>(j)])] = 0;
        }
      };
      choose(0, 0);
    };
    recurse(0, 1.0);
    return;
  }
  throw config_error("for_each_assignment: sequential designs are not enumerable");
}

}  // namespace netexp
