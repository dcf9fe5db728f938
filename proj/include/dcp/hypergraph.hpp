#pragma once

#include <cmath>
#include <limits>
#include <random>

#include "dcp/blocks.hpp"

namespace dcp {

// 2-dimensional vertex weight: [computation flops, data bytes].
struct Weight2D {
  FlopCount flops = 0;
  ByteCount bytes = 0;

  Weight2D& operator+=(const Weight2D& o) {
    flops += o.flops;
    bytes += o.bytes;
    return *this;
  }
  Weight2D& operator-=(const Weight2D& o) {
    flops -= o.flops;
    bytes -= o.bytes;
    return *this;
  }
};

struct Hyperedge {
  ByteCount weight = 0;       // size of the data block it represents
  std::vector<int> members;   // vertex ids, data-group vertex first
};

// Vertices are computation blocks plus collapsed co-location groups; each
// hyperedge connects one data block's group vertex to the computation blocks
// that consume or produce it.
struct Hypergraph {
  std::vector<Weight2D> weights;
  std::vector<Hyperedge> edges;
  int comp_count = 0;   // vertices [0, comp_count) are computation blocks
  int group_count = 0;  // vertices [comp_count, comp_count + group_count)

  int vertex_count() const { return static_cast<int>(weights.size()); }

  Weight2D total_weight() const {
    Weight2D t;
    for (const auto& w : weights) t += w;
    return t;
  }

  int comp_vertex(int comp_id) const { return comp_id; }
  int group_vertex(int group_id) const { return comp_count + group_id; }
};

struct Partition {
  std::vector<int> assignment;  // vertex -> part in [0, parts)
  int parts = 1;
  double eps_comp = 0.0;
  double eps_data = 0.0;
};

inline Hypergraph build_hypergraph(const BlockGraph& g) {
  Hypergraph h;
  h.comp_count = static_cast<int>(g.comp_blocks.size());
  h.group_count = static_cast<int>(g.groups.size());
  h.weights.resize(static_cast<size_t>(h.comp_count + h.group_count));
  for (const auto& c : g.comp_blocks)
    h.weights[static_cast<size_t>(c.id)] = {c.flops_weight, 0};
  for (const auto& grp : g.groups)
    h.weights[static_cast<size_t>(h.comp_count + grp.id)] = {0, grp.size_bytes};

  // One hyperedge per data block.
  std::vector<std::vector<int>> users(g.data_blocks.size());
  for (const auto& c : g.comp_blocks) {
    users[static_cast<size_t>(c.q_block)].push_back(c.id);
    users[static_cast<size_t>(c.kv_block)].push_back(c.id);
    users[static_cast<size_t>(c.o_block)].push_back(c.id);
  }
  h.edges.reserve(g.data_blocks.size());
  for (const auto& d : g.data_blocks) {
    Hyperedge e;
    e.weight = d.size_bytes;
    e.members.push_back(h.group_vertex(g.group_of_block[static_cast<size_t>(d.id)]));
    for (int c : users[static_cast<size_t>(d.id)]) e.members.push_back(c);
    h.edges.push_back(std::move(e));
  }
  return h;
}

// Connectivity-minus-one objective: sum over hyperedges of s_e * (lambda_e - 1),
// where lambda_e is the number of parts the edge spans.
inline ByteCount connectivity_cost(const Hypergraph& h, const Partition& p) {
  ByteCount cost = 0;
  std::vector<char> seen(static_cast<size_t>(p.parts), 0);
  for (const auto& e : h.edges) {
    int lambda = 0;
    for (int v : e.members) {
      const int part = p.assignment[static_cast<size_t>(v)];
      if (!seen[static_cast<size_t>(part)]) {
        seen[static_cast<size_t>(part)] = 1;
        ++lambda;
      }
    }
    for (int v : e.members) seen[static_cast<size_t>(p.assignment[static_cast<size_t>(v)])] = 0;
    if (lambda > 1) cost += e.weight * static_cast<ByteCount>(lambda - 1);
  }
  return cost;
}

namespace detail {

struct BalanceCaps {
  long double flops_cap = 0;
  long double bytes_cap = 0;

  static BalanceCaps of(const Hypergraph& h, int parts, double eps_comp,
                        double eps_data) {
    const Weight2D total = h.total_weight();
    BalanceCaps caps;
    // Tiny relative slack absorbs floating-point rounding at exact splits.
    caps.flops_cap = (1.0L + static_cast<long double>(eps_comp)) *
                         static_cast<long double>(total.flops) / parts +
                     1e-9L * static_cast<long double>(total.flops);
    caps.bytes_cap = (1.0L + static_cast<long double>(eps_data)) *
                         static_cast<long double>(total.bytes) / parts +
                     1e-9L * static_cast<long double>(total.bytes);
    return caps;
  }

  bool fits(const Weight2D& w) const {
    return static_cast<long double>(w.flops) <= flops_cap &&
           static_cast<long double>(w.bytes) <= bytes_cap;
  }
};

inline std::vector<Weight2D> part_weights(const Hypergraph& h,
                                          const std::vector<int>& assignment,
                                          int parts) {
  std::vector<Weight2D> w(static_cast<size_t>(parts));
  for (int v = 0; v < h.vertex_count(); ++v)
    w[static_cast<size_t>(assignment[static_cast<size_t>(v)])] += h.weights[static_cast<size_t>(v)];
  return w;
}

inline bool balanced(const Hypergraph& h, const std::vector<int>& assignment,
                     int parts, const BalanceCaps& caps) {
  for (const auto& w : part_weights(h, assignment, parts))
    if (!caps.fits(w)) return false;
  return true;
}

// Incremental connectivity bookkeeping: per edge, how many members sit in
// each part.
class EdgeCounts {
 public:
  EdgeCounts(const Hypergraph& h, int parts) : h_(h), parts_(parts) {
    counts_.resize(h.edges.size());
    lambda_.resize(h.edges.size(), 0);
    for (size_t e = 0; e < h.edges.size(); ++e)
      counts_[e].assign(static_cast<size_t>(parts), 0);
    incident_.resize(static_cast<size_t>(h.vertex_count()));
    for (size_t e = 0; e < h.edges.size(); ++e)
      for (int v : h.edges[e].members)
        incident_[static_cast<size_t>(v)].push_back(static_cast<int>(e));
  }

  void reset(const std::vector<int>& assignment) {
    cost_ = 0;
    for (size_t e = 0; e < h_.edges.size(); ++e) {
      std::fill(counts_[e].begin(), counts_[e].end(), 0);
      lambda_[e] = 0;
      for (int v : h_.edges[e].members) {
        int part = assignment[static_cast<size_t>(v)];
        if (counts_[e][static_cast<size_t>(part)]++ == 0) ++lambda_[e];
      }
      if (lambda_[e] > 1) cost_ += h_.edges[e].weight * static_cast<ByteCount>(lambda_[e] - 1);
    }
  }

  // Cost delta of moving vertex v from part `from` to part `to`.
  long long move_delta(int v, int from, int to) const {
    long long delta = 0;
    for (int e : incident_[static_cast<size_t>(v)]) {
      const auto w = static_cast<long long>(h_.edges[static_cast<size_t>(e)].weight);
      if (counts_[static_cast<size_t>(e)][static_cast<size_t>(from)] == 1) delta -= w;
      if (counts_[static_cast<size_t>(e)][static_cast<size_t>(to)] == 0) delta += w;
    }
    return delta;
  }

  void apply_move(int v, int from, int to) {
    for (int e : incident_[static_cast<size_t>(v)]) {
      auto& c = counts_[static_cast<size_t>(e)];
      const auto w = h_.edges[static_cast<size_t>(e)].weight;
      if (--c[static_cast<size_t>(from)] == 0) {
        --lambda_[static_cast<size_t>(e)];
        cost_ -= w;
      }
      if (c[static_cast<size_t>(to)]++ == 0) {
        ++lambda_[static_cast<size_t>(e)];
        cost_ += w;
      }
    }
  }

  ByteCount cost() const { return cost_; }
  const std::vector<int>& incident(int v) const { return incident_[static_cast<size_t>(v)]; }

 private:
  const Hypergraph& h_;
  int parts_;
  std::vector<std::vector<int>> counts_;
  std::vector<int> lambda_;
  std::vector<std::vector<int>> incident_;
  ByteCount cost_ = 0;
};

}  // namespace detail

// Global optimum by enumeration of restricted-growth strings (part labels in
// first-use order), pruning partial assignments that already violate the
// balance caps or cannot beat the incumbent. Test oracle for the heuristic.
inline Partition partition_exhaustive(const Hypergraph& h, int parts,
                                      double eps_comp, double eps_data) {
  const int n = h.vertex_count();
  if (n > 16) throw TooLargeError("partition_exhaustive: more than 16 vertices");
  if (parts < 1) throw Error("partition_exhaustive: parts must be >= 1");

  const auto caps = detail::BalanceCaps::of(h, parts, eps_comp, eps_data);
  for (int v = 0; v < n; ++v)
    if (!caps.fits(h.weights[static_cast<size_t>(v)]))
      throw InfeasibleError("partition_exhaustive: a single vertex exceeds the balance cap");

  std::vector<int> assignment(static_cast<size_t>(n), 0);
  std::vector<Weight2D> loads(static_cast<size_t>(parts));
  // Per-edge member counts per part, maintained incrementally.
  std::vector<std::vector<int>> counts(h.edges.size(),
                                       std::vector<int>(static_cast<size_t>(parts), 0));
  std::vector<int> lambda(h.edges.size(), 0);
  std::vector<std::vector<int>> incident(static_cast<size_t>(n));
  for (size_t e = 0; e < h.edges.size(); ++e)
    for (int v : h.edges[e].members) incident[static_cast<size_t>(v)].push_back(static_cast<int>(e));

  ByteCount partial = 0;
  ByteCount best = std::numeric_limits<ByteCount>::max();
  std::vector<int> best_assignment;
  bool found = false;

  auto place = [&](int v, int p) {
    loads[static_cast<size_t>(p)] += h.weights[static_cast<size_t>(v)];
    for (int e : incident[static_cast<size_t>(v)]) {
      if (counts[static_cast<size_t>(e)][static_cast<size_t>(p)]++ == 0) {
        if (++lambda[static_cast<size_t>(e)] > 1) partial += h.edges[static_cast<size_t>(e)].weight;
      }
    }
    assignment[static_cast<size_t>(v)] = p;
  };
  auto unplace = [&](int v, int p) {
    loads[static_cast<size_t>(p)] -= h.weights[static_cast<size_t>(v)];
    for (int e : incident[static_cast<size_t>(v)]) {
      if (--counts[static_cast<size_t>(e)][static_cast<size_t>(p)] == 0) {
        if (lambda[static_cast<size_t>(e)]-- > 1) partial -= h.edges[static_cast<size_t>(e)].weight;
      }
    }
  };

  // Recursion over vertices; `used` = number of nonempty parts so far.
  auto rec = [&](auto&& self, int v, int used) -> void {
    if (partial >= best && found) return;
    if (v == n) {
      if (partial < best || !found) {
        best = partial;
        best_assignment = assignment;
        found = true;
      }
      return;
    }
    const int limit = std::min(parts - 1, used);
    for (int p = 0; p <= limit; ++p) {
      place(v, p);
      if (caps.fits(loads[static_cast<size_t>(p)]))
        self(self, v + 1, std::max(used, p + 1));
      unplace(v, p);
    }
  };
  rec(rec, 0, 0);

  if (!found)
    throw InfeasibleError("partition_exhaustive: no feasible partition under the balance caps");
  Partition p;
  p.assignment = best_assignment;
  p.parts = parts;
  p.eps_comp = eps_comp;
  p.eps_data = eps_data;
  return p;
}

namespace detail {

// One FM-style pass: repeatedly applies the best feasible single-vertex move
// (positive or negative gain), locking moved vertices, then rolls back to the
// best prefix. The result never costs more than the input.
inline bool fm_pass(const Hypergraph& h, std::vector<int>& assignment, int parts,
                    const BalanceCaps& caps, EdgeCounts& counts,
                    std::vector<Weight2D>& loads) {
  const int n = h.vertex_count();
  std::vector<char> locked(static_cast<size_t>(n), 0);
  counts.reset(assignment);
  const ByteCount start_cost = counts.cost();
  ByteCount best_cost = start_cost;

  struct Move {
    int v;
    int from;
    int to;
  };
  std::vector<Move> applied;
  size_t best_prefix = 0;

  for (int step = 0; step < n; ++step) {
    long long best_delta = std::numeric_limits<long long>::max();
    int best_v = -1, best_to = -1;
    for (int v = 0; v < n; ++v) {
      if (locked[static_cast<size_t>(v)]) continue;
      const int from = assignment[static_cast<size_t>(v)];
      for (int to = 0; to < parts; ++to) {
        if (to == from) continue;
        Weight2D w = loads[static_cast<size_t>(to)];
        w += h.weights[static_cast<size_t>(v)];
        if (!caps.fits(w)) continue;
        const long long delta = counts.move_delta(v, from, to);
        if (delta < best_delta) {
          best_delta = delta;
          best_v = v;
          best_to = to;
        }
      }
    }
    if (best_v < 0) break;
    const int from = assignment[static_cast<size_t>(best_v)];
    counts.apply_move(best_v, from, best_to);
    loads[static_cast<size_t>(from)] -= h.weights[static_cast<size_t>(best_v)];
    loads[static_cast<size_t>(best_to)] += h.weights[static_cast<size_t>(best_v)];
    assignment[static_cast<size_t>(best_v)] = best_to;
    locked[static_cast<size_t>(best_v)] = 1;
    applied.push_back({best_v, from, best_to});
    if (counts.cost() < best_cost) {
      best_cost = counts.cost();
      best_prefix = applied.size();
    }
  }

  // Roll back moves past the best prefix.
  for (size_t i = applied.size(); i > best_prefix; --i) {
    const Move& m = applied[i - 1];
    counts.apply_move(m.v, m.to, m.from);
    loads[static_cast<size_t>(m.to)] -= h.weights[static_cast<size_t>(m.v)];
    loads[static_cast<size_t>(m.from)] += h.weights[static_cast<size_t>(m.v)];
    assignment[static_cast<size_t>(m.v)] = m.from;
  }
  return best_cost < start_cost;
}

// Greedy sweep pass for large graphs: each vertex in id order moves to its
// best strictly-improving feasible part.
inline bool greedy_pass(const Hypergraph& h, std::vector<int>& assignment,
                        int parts, const BalanceCaps& caps, EdgeCounts& counts,
                        std::vector<Weight2D>& loads) {
  bool improved = false;
  for (int v = 0; v < h.vertex_count(); ++v) {
    const int from = assignment[static_cast<size_t>(v)];
    long long best_delta = 0;
    int best_to = -1;
    for (int to = 0; to < parts; ++to) {
      if (to == from) continue;
      Weight2D w = loads[static_cast<size_t>(to)];
      w += h.weights[static_cast<size_t>(v)];
      if (!caps.fits(w)) continue;
      const long long delta = counts.move_delta(v, from, to);
      if (delta < best_delta) {
        best_delta = delta;
        best_to = to;
      }
    }
    if (best_to >= 0) {
      counts.apply_move(v, from, best_to);
      loads[static_cast<size_t>(from)] -= h.weights[static_cast<size_t>(v)];
      loads[static_cast<size_t>(best_to)] += h.weights[static_cast<size_t>(v)];
      assignment[static_cast<size_t>(v)] = best_to;
      improved = true;
    }
  }
  return improved;
}

// Moves vertices out of over-cap parts, each step picking the move that most
// reduces total overflow, breaking ties by connectivity delta. Returns false
// if stuck.
inline bool repair(const Hypergraph& h, std::vector<int>& assignment, int parts,
                   const BalanceCaps& caps, EdgeCounts& counts,
                   std::vector<Weight2D>& loads) {
  auto overflow = [&](const Weight2D& w) -> long double {
    long double f = 0;
    if (static_cast<long double>(w.flops) > caps.flops_cap && caps.flops_cap > 0)
      f += (static_cast<long double>(w.flops) - caps.flops_cap) / caps.flops_cap;
    if (static_cast<long double>(w.bytes) > caps.bytes_cap && caps.bytes_cap > 0)
      f += (static_cast<long double>(w.bytes) - caps.bytes_cap) / caps.bytes_cap;
    return f;
  };
  auto total_overflow = [&]() {
    long double f = 0;
    for (const auto& w : loads) f += overflow(w);
    return f;
  };

  long double current = total_overflow();
  int guard = 4 * h.vertex_count() * parts + 16;
  while (current > 0 && guard-- > 0) {
    long double best_reduction = 0;
    long long best_delta = std::numeric_limits<long long>::max();
    int best_v = -1, best_to = -1;
    for (int v = 0; v < h.vertex_count(); ++v) {
      const int from = assignment[static_cast<size_t>(v)];
      if (overflow(loads[static_cast<size_t>(from)]) == 0) continue;
      for (int to = 0; to < parts; ++to) {
        if (to == from) continue;
        Weight2D wf = loads[static_cast<size_t>(from)];
        wf -= h.weights[static_cast<size_t>(v)];
        Weight2D wt = loads[static_cast<size_t>(to)];
        wt += h.weights[static_cast<size_t>(v)];
        const long double reduction =
            overflow(loads[static_cast<size_t>(from)]) + overflow(loads[static_cast<size_t>(to)]) -
            overflow(wf) - overflow(wt);
        if (reduction <= 0) continue;
        const long long delta = counts.move_delta(v, from, to);
        if (reduction > best_reduction ||
            (reduction == best_reduction && delta < best_delta)) {
          best_reduction = reduction;
          best_delta = delta;
          best_v = v;
          best_to = to;
        }
      }
    }
    if (best_v < 0) return false;
    const int from = assignment[static_cast<size_t>(best_v)];
    counts.apply_move(best_v, from, best_to);
    loads[static_cast<size_t>(from)] -= h.weights[static_cast<size_t>(best_v)];
    loads[static_cast<size_t>(best_to)] += h.weights[static_cast<size_t>(best_v)];
    assignment[static_cast<size_t>(best_v)] = best_to;
    current -= best_reduction;
    current = std::max<long double>(current, 0);
    if (current == 0) current = total_overflow();  // re-derive, avoids drift
  }
  return current == 0;
}

struct VertexOrder {
  // Normalized dominant weight, for LPT-style placement.
  static std::vector<int> by_weight_desc(const Hypergraph& h) {
    const Weight2D total = h.total_weight();
    std::vector<int> order(static_cast<size_t>(h.vertex_count()));
    std::iota(order.begin(), order.end(), 0);
    auto nw = [&](int v) -> long double {
      const auto& w = h.weights[static_cast<size_t>(v)];
      long double f = total.flops ? static_cast<long double>(w.flops) / total.flops : 0;
      long double b = total.bytes ? static_cast<long double>(w.bytes) / total.bytes : 0;
      return std::max(f, b);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return nw(a) > nw(b); });
    return order;
  }
};

// Largest-first greedy placement onto the part with the lowest resulting
// normalized load among feasible parts.
inline std::vector<int> lpt_assign(const Hypergraph& h, const std::vector<int>& order,
                                   int parts, const BalanceCaps& caps) {
  std::vector<int> assignment(static_cast<size_t>(h.vertex_count()), 0);
  std::vector<Weight2D> loads(static_cast<size_t>(parts));
  for (int v : order) {
    int best = -1;
    long double best_load = std::numeric_limits<long double>::max();
    for (int p = 0; p < parts; ++p) {
      Weight2D w = loads[static_cast<size_t>(p)];
      w += h.weights[static_cast<size_t>(v)];
      const long double load =
          (caps.flops_cap > 0 ? static_cast<long double>(w.flops) / caps.flops_cap : 0) +
          (caps.bytes_cap > 0 ? static_cast<long double>(w.bytes) / caps.bytes_cap : 0);
      const bool fits = caps.fits(w);
      // Prefer feasible parts; among them the least loaded.
      const long double key = fits ? load : 1e9L + load;
      if (key < best_load) {
        best_load = key;
        best = p;
      }
    }
    assignment[static_cast<size_t>(v)] = best;
    loads[static_cast<size_t>(best)] += h.weights[static_cast<size_t>(v)];
  }
  return assignment;
}

// Connected components over hyperedges.
inline std::vector<int> components(const Hypergraph& h) {
  std::vector<int> comp(static_cast<size_t>(h.vertex_count()), -1);
  std::vector<std::vector<int>> incident(static_cast<size_t>(h.vertex_count()));
  for (size_t e = 0; e < h.edges.size(); ++e)
    for (int v : h.edges[e].members) incident[static_cast<size_t>(v)].push_back(static_cast<int>(e));
  int next = 0;
  std::vector<int> stack;
  for (int v = 0; v < h.vertex_count(); ++v) {
    if (comp[static_cast<size_t>(v)] >= 0) continue;
    comp[static_cast<size_t>(v)] = next;
    stack.push_back(v);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int e : incident[static_cast<size_t>(u)]) {
        for (int w : h.edges[static_cast<size_t>(e)].members) {
          if (comp[static_cast<size_t>(w)] < 0) {
            comp[static_cast<size_t>(w)] = next;
            stack.push_back(w);
          }
        }
      }
    }
    ++next;
  }
  return comp;
}

// Heavy-edge coarsening: greedily matches each vertex with the neighbour of
// largest accumulated edge weight, subject to the merged weight fitting the
// caps. Returns the coarse graph and the fine->coarse vertex map.
inline std::pair<Hypergraph, std::vector<int>> coarsen(const Hypergraph& h,
                                                       const BalanceCaps& caps) {
  const int n = h.vertex_count();
  std::vector<std::vector<std::pair<int, int>>> incident(static_cast<size_t>(n));
  for (size_t e = 0; e < h.edges.size(); ++e)
    for (int v : h.edges[e].members)
      incident[static_cast<size_t>(v)].push_back({static_cast<int>(e), 0});

  std::vector<int> match(static_cast<size_t>(n), -1);
  std::vector<long double> score(static_cast<size_t>(n), 0);
  for (int v = 0; v < n; ++v) {
    if (match[static_cast<size_t>(v)] >= 0) continue;
    // Accumulate connection weight to unmatched neighbours.
    std::vector<std::pair<int, long double>> neigh;
    for (auto [e, _] : incident[static_cast<size_t>(v)]) {
      const auto& edge = h.edges[static_cast<size_t>(e)];
      const long double share =
          static_cast<long double>(edge.weight) / std::max<size_t>(edge.members.size() - 1, 1);
      for (int u : edge.members) {
        if (u == v || match[static_cast<size_t>(u)] >= 0) continue;
        bool found = false;
        for (auto& [w, s] : neigh)
          if (w == u) {
            s += share;
            found = true;
            break;
          }
        if (!found) neigh.push_back({u, share});
      }
    }
    int best = -1;
    long double best_score = 0;
    for (auto& [u, s] : neigh) {
      Weight2D merged = h.weights[static_cast<size_t>(v)];
      merged += h.weights[static_cast<size_t>(u)];
      if (!caps.fits(merged)) continue;
      if (s > best_score || (s == best_score && (best < 0 || u < best))) {
        best_score = s;
        best = u;
      }
    }
    if (best >= 0) {
      match[static_cast<size_t>(v)] = best;
      match[static_cast<size_t>(best)] = v;
    }
  }

  std::vector<int> map(static_cast<size_t>(n), -1);
  int coarse_n = 0;
  for (int v = 0; v < n; ++v) {
    if (map[static_cast<size_t>(v)] >= 0) continue;
    map[static_cast<size_t>(v)] = coarse_n;
    if (match[static_cast<size_t>(v)] > v) map[static_cast<size_t>(match[static_cast<size_t>(v)])] = coarse_n;
    ++coarse_n;
  }

  Hypergraph coarse;
  coarse.comp_count = coarse_n;  // kind distinction is irrelevant after coarsening
  coarse.group_count = 0;
  coarse.weights.resize(static_cast<size_t>(coarse_n));
  for (int v = 0; v < n; ++v) coarse.weights[static_cast<size_t>(map[static_cast<size_t>(v)])] += h.weights[static_cast<size_t>(v)];
  for (const auto& e : h.edges) {
    Hyperedge ce;
    ce.weight = e.weight;
    for (int v : e.members) {
      const int cv = map[static_cast<size_t>(v)];
      if (std::find(ce.members.begin(), ce.members.end(), cv) == ce.members.end())
        ce.members.push_back(cv);
    }
    if (ce.members.size() > 1) coarse.edges.push_back(std::move(ce));
  }
  return {std::move(coarse), std::move(map)};
}

}  // namespace detail

struct PartitionOptions {
  int random_restarts = 4;
  int max_passes = 32;
  // Optional warm start; must have one entry per vertex when non-empty.
  std::vector<int> hint;
};

// Deterministic multilevel heuristic with FM refinement. Candidate initial
// placements (round-robin, contiguous chunking, LPT, per-component packing,
// multilevel, seeded random restarts, optional hint) are repaired to satisfy
// the balance caps and refined; the cheapest feasible result wins.
inline Partition partition_heuristic(const Hypergraph& h, int parts,
                                     double eps_comp, double eps_data,
                                     std::uint64_t seed,
                                     const PartitionOptions& options = {}) {
  if (parts < 1) throw Error("partition_heuristic: parts must be >= 1");
  const int n = h.vertex_count();
  Partition result;
  result.parts = parts;
  result.eps_comp = eps_comp;
  result.eps_data = eps_data;
  if (n == 0) return result;

  const auto caps = detail::BalanceCaps::of(h, parts, eps_comp, eps_data);
  for (int v = 0; v < n; ++v)
    if (!caps.fits(h.weights[static_cast<size_t>(v)]))
      throw InfeasibleError(
          "partition_heuristic: a single atomic vertex exceeds the balance cap "
          "(block size too large for this epsilon)");

  if (parts == 1) {
    result.assignment.assign(static_cast<size_t>(n), 0);
    return result;
  }

  std::vector<std::vector<int>> candidates;

  // Round-robin over vertex ids.
  {
    std::vector<int> a(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) a[static_cast<size_t>(v)] = v % parts;
    candidates.push_back(std::move(a));
  }
  // Contiguous chunking by cumulative normalized weight.
  {
    const Weight2D total = h.total_weight();
    std::vector<int> a(static_cast<size_t>(n));
    long double acc = 0;
    const long double whole =
        (total.flops ? 1.0L : 0.0L) + (total.bytes ? 1.0L : 0.0L);
    for (int v = 0; v < n; ++v) {
      const auto& w = h.weights[static_cast<size_t>(v)];
      int p = whole > 0 ? static_cast<int>(acc / whole * parts) : 0;
      a[static_cast<size_t>(v)] = std::min(p, parts - 1);
      if (total.flops) acc += static_cast<long double>(w.flops) / total.flops;
      if (total.bytes) acc += static_cast<long double>(w.bytes) / total.bytes;
    }
    candidates.push_back(std::move(a));
  }
  // LPT by dominant weight.
  candidates.push_back(detail::lpt_assign(h, detail::VertexOrder::by_weight_desc(h), parts, caps));
  // Component-aware packing: treat each connected component as one item.
  {
    const auto comp = detail::components(h);
    const int ncomp = 1 + *std::max_element(comp.begin(), comp.end());
    std::vector<Weight2D> cw(static_cast<size_t>(ncomp));
    for (int v = 0; v < n; ++v) cw[static_cast<size_t>(comp[static_cast<size_t>(v)])] += h.weights[static_cast<size_t>(v)];
    std::vector<int> order(static_cast<size_t>(ncomp));
    std::iota(order.begin(), order.end(), 0);
    const Weight2D total = h.total_weight();
    auto nw = [&](int c) {
      long double f = total.flops ? static_cast<long double>(cw[static_cast<size_t>(c)].flops) / total.flops : 0;
      long double b = total.bytes ? static_cast<long double>(cw[static_cast<size_t>(c)].bytes) / total.bytes : 0;
      return std::max(f, b);
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return nw(a) > nw(b); });
    std::vector<Weight2D> loads(static_cast<size_t>(parts));
    std::vector<int> part_of_comp(static_cast<size_t>(ncomp), 0);
    for (int c : order) {
      int best = 0;
      long double best_load = std::numeric_limits<long double>::max();
      for (int p = 0; p < parts; ++p) {
        Weight2D w = loads[static_cast<size_t>(p)];
        w += cw[static_cast<size_t>(c)];
        const long double load =
            (caps.flops_cap > 0 ? static_cast<long double>(w.flops) / caps.flops_cap : 0) +
            (caps.bytes_cap > 0 ? static_cast<long double>(w.bytes) / caps.bytes_cap : 0);
        const long double key = caps.fits(w) ? load : 1e9L + load;
        if (key < best_load) {
          best_load = key;
          best = p;
        }
      }
      part_of_comp[static_cast<size_t>(c)] = best;
      loads[static_cast<size_t>(best)] += cw[static_cast<size_t>(c)];
    }
    std::vector<int> a(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) a[static_cast<size_t>(v)] = part_of_comp[static_cast<size_t>(comp[static_cast<size_t>(v)])];
    candidates.push_back(std::move(a));
  }
  // Multilevel: coarsen, LPT on the coarse graph, project back (FM refines below).
  if (n > 4 * parts) {
    Hypergraph current = h;
    std::vector<std::vector<int>> maps;
    while (current.vertex_count() > std::max(4 * parts, 32)) {
      auto [coarse, map] = detail::coarsen(current, caps);
      if (coarse.vertex_count() >= current.vertex_count()) break;
      maps.push_back(std::move(map));
      current = std::move(coarse);
    }
    std::vector<int> a = detail::lpt_assign(
        current, detail::VertexOrder::by_weight_desc(current), parts,
        detail::BalanceCaps::of(current, parts, eps_comp, eps_data));
    // Refine at each level on the way back up.
    for (size_t level = maps.size(); level > 0; --level) {
      std::vector<int>& map = maps[level - 1];
      std::vector<int> fine(map.size());
      for (size_t v = 0; v < map.size(); ++v) fine[v] = a[static_cast<size_t>(map[v])];
      a = std::move(fine);
    }
    candidates.push_back(std::move(a));
  }
  // Seeded random restarts.
  {
    std::mt19937_64 rng(seed);
    for (int r = 0; r < options.random_restarts; ++r) {
      std::vector<int> a(static_cast<size_t>(n));
      for (int v = 0; v < n; ++v)
        a[static_cast<size_t>(v)] = static_cast<int>(rng() % static_cast<std::uint64_t>(parts));
      candidates.push_back(std::move(a));
    }
  }
  if (!options.hint.empty()) {
    if (static_cast<int>(options.hint.size()) != n)
      throw Error("partition_heuristic: hint size mismatch");
    for (int p : options.hint)
      if (p < 0 || p >= parts) throw Error("partition_heuristic: hint part out of range");
    candidates.push_back(options.hint);
  }

  detail::EdgeCounts counts(h, parts);
  bool any_feasible = false;
  ByteCount best_cost = std::numeric_limits<ByteCount>::max();
  std::vector<int> best_assignment;
  const bool small = n <= 256;

  for (auto& a : candidates) {
    auto loads = detail::part_weights(h, a, parts);
    counts.reset(a);
    if (!detail::balanced(h, a, parts, caps)) {
      if (!detail::repair(h, a, parts, caps, counts, loads)) continue;
    }
    for (int pass = 0; pass < options.max_passes; ++pass) {
      const bool improved = small
                                ? detail::fm_pass(h, a, parts, caps, counts, loads)
                                : detail::greedy_pass(h, a, parts, caps, counts, loads);
      if (!improved) break;
    }
    counts.reset(a);
    const ByteCount cost = counts.cost();
    if (!any_feasible || cost < best_cost ||
        (cost == best_cost && a < best_assignment)) {
      any_feasible = true;
      best_cost = cost;
      best_assignment = a;
    }
  }

  if (!any_feasible)
    throw InfeasibleError("partition_heuristic: no feasible partition found under the balance caps");
  result.assignment = std::move(best_assignment);
  return result;
}

// Validates the balance constraint of a finished partition.
inline bool partition_balanced(const Hypergraph& h, const Partition& p) {
  const auto caps = detail::BalanceCaps::of(h, p.parts, p.eps_comp, p.eps_data);
  return detail::balanced(h, p.assignment, p.parts, caps);
}

}  // namespace dcp
