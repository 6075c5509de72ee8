#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "diftgame/errors.hpp"
#include "diftgame/graph.hpp"

namespace diftgame {

enum class ArcKind { OriginalEdge, EntryArc, DestArc, SplitArc };

// Flow network over the IFG: distinguished source/sink plus one vertex per
// node (two after node splitting). Arc order is canonical and determinism of
// the solver follows from it.
struct FlowNetwork {
  struct Arc {
    int from, to;
    double capacity;
    ArcKind kind;
    int node;  // IFG node index for SplitArc (and the edge head for others)
  };

  int num_vertices = 0;
  int source = 0, sink = 1;
  std::vector<Arc> arcs;
  bool node_split = false;
  int ifg_nodes = 0;

  // Vertex layout: 0 = source, 1 = sink. Unsplit: vertex 2+v is node v.
  // Split: 2+2v is the in-copy of node v, 2+2v+1 the out-copy (v').
  int vin(int v) const { return node_split ? 2 + 2 * v : 2 + v; }
  int vout(int v) const { return node_split ? 2 + 2 * v + 1 : 2 + v; }
};

struct NodeCut {
  std::vector<int> trap_nodes;  // sorted IFG node indices
  std::vector<int> cut_arcs;    // indices into FlowNetwork::arcs
  double capacity = 0.0;
  double flow_value = 0.0;
};

// An attack path, stored as the IFG node sequence between the implicit
// source and sink.
using AttackPath = std::vector<int>;

constexpr double kCapacityTol = 1e-9;

// F = (V_G + {s,t}, E_G + s->entries + dests->t). Capacities are set by
// split_nodes; here every arc carries +inf stand-in 0 until then.
inline FlowNetwork build_flow_network(const InfoFlowGraph& g) {
  FlowNetwork f;
  f.ifg_nodes = g.size();
  f.num_vertices = 2 + g.size();
  for (int e : g.entries)
    f.arcs.push_back({f.source, f.vin(e), 0.0, ArcKind::EntryArc, e});
  for (int v = 0; v < g.size(); ++v)
    for (int u : g.adj[v])
      f.arcs.push_back({f.vout(v), f.vin(u), 0.0, ArcKind::OriginalEdge, u});
  for (int d : g.dests)
    f.arcs.push_back({f.vout(d), f.sink, 0.0, ArcKind::DestArc, d});
  return f;
}

// Node-split transform: node v becomes (v, v') joined by a SplitArc of
// capacity cost(v); every other arc gets capacity BIG = 1 + sum of costs so
// that no non-split arc can enter a minimum cut.
inline FlowNetwork split_nodes(const FlowNetwork& f, const std::vector<double>& cost) {
  FlowNetwork out;
  out.ifg_nodes = f.ifg_nodes;
  out.node_split = true;
  out.num_vertices = 2 + 2 * f.ifg_nodes;
  double big = 1.0;
  for (double c : cost) big += c;
  for (const auto& a : f.arcs) {
    FlowNetwork::Arc arc = a;
    arc.capacity = big;
    if (a.kind == ArcKind::EntryArc) {
      arc.from = out.source;
      arc.to = out.vin(a.node);
    } else if (a.kind == ArcKind::DestArc) {
      arc.from = out.vout(a.node);
      arc.to = out.sink;
    } else {
      int tail = (a.from - 2);  // unsplit layout
      arc.from = out.vout(tail);
      arc.to = out.vin(a.node);
    }
    out.arcs.push_back(arc);
  }
  for (int v = 0; v < f.ifg_nodes; ++v)
    out.arcs.push_back({out.vin(v), out.vout(v), cost[v], ArcKind::SplitArc, v});
  return out;
}

namespace detail {

struct ResidualGraph {
  struct Edge { int to; double cap; int paired; int arc_index; };
  std::vector<Edge> edges;
  std::vector<std::vector<int>> out;

  explicit ResidualGraph(const FlowNetwork& f) : out(f.num_vertices) {
    for (int i = 0; i < static_cast<int>(f.arcs.size()); ++i) {
      const auto& a = f.arcs[i];
      int fwd = static_cast<int>(edges.size());
      edges.push_back({a.to, a.capacity, fwd + 1, i});
      edges.push_back({a.from, 0.0, fwd, i});
      out[a.from].push_back(fwd);
      out[a.to].push_back(fwd + 1);
    }
  }
};

// Edmonds-Karp; BFS scans residual edges in insertion order, which is the
// canonical arc order, so the flow (and the residual cut below) is
// deterministic.
inline double max_flow(ResidualGraph& rg, int source, int sink) {
  double total = 0.0;
  const int n = static_cast<int>(rg.out.size());
  for (;;) {
    std::vector<int> via(n, -1);
    std::vector<char> seen(n, 0);
    std::deque<int> queue{source};
    seen[source] = 1;
    while (!queue.empty() && !seen[sink]) {
      int v = queue.front();
      queue.pop_front();
      for (int ei : rg.out[v]) {
        const auto& e = rg.edges[ei];
        if (e.cap > kCapacityTol && !seen[e.to]) {
          seen[e.to] = 1;
          via[e.to] = ei;
          queue.push_back(e.to);
        }
      }
    }
    if (!seen[sink]) break;
    double bottleneck = std::numeric_limits<double>::infinity();
    for (int v = sink; v != source; v = rg.edges[rg.edges[via[v]].paired].to)
      bottleneck = std::min(bottleneck, rg.edges[via[v]].cap);
    for (int v = sink; v != source; v = rg.edges[rg.edges[via[v]].paired].to) {
      rg.edges[via[v]].cap -= bottleneck;
      rg.edges[rg.edges[via[v]].paired].cap += bottleneck;
    }
    total += bottleneck;
  }
  return total;
}

inline std::vector<char> residual_reachable(const ResidualGraph& rg, int source) {
  std::vector<char> seen(rg.out.size(), 0);
  std::vector<int> stack{source};
  seen[source] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int ei : rg.out[v]) {
      const auto& e = rg.edges[ei];
      if (e.cap > kCapacityTol && !seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  }
  return seen;
}

}  // namespace detail

// Minimum-capacity source/sink cut of a node-split network. Ties between
// min-cuts break toward the source-side-minimal cut: the cut induced by the
// vertices reachable from the source in the final residual graph.
inline NodeCut min_cut(const FlowNetwork& f) {
  if (!f.node_split)
    fail(ErrorKind::Validation, "min_cut requires a node-split network");
  detail::ResidualGraph rg(f);
  double flow = detail::max_flow(rg, f.source, f.sink);
  auto side = detail::residual_reachable(rg, f.source);
  if (side[f.sink] || flow <= kCapacityTol)
    fail(ErrorKind::Disconnected, "no source->sink path in the flow network");

  NodeCut cut;
  cut.flow_value = flow;
  for (int i = 0; i < static_cast<int>(f.arcs.size()); ++i) {
    const auto& a = f.arcs[i];
    if (side[a.from] && !side[a.to]) {
      if (a.kind != ArcKind::SplitArc)
        fail(ErrorKind::Validation,
             "non-split arc crossed the minimum cut; capacities are broken");
      cut.cut_arcs.push_back(i);
      cut.trap_nodes.push_back(a.node);
      cut.capacity += a.capacity;
    }
  }
  std::sort(cut.trap_nodes.begin(), cut.trap_nodes.end());
  if (std::abs(cut.capacity - cut.flow_value) > 1e-6)
    fail(ErrorKind::Validation, "max-flow / min-cut mismatch");
  return cut;
}

// All simple source->sink paths (as IFG node sequences) in lexicographic
// node order. Throws PathExplosion beyond `limit` paths.
inline std::vector<AttackPath> enumerate_attack_paths(
    const InfoFlowGraph& g, std::uint64_t limit = 1000000) {
  if (!is_acyclic(g))
    fail(ErrorKind::Validation, "attack path enumeration requires a DAG");
  std::vector<AttackPath> paths;
  AttackPath current;

  // Iterative DFS; adjacency is already sorted, entries are sorted.
  struct Frame { int node; std::size_t next; };
  std::vector<Frame> stack;
  std::size_t entry_cursor = 0;
  auto push_node = [&](int v) {
    current.push_back(v);
    stack.push_back({v, 0});
  };
  for (;;) {
    if (stack.empty()) {
      if (entry_cursor >= g.entries.size()) break;
      push_node(g.entries[entry_cursor++]);
      continue;
    }
    auto& top = stack.back();
    if (top.next == 0 && g.is_dest(top.node)) {
      paths.push_back(current);
      if (paths.size() > limit)
        fail(ErrorKind::PathExplosion,
             "more than " + std::to_string(limit) + " attack paths");
      // A destination still forwards to further nodes when it has
      // out-edges; those longer paths stay in Omega_D but a played flow
      // absorbs at its first destination.
    }
    if (top.next < g.adj[top.node].size()) {
      int u = g.adj[top.node][top.next++];
      push_node(u);
    } else {
      stack.pop_back();
      current.pop_back();
    }
  }
  return paths;
}

// Splits `paths` by how they meet the cut: paths through exactly one trap
// node grouped under that node, paths through several listed as
// multi-crossing, paths missing the cut entirely as uncovered (possible only
// when the node set is not a cut).
struct PathClassification {
  std::map<int, std::vector<int>> by_trap_node;  // trap node -> path indices
  std::vector<int> multi_crossing;
  std::vector<int> uncovered;
};

inline PathClassification classify_paths_by_cut(const std::vector<AttackPath>& paths,
                                                const std::vector<int>& trap_nodes) {
  std::vector<char> is_trap;
  int maxn = -1;
  for (const auto& p : paths)
    for (int v : p) maxn = std::max(maxn, v);
  for (int v : trap_nodes) maxn = std::max(maxn, v);
  is_trap.assign(maxn + 1, 0);
  for (int v : trap_nodes) is_trap[v] = 1;

  PathClassification out;
  for (int i = 0; i < static_cast<int>(paths.size()); ++i) {
    int crossings = 0, where = -1;
    for (int v : paths[i])
      if (is_trap[v]) { crossings++; where = v; }
    if (crossings == 0)
      out.uncovered.push_back(i);
    else if (crossings == 1)
      out.by_trap_node[where].push_back(i);
    else
      out.multi_crossing.push_back(i);
  }
  return out;
}

// Convenience pipeline: prune -> flow network -> split -> min cut.
inline NodeCut solve_min_node_cut(const InfoFlowGraph& g) {
  FlowNetwork f = build_flow_network(g);
  FlowNetwork split = split_nodes(f, g.cost);
  return min_cut(split);
}

}  // namespace diftgame
