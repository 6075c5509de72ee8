#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "diftgame/errors.hpp"

namespace diftgame {

enum class NodeKind { Process, File, IpcObject, NetworkEndpoint, Unknown };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Process: return "Process";
    case NodeKind::File: return "File";
    case NodeKind::IpcObject: return "IpcObject";
    case NodeKind::NetworkEndpoint: return "NetworkEndpoint";
    case NodeKind::Unknown: return "Unknown";
  }
  return "Unknown";
}

inline std::optional<NodeKind> node_kind_from_string(const std::string& s) {
  if (s == "Process") return NodeKind::Process;
  if (s == "File") return NodeKind::File;
  if (s == "IpcObject") return NodeKind::IpcObject;
  if (s == "NetworkEndpoint") return NodeKind::NetworkEndpoint;
  if (s == "Unknown" || s.empty()) return NodeKind::Unknown;
  return std::nullopt;
}

// Node ids are opaque strings. Ordering is numeric-aware so "2" < "11", which
// keeps path enumeration and canonical node order human-sensible for the
// integer-labelled fixtures.
inline bool node_id_less(const std::string& a, const std::string& b) {
  auto as_uint = [](const std::string& s) -> std::optional<std::uint64_t> {
    if (s.empty() || s.size() > 18) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
  };
  auto na = as_uint(a), nb = as_uint(b);
  if (na && nb) return *na < *nb || (*na == *nb && a < b);
  if (na != nb) return na.has_value();  // numeric ids sort before symbolic
  return a < b;
}

struct NodeMeta {
  std::string name;
  NodeKind kind = NodeKind::Unknown;
};

// Benign transition row for one node: probability of moving to each
// out-neighbor plus an explicit drop mass. Entries sum to 1.
struct BenignRow {
  std::vector<std::pair<int, double>> moves;  // (node index, prob), index-sorted
  double drop = 1.0;
};

// Untyped ingestion form; build_graph validates and freezes it.
struct RawGraph {
  struct Node {
    std::string id;
    std::string name;
    NodeKind kind = NodeKind::Unknown;
    std::optional<double> cost;
  };
  std::vector<Node> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> entries;
  std::vector<std::string> destinations;
  // node id -> (neighbor id or "drop") -> probability; absent rows default to
  // uniform over out-neighbors + drop.
  std::map<std::string, std::map<std::string, double>> benign;
};

// Immutable information flow graph. Nodes are stored in canonical order
// (node_id_less), all adjacency uses dense indices into that order.
class InfoFlowGraph {
 public:
  std::vector<std::string> ids;
  std::vector<NodeMeta> meta;
  std::vector<std::vector<int>> adj;   // out-neighbors, sorted
  std::vector<std::vector<int>> radj;  // in-neighbors, sorted
  std::vector<char> entry_mask, dest_mask;
  std::vector<int> entries, dests;     // sorted index sets
  std::vector<double> cost;            // |C_D(v)| stored positive, > 0
  std::vector<BenignRow> benign;

  int size() const { return static_cast<int>(ids.size()); }

  int index_of(const std::string& id) const {
    auto it = std::lower_bound(ids.begin(), ids.end(), id, node_id_less);
    if (it == ids.end() || *it != id) return -1;
    return static_cast<int>(it - ids.begin());
  }

  bool is_entry(int v) const { return entry_mask[v] != 0; }
  bool is_dest(int v) const { return dest_mask[v] != 0; }

  // Analysis is impossible at entry points; everywhere else it is allowed.
  bool analyzable(int v) const { return !is_entry(v); }

  std::vector<int> non_entry_nodes() const {
    std::vector<int> out;
    for (int v = 0; v < size(); ++v)
      if (!is_entry(v)) out.push_back(v);
    return out;
  }
};

namespace detail {

inline std::vector<char> reach_forward(const InfoFlowGraph& g,
                                       const std::vector<int>& from) {
  std::vector<char> seen(g.size(), 0);
  std::vector<int> stack(from);
  for (int v : from) seen[v] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : g.adj[v])
      if (!seen[u]) { seen[u] = 1; stack.push_back(u); }
  }
  return seen;
}

inline std::vector<char> reach_backward(const InfoFlowGraph& g,
                                        const std::vector<int>& to) {
  std::vector<char> seen(g.size(), 0);
  std::vector<int> stack(to);
  for (int v : to) seen[v] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : g.radj[v])
      if (!seen[u]) { seen[u] = 1; stack.push_back(u); }
  }
  return seen;
}

}  // namespace detail

// Kahn topological order; empty optional when the graph has a cycle.
inline std::optional<std::vector<int>> topological_order(const InfoFlowGraph& g) {
  std::vector<int> indeg(g.size(), 0);
  for (int v = 0; v < g.size(); ++v)
    for (int u : g.adj[v]) indeg[u]++;
  std::vector<int> order, ready;
  for (int v = 0; v < g.size(); ++v)
    if (indeg[v] == 0) ready.push_back(v);
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int u : g.adj[v])
      if (--indeg[u] == 0) ready.push_back(u);
  }
  if (static_cast<int>(order.size()) != g.size()) return std::nullopt;
  return order;
}

inline bool is_acyclic(const InfoFlowGraph& g) {
  return topological_order(g).has_value();
}

// Validates every graph invariant and produces the frozen form.
// Defaulting rules: missing cost -> 1.0; missing benign row -> uniform over
// out-neighbors + drop, each with mass 1/(outdeg+1).
inline InfoFlowGraph build_graph(const RawGraph& raw) {
  if (raw.nodes.empty()) fail(ErrorKind::Validation, "graph has no nodes");

  std::vector<RawGraph::Node> nodes = raw.nodes;
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return node_id_less(a.id, b.id); });
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i].id == nodes[i - 1].id)
      fail(ErrorKind::Validation, "duplicate node id: " + nodes[i].id);

  InfoFlowGraph g;
  g.ids.reserve(nodes.size());
  for (const auto& n : nodes) {
    g.ids.push_back(n.id);
    g.meta.push_back({n.name, n.kind});
    double c = n.cost.value_or(1.0);
    if (!(c > 0.0))
      fail(ErrorKind::Validation,
           "cost must be strictly positive at node " + n.id);
    g.cost.push_back(c);
  }

  const int n = g.size();
  g.adj.assign(n, {});
  g.radj.assign(n, {});
  std::set<std::pair<int, int>> edge_set;
  for (const auto& [a, b] : raw.edges) {
    int ia = g.index_of(a), ib = g.index_of(b);
    if (ia < 0)
      fail(ErrorKind::Validation, "edge endpoint not a node: " + a);
    if (ib < 0)
      fail(ErrorKind::Validation, "edge endpoint not a node: " + b);
    edge_set.insert({ia, ib});
  }
  for (auto [a, b] : edge_set) {
    g.adj[a].push_back(b);
    g.radj[b].push_back(a);
  }
  for (auto& v : g.adj) std::sort(v.begin(), v.end());
  for (auto& v : g.radj) std::sort(v.begin(), v.end());

  g.entry_mask.assign(n, 0);
  g.dest_mask.assign(n, 0);
  if (raw.entries.empty())
    fail(ErrorKind::Validation, "entries must be nonempty");
  if (raw.destinations.empty())
    fail(ErrorKind::Validation, "destinations must be nonempty");
  for (const auto& id : raw.entries) {
    int v = g.index_of(id);
    if (v < 0) fail(ErrorKind::Validation, "entry is not a node: " + id);
    g.entry_mask[v] = 1;
  }
  for (const auto& id : raw.destinations) {
    int v = g.index_of(id);
    if (v < 0) fail(ErrorKind::Validation, "destination is not a node: " + id);
    if (g.entry_mask[v])
      fail(ErrorKind::Validation,
           "entries and destinations must be disjoint; offender: " + id);
    g.dest_mask[v] = 1;
  }
  for (int v = 0; v < n; ++v) {
    if (g.entry_mask[v]) g.entries.push_back(v);
    if (g.dest_mask[v]) g.dests.push_back(v);
  }

  g.benign.assign(n, {});
  for (const auto& [id, row] : raw.benign) {
    int v = g.index_of(id);
    if (v < 0) fail(ErrorKind::Validation, "benign row for unknown node: " + id);
    BenignRow br;
    br.drop = 0.0;
    double total = 0.0;
    for (const auto& [target, p] : row) {
      if (p < 0.0)
        fail(ErrorKind::Validation,
             "benign probability negative at node " + id);
      total += p;
      if (target == "drop") {
        br.drop += p;
        continue;
      }
      int u = g.index_of(target);
      if (u < 0 || !std::binary_search(g.adj[v].begin(), g.adj[v].end(), u))
        fail(ErrorKind::Validation, "benign support of node " + id +
                                        " outside out-neighbors: " + target);
      br.moves.push_back({u, p});
    }
    if (std::abs(total - 1.0) > 1e-9)
      fail(ErrorKind::Validation,
           "benign distribution of node " + id + " does not sum to 1");
    std::sort(br.moves.begin(), br.moves.end());
    g.benign[v] = std::move(br);
  }
  for (int v = 0; v < n; ++v) {
    if (raw.benign.count(g.ids[v])) continue;
    BenignRow br;
    double mass = 1.0 / static_cast<double>(g.adj[v].size() + 1);
    for (int u : g.adj[v]) br.moves.push_back({u, mass});
    br.drop = mass;
    g.benign[v] = std::move(br);
  }
  return g;
}

inline RawGraph to_raw(const InfoFlowGraph& g) {
  RawGraph raw;
  for (int v = 0; v < g.size(); ++v) {
    raw.nodes.push_back({g.ids[v], g.meta[v].name, g.meta[v].kind, g.cost[v]});
    if (g.entry_mask[v]) raw.entries.push_back(g.ids[v]);
    if (g.dest_mask[v]) raw.destinations.push_back(g.ids[v]);
    for (int u : g.adj[v]) raw.edges.push_back({g.ids[v], g.ids[u]});
    std::map<std::string, double> row;
    for (auto [u, p] : g.benign[v].moves) row[g.ids[u]] = p;
    row["drop"] = g.benign[v].drop;
    raw.benign[g.ids[v]] = std::move(row);
  }
  return raw;
}

// Keeps exactly the nodes/edges that lie on some entry->destination path
// (forward-from-entries AND backward-to-destinations reachability). Benign
// mass pointing at removed neighbors is folded into drop.
inline InfoFlowGraph prune_to_attack_subgraph(const InfoFlowGraph& g) {
  auto fwd = detail::reach_forward(g, g.entries);
  auto bwd = detail::reach_backward(g, g.dests);
  std::vector<char> keep(g.size(), 0);
  bool any = false;
  for (int v = 0; v < g.size(); ++v) {
    keep[v] = fwd[v] && bwd[v];
    any = any || keep[v];
  }
  bool entry_dest_pair = false;
  for (int e : g.entries)
    if (keep[e]) entry_dest_pair = true;
  if (!any || !entry_dest_pair)
    fail(ErrorKind::NoAttackPath, "no entry point reaches any destination");

  RawGraph raw;
  for (int v = 0; v < g.size(); ++v) {
    if (!keep[v]) continue;
    raw.nodes.push_back({g.ids[v], g.meta[v].name, g.meta[v].kind, g.cost[v]});
    if (g.entry_mask[v]) raw.entries.push_back(g.ids[v]);
    if (g.dest_mask[v]) raw.destinations.push_back(g.ids[v]);
    std::map<std::string, double> row;
    double dropped = g.benign[v].drop;
    for (auto [u, p] : g.benign[v].moves) {
      if (keep[u]) {
        raw.edges.push_back({g.ids[v], g.ids[u]});
        row[g.ids[u]] = p;
      } else {
        dropped += p;
      }
    }
    row["drop"] = dropped;
    raw.benign[g.ids[v]] = std::move(row);
  }
  return build_graph(raw);
}

enum class AcyclicMode { Reject, Version };

namespace detail {

// Tarjan SCC, iterative. Returns component id per node; ids are in reverse
// topological order of the condensation (irrelevant for our use).
inline std::vector<int> scc_ids(const InfoFlowGraph& g) {
  const int n = g.size();
  std::vector<int> comp(n, -1), low(n, 0), num(n, -1), stk;
  std::vector<char> on(n, 0);
  int counter = 0, comps = 0;
  struct Frame { int v; std::size_t ei; };
  for (int root = 0; root < n; ++root) {
    if (num[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    num[root] = low[root] = counter++;
    stk.push_back(root);
    on[root] = 1;
    while (!frames.empty()) {
      auto& f = frames.back();
      if (f.ei < g.adj[f.v].size()) {
        int u = g.adj[f.v][f.ei++];
        if (num[u] == -1) {
          num[u] = low[u] = counter++;
          stk.push_back(u);
          on[u] = 1;
          frames.push_back({u, 0});
        } else if (on[u]) {
          low[f.v] = std::min(low[f.v], num[u]);
        }
      } else {
        if (low[f.v] == num[f.v]) {
          for (;;) {
            int w = stk.back();
            stk.pop_back();
            on[w] = 0;
            comp[w] = comps;
            if (w == f.v) break;
          }
          comps++;
        }
        int v = f.v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }
  return comp;
}

inline std::vector<int> find_cycle_witness(const InfoFlowGraph& g) {
  // DFS back-edge walk; returns node indices of one cycle.
  const int n = g.size();
  std::vector<int> state(n, 0), parent(n, -1);
  for (int root = 0; root < n; ++root) {
    if (state[root]) continue;
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, ei] = stack.back();
      if (ei < g.adj[v].size()) {
        int u = g.adj[v][ei++];
        if (state[u] == 0) {
          state[u] = 1;
          parent[u] = v;
          stack.push_back({u, 0});
        } else if (state[u] == 1) {
          std::vector<int> cyc{u};
          for (int w = v; w != u; w = parent[w]) cyc.push_back(w);
          std::reverse(cyc.begin() + 1, cyc.end());
          return cyc;
        }
      } else {
        state[v] = 2;
        stack.pop_back();
      }
    }
  }
  return {};
}

}  // namespace detail

// Reject mode: identity on DAGs, CyclicGraph (with a witness) otherwise.
// Version mode: node versioning. Each node of a k-node strongly connected
// component becomes copies v@1..v@k; intra-component edges keep the version
// when they go "forward" in the component's id order and advance it
// otherwise, so every original simple s->t path keeps a versioned image and
// the result is acyclic. v@1 inherits entry status, every copy inherits
// destination status; benign mass on dropped back-edges moves to drop.
inline InfoFlowGraph ensure_acyclic(const InfoFlowGraph& g, AcyclicMode mode) {
  if (is_acyclic(g)) return g;
  if (mode == AcyclicMode::Reject) {
    auto cyc = detail::find_cycle_witness(g);
    std::string msg = "graph has a cycle:";
    for (int v : cyc) msg += " " + g.ids[v];
    fail(ErrorKind::CyclicGraph, msg);
  }

  auto comp = detail::scc_ids(g);
  const int n = g.size();
  std::vector<int> comp_size(n, 0), rank(n, 0);
  for (int v = 0; v < n; ++v) comp_size[comp[v]]++;
  {
    // rank = position of the node among its component members (id order =
    // index order, since nodes are id-sorted).
    std::vector<int> seen(n, 0);
    for (int v = 0; v < n; ++v) rank[v] = seen[comp[v]]++;
  }
  auto copies = [&](int v) {
    return comp_size[comp[v]] > 1 ? comp_size[comp[v]] : 1;
  };
  auto vid = [&](int v, int k) {
    return copies(v) == 1 ? g.ids[v] : g.ids[v] + "@" + std::to_string(k);
  };

  RawGraph raw;
  for (int v = 0; v < n; ++v) {
    for (int k = 1; k <= copies(v); ++k) {
      raw.nodes.push_back({vid(v, k), g.meta[v].name, g.meta[v].kind, g.cost[v]});
      if (g.entry_mask[v] && k == 1) raw.entries.push_back(vid(v, k));
      if (g.dest_mask[v]) raw.destinations.push_back(vid(v, k));
    }
  }
  for (int v = 0; v < n; ++v) {
    for (int k = 1; k <= copies(v); ++k) {
      std::map<std::string, double> row;
      double dropped = g.benign[v].drop;
      for (auto [u, p] : g.benign[v].moves) {
        std::string target;
        if (comp[u] != comp[v]) {
          target = vid(u, 1);  // enter the next component at version 1
        } else if (u == v) {
          dropped += p;  // self-loops cannot lie on a simple path
          continue;
        } else if (rank[u] > rank[v]) {
          target = vid(u, k);
        } else if (k < copies(v)) {
          target = vid(u, k + 1);  // back edge advances the version
        } else {
          dropped += p;  // back edge out of the last version is dropped
          continue;
        }
        raw.edges.push_back({vid(v, k), target});
        row[target] = p;
      }
      row["drop"] = dropped;
      raw.benign[vid(v, k)] = std::move(row);
    }
  }
  InfoFlowGraph out = build_graph(raw);
  if (!is_acyclic(out))
    fail(ErrorKind::Validation, "node versioning failed to produce a DAG");
  return out;
}

}  // namespace diftgame
