#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "diftgame/errors.hpp"
#include "diftgame/flownet.hpp"
#include "diftgame/game.hpp"
#include "diftgame/graph.hpp"
#include "diftgame/strategy.hpp"

namespace diftgame {

// Exhaustive minimum node cut: tries every node subset and keeps the cheapest
// one whose removal separates entries from destinations. Independent of the
// flow solver on purpose; usable up to ~20 nodes.
struct BruteCutResult {
  std::vector<int> nodes;
  double capacity = 0.0;
};

inline BruteCutResult brute_force_min_node_cut(const InfoFlowGraph& g) {
  const int n = g.size();
  if (n > 20) fail(ErrorKind::InstanceTooLarge, "brute force limited to 20 nodes");
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_mask = 0;
  bool found = false;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double cap = 0.0;
    for (int v = 0; v < n; ++v)
      if (mask & (1u << v)) cap += g.cost[v];
    if (cap >= best) continue;
    // reachability with the masked nodes removed
    std::vector<int> stack;
    std::vector<char> seen(n, 0);
    for (int e : g.entries)
      if (!(mask & (1u << e))) { seen[e] = 1; stack.push_back(e); }
    bool reaches = false;
    while (!stack.empty() && !reaches) {
      int v = stack.back();
      stack.pop_back();
      if (g.is_dest(v)) { reaches = true; break; }
      for (int u : g.adj[v])
        if (!(mask & (1u << u)) && !seen[u]) { seen[u] = 1; stack.push_back(u); }
    }
    if (!reaches) {
      best = cap;
      best_mask = mask;
      found = true;
    }
  }
  if (!found) fail(ErrorKind::NoAttackPath, "graph already disconnected");
  BruteCutResult out;
  out.capacity = best;
  for (int v = 0; v < n; ++v)
    if (best_mask & (1u << v)) out.nodes.push_back(v);
  return out;
}

enum class Side { Defender, Adversary };

struct OracleLimits {
  int max_nodes = 10;
  int max_flows = 2;
  std::size_t max_paths = 50;
  double grid = 0.1;
};

struct BestResponseResult {
  DefenderStrategy defender;  // filled for Side::Defender
  AttackPath path;            // filled for Side::Adversary
  double payoff = 0.0;        // the responding player's payoff at the optimum
};

namespace detail {

// Precomputed closed-form evaluation tables over the analyzable node set.
struct OracleTables {
  std::vector<int> analyzable;             // node indices
  std::vector<double> cost;                // per analyzable index
  std::vector<std::vector<int>> path_dets; // per path: analyzable indices
  std::vector<double> path_prob;
  std::vector<BenignTrajectory> trajectories;  // visited re-indexed
  std::vector<double> benign_visit_weight;     // per analyzable index
  double discarded_mass = 0.0;
  int flows = 1;
  NoiseModel noise;
  PayoffParams params;
};

inline OracleTables build_tables(const InfoFlowGraph& g,
                                 const std::vector<AttackPath>& paths,
                                 const std::vector<double>& prob,
                                 const NoiseModel& noise,
                                 const PayoffParams& params, int flows) {
  OracleTables t;
  t.noise = noise;
  t.params = params;
  t.flows = flows;
  std::vector<int> index_of(g.size(), -1);
  for (int v = 0; v < g.size(); ++v)
    if (g.analyzable(v)) {
      index_of[v] = static_cast<int>(t.analyzable.size());
      t.analyzable.push_back(v);
      t.cost.push_back(g.cost[v]);
    }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    std::vector<int> det;
    for (int v : detectable_nodes(g, paths[i])) det.push_back(index_of[v]);
    t.path_dets.push_back(std::move(det));
    t.path_prob.push_back(prob[i]);
  }
  if (flows > 1) {
    t.trajectories = enumerate_benign_trajectories(g, 1e-6, &t.discarded_mass);
    t.benign_visit_weight.assign(t.analyzable.size(), 0.0);
    for (auto& traj : t.trajectories) {
      for (int& v : traj.visited) {
        v = index_of[v];
        t.benign_visit_weight[v] += traj.prob;
      }
    }
  }
  return t;
}

// Same arithmetic as expected_payoffs_closed_form, over dense q[].
inline double eval_defender_payoff(const OracleTables& t,
                                   const std::vector<double>& q) {
  double p_detect = 0.0, cost_mal = 0.0;
  for (std::size_t i = 0; i < t.path_dets.size(); ++i) {
    double pi = t.path_prob[i];
    if (pi <= 0.0) continue;
    double evade = 1.0, alive = 1.0, cost = 0.0;
    for (int idx : t.path_dets[i]) {
      double qq = q[idx];
      cost += alive * qq * t.cost[idx];
      alive *= 1.0 - qq * (1.0 - t.noise.fn);
      evade *= 1.0 - qq;
    }
    p_detect += pi * (1.0 - evade) * (1.0 - t.noise.fn);
    cost_mal += pi * cost;
  }
  double p_fp = 0.0, cost_ben = 0.0;
  if (t.flows > 1) {
    if (t.noise.fp == 0.0) {
      for (std::size_t i = 0; i < t.analyzable.size(); ++i)
        cost_ben += q[i] * t.cost[i] * t.benign_visit_weight[i];
      cost_ben *= static_cast<double>(t.flows - 1);
    } else {
      double fp_one = 0.0, cost_one = 0.0;
      for (const auto& traj : t.trajectories) {
        double evade = 1.0, alive = 1.0, cost = 0.0;
        for (int idx : traj.visited) {
          double qq = q[idx];
          cost += alive * qq * t.cost[idx];
          alive *= 1.0 - qq * t.noise.fp;
          evade *= 1.0 - qq;
        }
        fp_one += traj.prob * (1.0 - evade) * t.noise.fp;
        cost_one += traj.prob * cost;
      }
      p_fp = 1.0 - std::pow(1.0 - fp_one, t.flows - 1);
      cost_ben = static_cast<double>(t.flows - 1) * cost_one;
    }
  }
  double p_reach = 1.0 - p_detect;
  return p_detect * t.params.alpha_D + (p_reach + p_fp) * t.params.beta_D -
         (cost_mal + cost_ben);
}

}  // namespace detail

// Exhaustive best response against a fixed opponent strategy, evaluated in
// closed form (no sampling).
//   Defender side: grid search over per-node trap probabilities {0,0.1,...,1}
//     subject to per-state normalization (for W>=2 any two analyzable nodes
//     can co-occur on a pruned graph, so every pair must fit in unit mass).
//   Adversary side: every pure attack path (pure responses suffice).
inline BestResponseResult best_response_oracle(
    const InfoFlowGraph& g, const std::vector<AttackPath>& all_paths,
    const DefenderStrategy& fixed_defender, const AdversaryStrategy& fixed_adversary,
    Side side, const NoiseModel& noise, const PayoffParams& params, int flows,
    const OracleLimits& limits = {}) {
  if (g.size() > limits.max_nodes)
    fail(ErrorKind::InstanceTooLarge,
         "instance too large for exhaustive best response (nodes > " +
             std::to_string(limits.max_nodes) + ")");
  if (flows > limits.max_flows)
    fail(ErrorKind::InstanceTooLarge,
         "instance too large for exhaustive best response (flows > " +
             std::to_string(limits.max_flows) + ")");
  if (all_paths.size() > limits.max_paths)
    fail(ErrorKind::InstanceTooLarge,
         "instance too large for exhaustive best response (paths > " +
             std::to_string(limits.max_paths) + ")");

  BestResponseResult result;
  if (side == Side::Adversary) {
    // p_FP does not depend on the adversary; compute it once via a throwaway
    // point mass, then rank pure paths by p(omega).
    AdversaryStrategy probe;
    probe.paths = {all_paths.front()};
    probe.prob = {1.0};
    ClosedFormPayoffs base = expected_payoffs_closed_form(
        g, fixed_defender, probe, noise, params, flows);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& path : all_paths) {
      double p = detection_prob(detectable_nodes(g, path), fixed_defender, noise.fn);
      double u = p * params.alpha_A + (1.0 - p + base.p_false_pos) * params.beta_A;
      if (u > best + 1e-15) {
        best = u;
        result.path = path;
      }
    }
    result.payoff = best;
    return result;
  }

  auto tables = detail::build_tables(g, fixed_adversary.paths,
                                     fixed_adversary.prob, noise, params, flows);
  const std::size_t k = tables.analyzable.size();
  int levels = static_cast<int>(std::lround(1.0 / limits.grid));
  std::vector<double> q(k, 0.0), best_q(k, 0.0);
  double best = -std::numeric_limits<double>::infinity();
  // DFS over grid assignments; for W>=2 prune on pairwise feasibility
  // (largest two values must fit in unit mass).
  bool pair_constrained = flows >= 2;
  std::function<void(std::size_t, double)> rec = [&](std::size_t d, double max_so_far) {
    if (d == k) {
      double u = detail::eval_defender_payoff(tables, q);
      if (u > best + 1e-15) {
        best = u;
        best_q = q;
      }
      return;
    }
    for (int l = 0; l <= levels; ++l) {
      double v = static_cast<double>(l) * limits.grid;
      if (v > 1.0 + 1e-12) break;
      if (pair_constrained && v + max_so_far > 1.0 + 1e-9) break;
      q[d] = v;
      rec(d + 1, std::max(max_so_far, v));
    }
    q[d] = 0.0;
  };
  if (k == 0) {
    best = detail::eval_defender_payoff(tables, q);
  } else {
    rec(0, 0.0);
  }
  result.payoff = best;
  result.defender.theta = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (best_q[i] > 0.0) result.defender.trap_prob[tables.analyzable[i]] = best_q[i];
  return result;
}

}  // namespace diftgame
