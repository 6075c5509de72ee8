#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "diftgame/errors.hpp"
#include "diftgame/flownet.hpp"
#include "diftgame/game.hpp"
#include "diftgame/graph.hpp"

namespace diftgame {

// Stationary per-node trap probabilities p_D(v). NoOp takes the residual mass
// at each state; validity requires the present analyzable mass to stay <= 1
// at every reachable state.
struct DefenderStrategy {
  double theta = 0.0;                  // common trap probability, when uniform
  std::map<int, double> trap_prob;     // node index -> probability

  double at(int node) const {
    auto it = trap_prob.find(node);
    return it == trap_prob.end() ? 0.0 : it->second;
  }
};

// Distribution over attack paths.
struct AdversaryStrategy {
  std::vector<AttackPath> paths;
  std::vector<double> prob;
};

// Equilibrium defender: probability theta = 1/min{W, r} on every min-cut
// node, zero elsewhere.
inline DefenderStrategy nash_defender(const NodeCut& cut, int flows) {
  if (cut.trap_nodes.empty()) fail(ErrorKind::Validation, "empty cut");
  if (flows < 1) fail(ErrorKind::ConfigMismatch, "W must be at least 1");
  DefenderStrategy s;
  int r = static_cast<int>(cut.trap_nodes.size());
  s.theta = 1.0 / static_cast<double>(std::min(flows, r));
  for (int v : cut.trap_nodes) s.trap_prob[v] = s.theta;
  return s;
}

// Equilibrium adversary: uniform over the attack paths that cross exactly one
// trap node (any distribution over them is optimal; uniform is the repo
// convention).
inline AdversaryStrategy nash_adversary(const std::vector<AttackPath>& paths,
                                        const NodeCut& cut) {
  auto classes = classify_paths_by_cut(paths, cut.trap_nodes);
  std::vector<int> qualifying;
  for (const auto& [node, list] : classes.by_trap_node)
    qualifying.insert(qualifying.end(), list.begin(), list.end());
  std::sort(qualifying.begin(), qualifying.end());
  if (qualifying.empty())
    fail(ErrorKind::NoQualifyingPath,
         "no attack path crosses exactly one trap node");
  AdversaryStrategy s;
  double p = 1.0 / static_cast<double>(qualifying.size());
  for (int i : qualifying) {
    s.paths.push_back(paths[i]);
    s.prob.push_back(p);
  }
  return s;
}

// p(omega) = [1 - prod_{v in path} (1 - p_D(v))] * (1 - FN). The caller passes
// the malicious flow's analyzable visit list.
inline double detection_prob(const std::vector<int>& path_nodes_malicious,
                             const DefenderStrategy& strat, double fn) {
  double evade = 1.0;
  for (int v : path_nodes_malicious) evade *= 1.0 - strat.at(v);
  double p = (1.0 - evade) * (1.0 - fn);
  return std::clamp(p, 0.0, 1.0);
}

// f(omega) = [1 - prod_{v in path} (1 - p_D(v))] * FP over a benign visit list.
inline double false_positive_prob(const std::vector<int>& path_nodes_benign,
                                  const DefenderStrategy& strat, double fp) {
  double evade = 1.0;
  for (int v : path_nodes_benign) evade *= 1.0 - strat.at(v);
  double p = (1.0 - evade) * fp;
  return std::clamp(p, 0.0, 1.0);
}

// The nodes of an attack path where analysis of the malicious flow can
// actually fire: non-entry nodes strictly before the first destination (the
// game absorbs the instant the flow arrives there).
inline std::vector<int> detectable_nodes(const InfoFlowGraph& g,
                                         const AttackPath& path) {
  std::vector<int> out;
  for (int v : path) {
    if (g.is_dest(v)) break;
    if (g.analyzable(v)) out.push_back(v);
  }
  return out;
}

// One enumerated benign trajectory: its probability under pi_B and the
// analyzable nodes it visits, in visit order.
struct BenignTrajectory {
  double prob = 0.0;
  std::vector<int> visited;
};

// Exhaustive benign walk enumeration from the uniform non-entry start.
// Branches whose mass falls below `cutoff` are discarded and their total mass
// reported, per the documented approximation contract.
inline std::vector<BenignTrajectory> enumerate_benign_trajectories(
    const InfoFlowGraph& g, double cutoff, double* discarded_mass) {
  std::vector<BenignTrajectory> out;
  double discarded = 0.0;
  std::vector<int> starts = g.non_entry_nodes();
  if (starts.empty()) {
    if (discarded_mass) *discarded_mass = 0.0;
    return out;
  }
  double p0 = 1.0 / static_cast<double>(starts.size());

  struct Item { int node; double prob; std::vector<int> visited; };
  std::vector<Item> stack;
  for (auto it = starts.rbegin(); it != starts.rend(); ++it) {
    std::vector<int> visited;
    if (g.analyzable(*it)) visited.push_back(*it);
    stack.push_back({*it, p0, std::move(visited)});
  }
  while (!stack.empty()) {
    Item item = std::move(stack.back());
    stack.pop_back();
    if (item.prob < cutoff) {
      discarded += item.prob;
      continue;
    }
    const BenignRow& row = g.benign[item.node];
    if (row.drop > 0.0)
      out.push_back({item.prob * row.drop, item.visited});
    for (auto [u, p] : row.moves) {
      if (p <= 0.0) continue;
      Item next{u, item.prob * p, item.visited};
      if (g.analyzable(u)) next.visited.push_back(u);
      stack.push_back(std::move(next));
    }
  }
  if (discarded_mass) *discarded_mass = discarded;
  return out;
}

struct ClosedFormPayoffs {
  double u_D = 0.0;
  double u_A = 0.0;
  double p_detect = 0.0;     // p_T
  double p_reach = 0.0;      // p_R
  double p_false_pos = 0.0;  // p_FP
  double expected_cost = 0.0;
  bool approx_benign = false;      // W > 1: benign side ignores collisions
  double discarded_benign_mass = 0.0;
};

// Analytic expected payoffs:
//   U_D = p_T alpha_D + (p_R + p_FP) beta_D - expected analysis cost
//   U_A = p_T alpha_A + (p_R + p_FP) beta_A
// p_T/p_R come from p(omega) over the adversary mixture; p_FP and the benign
// cost term come from exact pi_B trajectory enumeration (mass cutoff 1e-6).
// The malicious cost term weights each analysis by the probability the game
// is still running, which makes the W=1 value exactly the simulator's mean.
inline ClosedFormPayoffs expected_payoffs_closed_form(
    const InfoFlowGraph& g, const DefenderStrategy& defender,
    const AdversaryStrategy& adversary, const NoiseModel& noise,
    const PayoffParams& params, int flows, double benign_cutoff = 1e-6) {
  ClosedFormPayoffs out;
  double cost_malicious = 0.0;
  for (std::size_t i = 0; i < adversary.paths.size(); ++i) {
    double pi = adversary.prob[i];
    if (pi <= 0.0) continue;
    auto nodes = detectable_nodes(g, adversary.paths[i]);
    out.p_detect += pi * detection_prob(nodes, defender, noise.fn);
    double alive = 1.0, cost = 0.0;
    for (int v : nodes) {
      double q = defender.at(v);
      cost += alive * q * g.cost[v];
      alive *= 1.0 - q * (1.0 - noise.fn);
    }
    cost_malicious += pi * cost;
  }
  out.p_reach = 1.0 - out.p_detect;

  double cost_benign = 0.0;
  if (flows > 1) {
    out.approx_benign = true;
    auto trajectories = enumerate_benign_trajectories(g, benign_cutoff,
                                                      &out.discarded_benign_mass);
    double fp_one = 0.0, cost_one = 0.0;
    for (const auto& t : trajectories) {
      fp_one += t.prob * false_positive_prob(t.visited, defender, noise.fp);
      double alive = 1.0, cost = 0.0;
      for (int v : t.visited) {
        double q = defender.at(v);
        cost += alive * q * g.cost[v];
        alive *= 1.0 - q * noise.fp;
      }
      cost_one += t.prob * cost;
    }
    out.p_false_pos = 1.0 - std::pow(1.0 - fp_one, flows - 1);
    cost_benign = static_cast<double>(flows - 1) * cost_one;
  }

  out.expected_cost = cost_malicious + cost_benign;
  out.u_D = out.p_detect * params.alpha_D +
            (out.p_reach + out.p_false_pos) * params.beta_D - out.expected_cost;
  out.u_A = out.p_detect * params.alpha_A +
            (out.p_reach + out.p_false_pos) * params.beta_A;
  return out;
}

// ---- JSON forms -----------------------------------------------------------

inline nlohmann::ordered_json defender_strategy_to_json(
    const InfoFlowGraph& g, const DefenderStrategy& s) {
  nlohmann::ordered_json j;
  j["theta"] = s.theta;
  j["trap_prob"] = nlohmann::ordered_json::object();
  for (const auto& [v, p] : s.trap_prob) j["trap_prob"][g.ids[v]] = p;
  return j;
}

inline nlohmann::ordered_json adversary_strategy_to_json(
    const InfoFlowGraph& g, const AdversaryStrategy& s) {
  nlohmann::ordered_json j;
  j["path_dist"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.paths.size(); ++i) {
    nlohmann::ordered_json entry;
    entry["path"] = nlohmann::ordered_json::array();
    for (int v : s.paths[i]) entry["path"].push_back(g.ids[v]);
    entry["p"] = s.prob[i];
    j["path_dist"].push_back(entry);
  }
  return j;
}

inline DefenderStrategy defender_strategy_from_json(
    const InfoFlowGraph& g, const nlohmann::ordered_json& j) {
  DefenderStrategy s;
  if (j.contains("theta")) s.theta = j["theta"].get<double>();
  if (!j.contains("trap_prob") || !j["trap_prob"].is_object())
    fail(ErrorKind::Parse, "strategy JSON needs a trap_prob object");
  for (const auto& [id, p] : j["trap_prob"].items()) {
    int v = g.index_of(id);
    if (v < 0) fail(ErrorKind::Validation, "strategy names unknown node " + id);
    double q = p.get<double>();
    if (q < 0.0 || q > 1.0)
      fail(ErrorKind::Validation, "trap probability out of [0,1] at " + id);
    s.trap_prob[v] = q;
  }
  return s;
}

inline nlohmann::ordered_json cut_to_json(const InfoFlowGraph& g,
                                          const NodeCut& cut) {
  nlohmann::ordered_json j;
  j["trap_nodes"] = nlohmann::ordered_json::array();
  for (int v : cut.trap_nodes) j["trap_nodes"].push_back(g.ids[v]);
  j["capacity"] = cut.capacity;
  j["flow_value"] = cut.flow_value;
  return j;
}

}  // namespace diftgame
