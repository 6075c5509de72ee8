#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diftgame/errors.hpp"
#include "diftgame/graph.hpp"
#include "diftgame/rng.hpp"

namespace diftgame {

// A flow position is an IFG node index or one of the sentinels below.
// Dropped and Trapped are terminal for the flow.
namespace pos {
constexpr int kAtSource = -1;
constexpr int kDropped = -2;
constexpr int kTrapped = -3;
inline bool at_node(int p) { return p >= 0; }
}  // namespace pos

enum class Turn { Adversary, Defender };

// Flow 0 is the malicious one by internal convention; defender-side code must
// only ever look at states through canonical_defender_view below.
struct GameState {
  Turn turn = Turn::Adversary;
  std::vector<int> positions;
  int step = 0;

  bool operator==(const GameState& o) const {
    return turn == o.turn && step == o.step && positions == o.positions;
  }
  bool operator<(const GameState& o) const {
    if (turn != o.turn) return turn < o.turn;
    if (step != o.step) return step < o.step;
    return positions < o.positions;
  }
};

struct NoiseModel {
  double fn = 0.0;  // P(analysis misses the malicious flow)
  double fp = 0.0;  // P(analysis flags a benign flow)
};

inline void validate_noise(const NoiseModel& m) {
  if (!(m.fn >= 0.0 && m.fn < 1.0) || !(m.fp >= 0.0 && m.fp < 1.0))
    fail(ErrorKind::ConfigMismatch, "FN and FP rates must lie in [0,1)");
}

struct PayoffParams {
  double alpha_D = 1000.0;   // defender reward for trapping the malicious flow
  double beta_D = -1000.0;   // defender penalty for a reach or a false positive
  double alpha_A = -1000.0;  // adversary penalty for getting trapped
  double beta_A = 1000.0;    // adversary reward for a reach or a false positive
};

inline void validate_params(const PayoffParams& p) {
  if (!(p.alpha_D > 0.0)) fail(ErrorKind::ConfigMismatch, "alpha_D must be > 0");
  if (!(p.beta_D < 0.0)) fail(ErrorKind::ConfigMismatch, "beta_D must be < 0");
  if (!(p.alpha_A < 0.0)) fail(ErrorKind::ConfigMismatch, "alpha_A must be < 0");
  if (!(p.beta_A > 0.0)) fail(ErrorKind::ConfigMismatch, "beta_A must be > 0");
}

enum class AbsorbReason { Reached, TrappedFlow, AllDropped, Horizon };

struct DefenderAction {
  int analyze_slot = -1;  // flow index; -1 is NoOp
  bool is_noop() const { return analyze_slot < 0; }
};

struct AdversaryAction {
  int move_to = pos::kDropped;  // node index, or kDropped for quitting
  bool is_drop() const { return move_to == pos::kDropped; }
};

inline GameState initial_state(int flows) {
  if (flows < 1) fail(ErrorKind::ConfigMismatch, "W must be at least 1");
  GameState s;
  s.turn = Turn::Adversary;
  s.positions.assign(flows, pos::kAtSource);
  s.step = 0;
  return s;
}

// Absorbing when (i) the malicious flow sits on a destination, (ii) some flow
// is trapped, (iii) every flow dropped, or the 2N step horizon is hit.
inline std::optional<AbsorbReason> absorbing_reason(const InfoFlowGraph& g,
                                                    const GameState& s) {
  if (pos::at_node(s.positions[0]) && g.is_dest(s.positions[0]))
    return AbsorbReason::Reached;
  for (int p : s.positions)
    if (p == pos::kTrapped) return AbsorbReason::TrappedFlow;
  bool all_dropped = true;
  for (int p : s.positions) all_dropped = all_dropped && p == pos::kDropped;
  if (all_dropped) return AbsorbReason::AllDropped;
  if (s.step >= 2 * g.size()) return AbsorbReason::Horizon;
  return std::nullopt;
}

inline bool is_absorbing(const InfoFlowGraph& g, const GameState& s) {
  return absorbing_reason(g, s).has_value();
}

// {NoOp} plus Analyze(k) for each live flow at a non-entry node.
inline std::vector<DefenderAction> defender_actions(const InfoFlowGraph& g,
                                                    const GameState& s) {
  if (s.turn != Turn::Defender)
    fail(ErrorKind::IllegalAction, "defender_actions on an adversary state");
  if (is_absorbing(g, s))
    fail(ErrorKind::IllegalAction, "defender_actions on an absorbing state");
  std::vector<DefenderAction> out{DefenderAction{-1}};
  for (int k = 0; k < static_cast<int>(s.positions.size()); ++k) {
    int p = s.positions[k];
    if (pos::at_node(p) && g.analyzable(p)) out.push_back(DefenderAction{k});
  }
  return out;
}

// {Drop} plus a move along each out-edge of the malicious flow's node (or to
// each entry point from the source).
inline std::vector<AdversaryAction> adversary_actions(const InfoFlowGraph& g,
                                                      const GameState& s) {
  if (s.turn != Turn::Adversary)
    fail(ErrorKind::IllegalAction, "adversary_actions on a defender state");
  if (is_absorbing(g, s))
    fail(ErrorKind::IllegalAction, "adversary_actions on an absorbing state");
  std::vector<AdversaryAction> out{AdversaryAction{pos::kDropped}};
  int p = s.positions[0];
  if (p == pos::kAtSource) {
    for (int e : g.entries) out.push_back(AdversaryAction{e});
  } else if (pos::at_node(p)) {
    for (int u : g.adj[p]) out.push_back(AdversaryAction{u});
  }
  // A dropped malicious flow leaves only Drop (a formal no-op) available.
  return out;
}

inline bool defender_action_legal(const InfoFlowGraph& g, const GameState& s,
                                  DefenderAction a) {
  if (a.is_noop()) return true;
  if (a.analyze_slot >= static_cast<int>(s.positions.size())) return false;
  int p = s.positions[a.analyze_slot];
  return pos::at_node(p) && g.analyzable(p);
}

// Eq.-style defender transition: NoOp keeps positions; analyzing the
// malicious flow traps it w.p. 1-FN; analyzing a benign one traps it w.p. FP.
inline GameState step_defender(const InfoFlowGraph& g, const GameState& s,
                               DefenderAction a, const NoiseModel& noise,
                               Stream& rng) {
  if (s.turn != Turn::Defender) fail(ErrorKind::IllegalAction, "not the defender's turn");
  if (!defender_action_legal(g, s, a))
    fail(ErrorKind::IllegalAction, "illegal defender action");
  GameState next = s;
  next.turn = Turn::Adversary;
  next.step = s.step + 1;
  if (!a.is_noop()) {
    double trap_p = a.analyze_slot == 0 ? 1.0 - noise.fn : noise.fp;
    if (rng.uniform() < trap_p) next.positions[a.analyze_slot] = pos::kTrapped;
  }
  return next;
}

namespace detail {

constexpr int kCollisionRetries = 32;

// Exact law of one benign move from `node` given the set of nodes already
// occupied this turn: sample pi_B, resample on collision up to 32 times, then
// force drop. Closed form: free target u gets pi(u) * (1-m^32)/(1-m) with m
// the occupied mass; drop absorbs the rest.
inline std::vector<std::pair<int, double>> benign_move_dist(
    const InfoFlowGraph& g, int node, const std::vector<char>& occupied) {
  const BenignRow& row = g.benign[node];
  double occupied_mass = 0.0;
  for (auto [u, p] : row.moves)
    if (occupied[u]) occupied_mass += p;
  std::vector<std::pair<int, double>> out;
  double drop = row.drop;
  if (occupied_mass <= 0.0) {
    for (auto [u, p] : row.moves)
      if (p > 0.0) out.push_back({u, p});
  } else {
    double m32 = std::pow(occupied_mass, kCollisionRetries);
    double geometric = occupied_mass >= 1.0
                           ? 0.0
                           : (1.0 - m32) / (1.0 - occupied_mass);
    for (auto [u, p] : row.moves)
      if (!occupied[u] && p > 0.0) out.push_back({u, p * geometric});
    drop = row.drop * geometric + m32;
  }
  if (drop > 0.0) out.push_back({pos::kDropped, drop});
  return out;
}

// Benign flows enter the system at t=1 uniformly over the non-entry nodes
// that are still free (distinct-arrival convention).
inline std::vector<std::pair<int, double>> benign_entry_dist(
    const InfoFlowGraph& g, const std::vector<char>& occupied) {
  std::vector<int> pool;
  for (int v = 0; v < g.size(); ++v)
    if (!g.is_entry(v) && !occupied[v]) pool.push_back(v);
  if (pool.empty())
    fail(ErrorKind::ConfigMismatch,
         "not enough non-entry nodes to place all benign flows");
  std::vector<std::pair<int, double>> out;
  double p = 1.0 / static_cast<double>(pool.size());
  for (int v : pool) out.push_back({v, p});
  return out;
}

inline std::vector<std::pair<int, double>> benign_step_dist(
    const InfoFlowGraph& g, int position, const std::vector<char>& occupied) {
  if (position == pos::kAtSource) return benign_entry_dist(g, occupied);
  if (!pos::at_node(position)) return {{position, 1.0}};  // dropped stays dropped
  return benign_move_dist(g, position, occupied);
}

inline int sample_from(const std::vector<std::pair<int, double>>& dist, Stream& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (const auto& [value, p] : dist) {
    acc += p;
    if (u < acc) return value;
  }
  return dist.back().first;
}

}  // namespace detail

inline bool adversary_action_legal(const InfoFlowGraph& g, const GameState& s,
                                   AdversaryAction a) {
  if (a.is_drop()) return true;
  int p = s.positions[0];
  if (p == pos::kAtSource) return g.is_entry(a.move_to);
  if (!pos::at_node(p)) return false;
  return std::binary_search(g.adj[p].begin(), g.adj[p].end(), a.move_to);
}

// Adversary transition: the malicious flow moves (or drops) as commanded,
// then every live benign flow makes its pi_B move. Flows resolve in index
// order; each sample rejects nodes already taken this turn, which preserves
// the distinct-arrival invariant.
inline GameState step_adversary(const InfoFlowGraph& g, const GameState& s,
                                AdversaryAction a, Stream& rng) {
  if (s.turn != Turn::Adversary) fail(ErrorKind::IllegalAction, "not the adversary's turn");
  if (!adversary_action_legal(g, s, a))
    fail(ErrorKind::IllegalAction, "illegal adversary move");
  GameState next = s;
  next.turn = Turn::Defender;
  next.step = s.step + 1;

  std::vector<char> occupied(g.size(), 0);
  next.positions[0] = s.positions[0] == pos::kDropped ? pos::kDropped : a.move_to;
  if (pos::at_node(next.positions[0])) occupied[next.positions[0]] = 1;

  for (std::size_t k = 1; k < next.positions.size(); ++k) {
    auto dist = detail::benign_step_dist(g, s.positions[k], occupied);
    int landed = detail::sample_from(dist, rng);
    next.positions[k] = landed;
    if (pos::at_node(landed)) occupied[landed] = 1;
  }
  return next;
}

// Full next-state distribution of a defender action; probabilities sum to 1.
inline std::vector<std::pair<GameState, double>> defender_transition_dist(
    const InfoFlowGraph& g, const GameState& s, DefenderAction a,
    const NoiseModel& noise) {
  if (s.turn != Turn::Defender)
    fail(ErrorKind::IllegalAction, "not the defender's turn");
  if (!defender_action_legal(g, s, a))
    fail(ErrorKind::IllegalAction, "illegal defender action");
  GameState stay = s;
  stay.turn = Turn::Adversary;
  stay.step = s.step + 1;
  if (a.is_noop()) return {{stay, 1.0}};
  GameState trapped = stay;
  trapped.positions[a.analyze_slot] = pos::kTrapped;
  double trap_p = a.analyze_slot == 0 ? 1.0 - noise.fn : noise.fp;
  std::vector<std::pair<GameState, double>> out;
  if (trap_p > 0.0) out.push_back({trapped, trap_p});
  if (trap_p < 1.0) out.push_back({stay, 1.0 - trap_p});
  return out;
}

// Full next-state distribution of an adversary action, benign moves included.
inline std::vector<std::pair<GameState, double>> adversary_transition_dist(
    const InfoFlowGraph& g, const GameState& s, AdversaryAction a) {
  if (s.turn != Turn::Adversary)
    fail(ErrorKind::IllegalAction, "not the adversary's turn");
  if (!adversary_action_legal(g, s, a))
    fail(ErrorKind::IllegalAction, "illegal adversary move");
  GameState base = s;
  base.turn = Turn::Defender;
  base.step = s.step + 1;
  base.positions[0] = s.positions[0] == pos::kDropped ? pos::kDropped : a.move_to;

  std::vector<std::pair<GameState, double>> frontier{{base, 1.0}};
  for (std::size_t k = 1; k < s.positions.size(); ++k) {
    std::vector<std::pair<GameState, double>> grown;
    for (const auto& [state, prob] : frontier) {
      std::vector<char> occupied(g.size(), 0);
      for (std::size_t j = 0; j < k; ++j)
        if (pos::at_node(state.positions[j])) occupied[state.positions[j]] = 1;
      for (const auto& [landed, p] : detail::benign_step_dist(g, s.positions[k], occupied)) {
        GameState ns = state;
        ns.positions[k] = landed;
        grown.push_back({ns, prob * p});
      }
    }
    frontier = std::move(grown);
  }
  // Merge duplicate states so tests can compare supports symbolically.
  std::sort(frontier.begin(), frontier.end(),
            [](const auto& a_, const auto& b_) { return a_.first < b_.first; });
  std::vector<std::pair<GameState, double>> merged;
  for (auto& entry : frontier) {
    if (!merged.empty() && merged.back().first == entry.first)
      merged.back().second += entry.second;
    else
      merged.push_back(entry);
  }
  return merged;
}

struct TerminalPayoff {
  double defender = 0.0;
  double adversary = 0.0;
};

// Malicious trapped -> (alpha_D, alpha_A); reach or false positive ->
// (beta_D, beta_A); all-dropped and horizon pay nothing.
inline TerminalPayoff terminal_payoffs(const InfoFlowGraph& g, const GameState& s,
                                       const PayoffParams& params) {
  auto reason = absorbing_reason(g, s);
  if (!reason) fail(ErrorKind::IllegalAction, "terminal_payoffs on a live state");
  switch (*reason) {
    case AbsorbReason::TrappedFlow:
      if (s.positions[0] == pos::kTrapped)
        return {params.alpha_D, params.alpha_A};
      return {params.beta_D, params.beta_A};
    case AbsorbReason::Reached:
      return {params.beta_D, params.beta_A};
    case AbsorbReason::AllDropped:
    case AbsorbReason::Horizon:
      return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

// Stage payoff of the defender: the analysis cost, negated. The adversary's
// stage payoff is identically zero and has no accessor on purpose.
inline double stage_payoff_defender(const InfoFlowGraph& g, const GameState& s,
                                    DefenderAction a) {
  if (a.is_noop()) return 0.0;
  int node = s.positions[a.analyze_slot];
  return -g.cost[node];
}

// Defender-facing view: analyzable flows in canonical node order, so nothing
// downstream can key on the hidden malicious index.
struct DefenderView {
  struct Slot { int flow; int node; };
  std::vector<Slot> analyzable;  // sorted by node index
};

inline DefenderView canonical_defender_view(const InfoFlowGraph& g,
                                            const GameState& s) {
  DefenderView view;
  for (int k = 0; k < static_cast<int>(s.positions.size()); ++k) {
    int p = s.positions[k];
    if (pos::at_node(p) && g.analyzable(p)) view.analyzable.push_back({k, p});
  }
  std::sort(view.analyzable.begin(), view.analyzable.end(),
            [](const auto& a, const auto& b) { return a.node < b.node; });
  return view;
}

}  // namespace diftgame
