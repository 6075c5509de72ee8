#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "diftgame/errors.hpp"
#include "diftgame/flownet.hpp"
#include "diftgame/game.hpp"
#include "diftgame/graph.hpp"
#include "diftgame/rng.hpp"
#include "diftgame/strategy.hpp"

namespace diftgame {

struct SimConfig {
  long trials = 1000;
  std::uint64_t seed = 0;
  int flows = 1;  // W
  NoiseModel noise;
  PayoffParams params;
  std::string label = "run";
};

struct PayoffEstimate {
  double mean_D = 0.0, mean_A = 0.0;
  double stderr_D = 0.0, stderr_A = 0.0;
  long trials = 0;
  long n_trapped = 0;   // malicious flow trapped
  long n_reached = 0;   // malicious flow reached a destination
  long n_dropped = 0;   // every flow dropped
  long n_fp = 0;        // a benign flow trapped (false positive)
  long n_horizon = 0;   // 2N step horizon hit
};

// Detection bookkeeping per attack path, for equal-detection checks.
struct PerPathStats {
  std::vector<long> episodes;
  std::vector<long> detected;
};

struct TraceRecord {
  long trial = 0;
  int t = 0;
  char turn = 'A';
  std::string action;
  std::vector<std::string> state;
  double payoff_D = 0.0;
  double payoff_A = 0.0;
};

using TraceSink = std::function<void(const TraceRecord&)>;

namespace detail {

inline std::string position_label(const InfoFlowGraph& g, int p) {
  if (p == pos::kAtSource) return "@source";
  if (p == pos::kDropped) return "dropped";
  if (p == pos::kTrapped) return "trapped";
  return g.ids[p];
}

inline std::vector<std::string> state_labels(const InfoFlowGraph& g,
                                             const GameState& s) {
  std::vector<std::string> out;
  for (int p : s.positions) out.push_back(position_label(g, p));
  return out;
}

// Samples the defender's stationary strategy at a state: each analyzable flow
// is picked with its node's trap probability, NoOp takes the rest. A state
// whose present mass exceeds 1 violates the 1/min{W,r} bound; that is a hard
// error, not a clamp.
inline DefenderAction sample_defender_action(const InfoFlowGraph& g,
                                             const GameState& s,
                                             const DefenderStrategy& strat,
                                             Stream& rng) {
  DefenderView view = canonical_defender_view(g, s);
  double total = 0.0;
  for (const auto& slot : view.analyzable) total += strat.at(slot.node);
  if (total > 1.0 + 1e-9)
    fail(ErrorKind::ConfigMismatch,
         "per-state trap mass exceeds 1; strategy violates the theta bound");
  double u = rng.uniform();
  double acc = 0.0;
  for (const auto& slot : view.analyzable) {
    acc += strat.at(slot.node);
    if (u < acc) return DefenderAction{slot.flow};
  }
  return DefenderAction{-1};
}

}  // namespace detail

struct EpisodeOutcome {
  double payoff_D = 0.0;
  double payoff_A = 0.0;
  AbsorbReason reason = AbsorbReason::Horizon;
  bool malicious_trapped = false;
  int steps = 0;
};

// Plays one full episode with the malicious flow walking `path`.
inline EpisodeOutcome run_episode(const InfoFlowGraph& g, const AttackPath& path,
                                  const DefenderStrategy& defender,
                                  const NoiseModel& noise,
                                  const PayoffParams& params, int flows,
                                  Stream& rng, long trial = 0,
                                  const TraceSink* trace = nullptr) {
  GameState s = initial_state(flows);
  int cursor = -1;  // index into path of the malicious flow's node
  EpisodeOutcome out;
  auto emit = [&](char turn, const std::string& action, const GameState& ns,
                  double pd, double pa) {
    if (!trace) return;
    TraceRecord rec;
    rec.trial = trial;
    rec.t = ns.step;
    rec.turn = turn;
    rec.action = action;
    rec.state = detail::state_labels(g, ns);
    rec.payoff_D = pd;
    rec.payoff_A = pa;
    (*trace)(rec);
  };

  for (;;) {
    auto reason = absorbing_reason(g, s);
    if (reason) {
      TerminalPayoff tp = terminal_payoffs(g, s, params);
      out.payoff_D += tp.defender;
      out.payoff_A += tp.adversary;
      out.reason = *reason;
      out.malicious_trapped = s.positions[0] == pos::kTrapped;
      out.steps = s.step;
      emit(s.turn == Turn::Adversary ? 'A' : 'D', "terminal", s, tp.defender,
           tp.adversary);
      return out;
    }
    if (s.turn == Turn::Adversary) {
      ++cursor;
      if (cursor >= static_cast<int>(path.size()))
        fail(ErrorKind::ConfigMismatch,
             "attack path ended before reaching a destination");
      AdversaryAction a{path[cursor]};
      GameState ns = step_adversary(g, s, a, rng);
      emit('A', "move:" + g.ids[a.move_to], ns, 0.0, 0.0);
      s = std::move(ns);
    } else {
      DefenderAction a = detail::sample_defender_action(g, s, defender, rng);
      double stage = stage_payoff_defender(g, s, a);
      out.payoff_D += stage;
      GameState ns = step_defender(g, s, a, noise, rng);
      emit('D', a.is_noop() ? "noop" : "analyze:" + g.ids[s.positions[a.analyze_slot]],
           ns, stage, 0.0);
      s = std::move(ns);
    }
  }
}

namespace detail {

struct KahanSum {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

inline int sample_index(const std::vector<double>& prob, Stream& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    acc += prob[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(prob.size()) - 1;
}

}  // namespace detail

inline void validate_adversary_paths(const InfoFlowGraph& g,
                                     const AdversaryStrategy& adv) {
  if (adv.paths.empty())
    fail(ErrorKind::ConfigMismatch, "adversary strategy has no paths");
  double total = 0.0;
  for (double p : adv.prob) total += p;
  if (std::abs(total - 1.0) > 1e-9)
    fail(ErrorKind::ConfigMismatch, "adversary path distribution must sum to 1");
  for (const auto& path : adv.paths) {
    if (path.empty()) fail(ErrorKind::ConfigMismatch, "empty attack path");
    if (!g.is_entry(path.front()))
      fail(ErrorKind::ConfigMismatch, "attack path must start at an entry point");
    bool has_dest = false;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!std::binary_search(g.adj[path[i]].begin(), g.adj[path[i]].end(),
                              path[i + 1]))
        fail(ErrorKind::ConfigMismatch, "attack path uses a missing edge " +
                                            g.ids[path[i]] + "->" +
                                            g.ids[path[i + 1]]);
    }
    for (int v : path) has_dest = has_dest || g.is_dest(v);
    if (!has_dest)
      fail(ErrorKind::ConfigMismatch, "attack path never reaches a destination");
  }
}

// Monte Carlo estimate of both players' expected payoffs. Trial k draws its
// own RNG stream from (seed, k), so results are reproducible bit-for-bit and
// rows sharing a seed share episode randomness (common random numbers).
inline PayoffEstimate simulate(const InfoFlowGraph& g, const SimConfig& cfg,
                               const DefenderStrategy& defender,
                               const AdversaryStrategy& adversary,
                               PerPathStats* per_path = nullptr,
                               const TraceSink* trace = nullptr) {
  if (cfg.trials < 1) fail(ErrorKind::ConfigMismatch, "trials must be >= 1");
  validate_noise(cfg.noise);
  validate_params(cfg.params);
  validate_adversary_paths(g, adversary);
  if (cfg.flows - 1 > static_cast<int>(g.non_entry_nodes().size()))
    fail(ErrorKind::ConfigMismatch,
         "W-1 benign flows need at least W-1 non-entry nodes");

  if (per_path) {
    per_path->episodes.assign(adversary.paths.size(), 0);
    per_path->detected.assign(adversary.paths.size(), 0);
  }

  detail::KahanSum sum_d, sum_a, sq_d, sq_a;
  PayoffEstimate est;
  est.trials = cfg.trials;
  for (long trial = 0; trial < cfg.trials; ++trial) {
    Stream rng = Stream::for_index(cfg.seed, static_cast<std::uint64_t>(trial));
    int path_index = detail::sample_index(adversary.prob, rng);
    EpisodeOutcome ep = run_episode(g, adversary.paths[path_index], defender,
                                    cfg.noise, cfg.params, cfg.flows, rng,
                                    trial, trace);
    sum_d.add(ep.payoff_D);
    sum_a.add(ep.payoff_A);
    sq_d.add(ep.payoff_D * ep.payoff_D);
    sq_a.add(ep.payoff_A * ep.payoff_A);
    switch (ep.reason) {
      case AbsorbReason::Reached: est.n_reached++; break;
      case AbsorbReason::TrappedFlow:
        (ep.malicious_trapped ? est.n_trapped : est.n_fp)++;
        break;
      case AbsorbReason::AllDropped: est.n_dropped++; break;
      case AbsorbReason::Horizon: est.n_horizon++; break;
    }
    if (per_path) {
      per_path->episodes[path_index]++;
      if (ep.malicious_trapped) per_path->detected[path_index]++;
    }
  }
  double n = static_cast<double>(cfg.trials);
  est.mean_D = sum_d.sum / n;
  est.mean_A = sum_a.sum / n;
  if (cfg.trials > 1) {
    double var_d = std::max(0.0, (sq_d.sum - n * est.mean_D * est.mean_D) / (n - 1.0));
    double var_a = std::max(0.0, (sq_a.sum - n * est.mean_A * est.mean_A) / (n - 1.0));
    est.stderr_D = std::sqrt(var_d / n);
    est.stderr_A = std::sqrt(var_a / n);
  }
  return est;
}

// ---- experiment tables ------------------------------------------------------

struct ResultRow {
  std::string label;
  double theta = 0.0;
  double fp = 0.0, fn = 0.0;
  PayoffEstimate est;
};

inline double theta_bound(const NodeCut& cut, int flows) {
  return 1.0 / static_cast<double>(
                   std::min<std::size_t>(flows, cut.trap_nodes.size()));
}

// Case-study-1 style sweep: the min-cut nodes keep a common trap probability
// theta across a grid of noise cells. theta above 1/min{W,r} is rejected.
inline std::vector<ResultRow> sweep_theta(const InfoFlowGraph& g,
                                          const NodeCut& cut,
                                          const SimConfig& base,
                                          const std::vector<double>& thetas,
                                          const std::vector<NoiseModel>& cells,
                                          const AdversaryStrategy& adversary) {
  double bound = theta_bound(cut, base.flows);
  std::vector<ResultRow> rows;
  for (double theta : thetas) {
    if (theta > bound + 1e-12)
      fail(ErrorKind::InvalidTheta,
           "theta above the equilibrium bound 1/min{W,r}");
    if (theta < 0.0)
      fail(ErrorKind::InvalidTheta, "theta must be nonnegative");
    DefenderStrategy def;
    def.theta = theta;
    for (int v : cut.trap_nodes) def.trap_prob[v] = theta;
    for (const NoiseModel& cell : cells) {
      SimConfig cfg = base;
      cfg.noise = cell;
      char label[128];
      std::snprintf(label, sizeof label, "%s;theta=%g", base.label.c_str(), theta);
      ResultRow row{label, theta, cell.fp, cell.fn,
                    simulate(g, cfg, def, adversary)};
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

enum class PlacementKind { MinCut, Cut, NonCut, Rules };

struct Placement {
  std::string label;
  PlacementKind kind = PlacementKind::Rules;
  std::vector<int> nodes;  // ignored for MinCut
};

// True when removing `nodes` disconnects every surviving entry from every
// surviving destination.
inline bool is_node_cut(const InfoFlowGraph& g, const std::vector<int>& nodes) {
  std::vector<char> removed(g.size(), 0);
  for (int v : nodes) removed[v] = 1;
  std::vector<int> stack;
  std::vector<char> seen(g.size(), 0);
  for (int e : g.entries)
    if (!removed[e]) { seen[e] = 1; stack.push_back(e); }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (g.is_dest(v)) return false;
    for (int u : g.adj[v])
      if (!removed[u] && !seen[u]) { seen[u] = 1; stack.push_back(u); }
  }
  return true;
}

// Case-study-2/3 style comparison. Every placement traps its own node set
// with probability 1/min{W, |set|}; the adversary strategy is fixed across
// placements (equilibrium mixture by default, ground-truth path in the
// heuristic study).
inline std::vector<ResultRow> compare_placements(
    const InfoFlowGraph& g, const NodeCut& cut, const SimConfig& base,
    const std::vector<Placement>& placements,
    const std::vector<NoiseModel>& cells, const AdversaryStrategy& adversary) {
  std::vector<ResultRow> rows;
  for (const Placement& pl : placements) {
    std::vector<int> nodes = pl.kind == PlacementKind::MinCut ? cut.trap_nodes : pl.nodes;
    if (nodes.empty()) fail(ErrorKind::ConfigMismatch, "empty placement " + pl.label);
    if (pl.kind == PlacementKind::Cut && !is_node_cut(g, nodes))
      fail(ErrorKind::ConfigMismatch,
           "placement " + pl.label + " declared a cut but is not one");
    if (pl.kind == PlacementKind::NonCut && is_node_cut(g, nodes))
      fail(ErrorKind::ConfigMismatch,
           "placement " + pl.label + " declared non-cut but cuts the graph");
    double theta =
        1.0 / static_cast<double>(std::min<std::size_t>(base.flows, nodes.size()));
    DefenderStrategy def;
    def.theta = theta;
    for (int v : nodes) def.trap_prob[v] = theta;
    for (const NoiseModel& cell : cells) {
      SimConfig cfg = base;
      cfg.noise = cell;
      ResultRow row{base.label + ";" + pl.label, theta, cell.fp, cell.fn,
                    simulate(g, cfg, def, adversary)};
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Case-study-3 cost sweep: analysis costs are c * q(v) with q taken from the
// input graph, so the min-cut placement is scale-invariant while expected
// costs grow linearly in c.
inline std::vector<ResultRow> cost_sweep(const InfoFlowGraph& g,
                                         const SimConfig& base,
                                         const std::vector<double>& scales,
                                         const std::vector<Placement>& placements,
                                         const AdversaryStrategy& adversary) {
  std::vector<ResultRow> rows;
  for (double c : scales) {
    if (!(c > 0.0)) fail(ErrorKind::ConfigMismatch, "cost scale must be positive");
    InfoFlowGraph scaled = g;
    for (double& x : scaled.cost) x *= c;
    NodeCut cut = solve_min_node_cut(scaled);
    SimConfig cfg = base;
    char suffix[64];
    std::snprintf(suffix, sizeof suffix, ";c=%g", c);
    cfg.label = base.label;
    for (const Placement& pl : placements) {
      std::vector<Placement> single{pl};
      single[0].label = pl.label + suffix;
      auto sub = compare_placements(scaled, cut, cfg, single, {base.noise}, adversary);
      for (auto& row : sub) rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---- CSV --------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string results_csv_header() {
  return "label,theta,FP,FN,trials,mean_D,stderr_D,mean_A,stderr_A,"
         "n_trapped,n_reached,n_dropped,n_fp,n_horizon";
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = results_csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.label;
    out += ',' + format_double(r.theta);
    out += ',' + format_double(r.fp);
    out += ',' + format_double(r.fn);
    out += ',' + std::to_string(r.est.trials);
    out += ',' + format_double(r.est.mean_D);
    out += ',' + format_double(r.est.stderr_D);
    out += ',' + format_double(r.est.mean_A);
    out += ',' + format_double(r.est.stderr_A);
    out += ',' + std::to_string(r.est.n_trapped);
    out += ',' + std::to_string(r.est.n_reached);
    out += ',' + std::to_string(r.est.n_dropped);
    out += ',' + std::to_string(r.est.n_fp);
    out += ',' + std::to_string(r.est.n_horizon);
    out += '\n';
  }
  return out;
}

}  // namespace diftgame
