#include <catch2/catch_amalgamated.hpp>

#include "diftgame/experiment.hpp"
#include "diftgame/io.hpp"
#include "diftgame/simulate.hpp"
#include "support/test_support.hpp"

using namespace diftgame;
using testsupport::load_fixture;

namespace {

InfoFlowGraph zero_cost_chain() {
  auto raw = to_raw(load_fixture("chain.json"));
  for (auto& n : raw.nodes) n.cost = 1e-12;
  return build_graph(raw);
}

AdversaryStrategy chain_adversary(const InfoFlowGraph& g) {
  AdversaryStrategy adv;
  adv.paths = enumerate_attack_paths(g);
  adv.prob = {1.0};
  return adv;
}

}  // namespace

TEST_CASE("certain detection and certain evasion are exact") {
  auto g = zero_cost_chain();
  auto adv = chain_adversary(g);
  PayoffParams params;
  SimConfig cfg;
  cfg.trials = 500;
  cfg.seed = 11;
  cfg.flows = 1;
  cfg.params = params;

  DefenderStrategy all_in;
  all_in.theta = 1.0;
  all_in.trap_prob = {{g.index_of("b"), 1.0}};
  auto est = simulate(g, cfg, all_in, adv);
  REQUIRE(est.mean_D == Catch::Approx(params.alpha_D).margin(1e-6));
  REQUIRE(est.mean_A == Catch::Approx(params.alpha_A).margin(1e-6));
  REQUIRE(est.n_trapped == cfg.trials);

  DefenderStrategy idle;
  auto est0 = simulate(g, cfg, idle, adv);
  REQUIRE(est0.mean_D == Catch::Approx(params.beta_D).margin(1e-9));
  REQUIRE(est0.mean_A == Catch::Approx(params.beta_A).margin(1e-9));
  REQUIRE(est0.n_reached == cfg.trials);
}

TEST_CASE("chain with theta=0.5, FN=0.2: mean within 3 sigma of 0.4a+0.6b") {
  auto g = zero_cost_chain();
  auto adv = chain_adversary(g);
  DefenderStrategy def;
  def.theta = 0.5;
  def.trap_prob = {{g.index_of("b"), 0.5}};
  SimConfig cfg;
  cfg.trials = 10000;
  cfg.seed = 7;
  cfg.flows = 1;
  cfg.noise.fn = 0.2;
  auto est = simulate(g, cfg, def, adv);
  double expected = 0.4 * cfg.params.alpha_D + 0.6 * cfg.params.beta_D;
  REQUIRE(std::abs(est.mean_D - expected) <= 3.0 * est.stderr_D);
}

TEST_CASE("episode payoff equals stage sum plus terminal (trace replay)") {
  auto g = load_fixture("exfil_pruned.json");
  auto cut = solve_min_node_cut(g);
  auto adv = nash_adversary(enumerate_attack_paths(g), cut);
  auto def = nash_defender(cut, 3);
  SimConfig cfg;
  cfg.trials = 50;
  cfg.seed = 99;
  cfg.flows = 3;
  cfg.noise.fn = 0.2;
  cfg.noise.fp = 0.2;

  struct PerTrial { double stage = 0.0, terminal_d = 0.0, terminal_a = 0.0; };
  std::map<long, PerTrial> ledger;
  TraceSink sink = [&](const TraceRecord& rec) {
    if (rec.action == "terminal") {
      ledger[rec.trial].terminal_d += rec.payoff_D;
      ledger[rec.trial].terminal_a += rec.payoff_A;
    } else {
      ledger[rec.trial].stage += rec.payoff_D;
      REQUIRE(rec.payoff_A == 0.0);  // adversary stage payoffs identically 0
    }
  };
  auto est = simulate(g, cfg, def, adv, nullptr, &sink);
  double mean_from_trace_d = 0.0, mean_from_trace_a = 0.0;
  for (auto& [trial, t] : ledger) {
    mean_from_trace_d += t.stage + t.terminal_d;
    mean_from_trace_a += t.terminal_a;
  }
  mean_from_trace_d /= static_cast<double>(cfg.trials);
  mean_from_trace_a /= static_cast<double>(cfg.trials);
  REQUIRE(est.mean_D == Catch::Approx(mean_from_trace_d).margin(1e-9));
  REQUIRE(est.mean_A == Catch::Approx(mean_from_trace_a).margin(1e-9));
}

TEST_CASE("reason counts partition the trials") {
  auto g = load_fixture("exfil_pruned.json");
  auto cut = solve_min_node_cut(g);
  auto adv = nash_adversary(enumerate_attack_paths(g), cut);
  auto def = nash_defender(cut, 3);
  SimConfig cfg;
  cfg.trials = 2000;
  cfg.seed = 4;
  cfg.flows = 3;
  cfg.noise.fp = 0.2;
  cfg.noise.fn = 0.2;
  auto est = simulate(g, cfg, def, adv);
  REQUIRE(est.n_trapped + est.n_reached + est.n_dropped + est.n_fp +
              est.n_horizon ==
          cfg.trials);
  REQUIRE(est.n_fp > 0);  // FP=0.2 must produce some false positives
}

TEST_CASE("sweep_theta rejects theta above the bound") {
  auto g = load_fixture("exfil_pruned.json");
  auto cut = solve_min_node_cut(g);
  auto adv = nash_adversary(enumerate_attack_paths(g), cut);
  SimConfig cfg;
  cfg.trials = 10;
  cfg.flows = 3;
  try {
    sweep_theta(g, cut, cfg, {0.6}, {NoiseModel{}}, adv);
    FAIL("expected InvalidTheta");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::InvalidTheta);
  }
  // 12-cell grid: 3 thetas x 4 noise cells.
  auto rows = sweep_theta(g, cut, cfg, {0.5, 0.4, 0.2},
                          {NoiseModel{0, 0}, NoiseModel{0.2, 0},
                           NoiseModel{0.2, 0.2}, NoiseModel{0, 0.2}},
                          adv);
  REQUIRE(rows.size() == 12);
}

TEST_CASE("placement equal to the min-cut reproduces the nash run bit-for-bit") {
  auto g = load_fixture("exfil_pruned.json");
  auto cut = solve_min_node_cut(g);
  auto adv = nash_adversary(enumerate_attack_paths(g), cut);
  SimConfig cfg;
  cfg.trials = 2000;
  cfg.seed = 31;
  cfg.flows = 3;
  cfg.noise.fn = 0.2;

  auto nash_rows = sweep_theta(g, cut, cfg, {0.5}, {cfg.noise}, adv);
  Placement same;
  same.label = "explicit";
  same.kind = PlacementKind::Cut;
  same.nodes = cut.trap_nodes;
  auto placed = compare_placements(g, cut, cfg, {same}, {cfg.noise}, adv);
  REQUIRE(placed.size() == 1);
  REQUIRE(placed[0].est.mean_D == nash_rows[0].est.mean_D);
  REQUIRE(placed[0].est.mean_A == nash_rows[0].est.mean_A);
  REQUIRE(placed[0].est.n_trapped == nash_rows[0].est.n_trapped);
}

TEST_CASE("compare_placements validates cut / non-cut declarations") {
  auto g = load_fixture("exfil_pruned.json");
  auto cut = solve_min_node_cut(g);
  auto adv = nash_adversary(enumerate_attack_paths(g), cut);
  SimConfig cfg;
  cfg.trials = 10;
  cfg.flows = 3;
  Placement bogus_cut;
  bogus_cut.label = "bogus";
  bogus_cut.kind = PlacementKind::Cut;
  bogus_cut.nodes = {g.index_of("9")};
  REQUIRE_THROWS_AS(
      compare_placements(g, cut, cfg, {bogus_cut}, {NoiseModel{}}, adv), Error);
  Placement bogus_noncut;
  bogus_noncut.label = "bogus2";
  bogus_noncut.kind = PlacementKind::NonCut;
  bogus_noncut.nodes = cut.trap_nodes;
  REQUIRE_THROWS_AS(
      compare_placements(g, cut, cfg, {bogus_noncut}, {NoiseModel{}}, adv),
      Error);
}

TEST_CASE("identical seeds give identical CSV text") {
  auto g = load_fixture("exfil_pruned.json");
  auto cut = solve_min_node_cut(g);
  auto adv = nash_adversary(enumerate_attack_paths(g), cut);
  SimConfig cfg;
  cfg.trials = 1500;
  cfg.seed = 123456;
  cfg.flows = 3;
  auto a = to_csv(sweep_theta(g, cut, cfg, {0.5, 0.2},
                              {NoiseModel{0, 0}, NoiseModel{0.2, 0.2}}, adv));
  auto b = to_csv(sweep_theta(g, cut, cfg, {0.5, 0.2},
                              {NoiseModel{0, 0}, NoiseModel{0.2, 0.2}}, adv));
  REQUIRE(a == b);
  REQUIRE(a.substr(0, a.find('\n')) == results_csv_header());
}

TEST_CASE("config mismatch: W too large for the graph, bad fixed path") {
  auto g = load_fixture("chain.json");
  auto adv = chain_adversary(g);
  DefenderStrategy def;
  SimConfig cfg;
  cfg.trials = 10;
  cfg.flows = 4;  // needs 3 non-entry nodes, chain has 2
  REQUIRE_THROWS_AS(simulate(g, cfg, def, adv), Error);

  AdversaryStrategy broken;
  broken.paths = {{g.index_of("a"), g.index_of("c")}};  // a->c edge missing
  broken.prob = {1.0};
  cfg.flows = 1;
  REQUIRE_THROWS_AS(simulate(g, cfg, def, broken), Error);
}

TEST_CASE("experiment spec: config file layering and manifest reruns") {
  auto g = load_fixture("exfil_pruned.json");
  ExperimentSpec spec;
  spec.trials = 77;  // "flag" layer
  json cfg = json::parse(R"({
    "mode": "sweep_theta",
    "thetas": [0.5],
    "noise_grid": [{"fp": 0, "fn": 0.2}],
    "flows": 3,
    "seed": 9,
    "trials": 200
  })");
  apply_config_json(spec, cfg, g);
  REQUIRE(spec.trials == 200);  // config overrides flags
  REQUIRE(spec.mode == ExperimentSpec::Mode::SweepTheta);

  auto result = run_experiment(g, spec);
  REQUIRE(result.rows.size() == 1);

  // Round-trip through the serialized spec reproduces the same rows.
  ExperimentSpec again;
  apply_config_json(again, spec_to_json(g, spec), g);
  auto result2 = run_experiment(g, again);
  REQUIRE(to_csv(result.rows) == to_csv(result2.rows));

  json bad = json::parse(R"({"mode": "sweep_theta", "thetaz": [1]})");
  ExperimentSpec s2;
  REQUIRE_THROWS_AS(apply_config_json(s2, bad, g), Error);
}

TEST_CASE("a flow absorbs at the first destination it touches") {
  // d1 is a destination with onward edges; paths through it exist in Omega_D
  // but a played flow ends there, so only the pre-d1 prefix is detectable.
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id":"e","cost":9},{"id":"m","cost":1},{"id":"d1","cost":9},
              {"id":"x","cost":1},{"id":"d2","cost":9}],
    "edges": [["e","m"],["m","d1"],["d1","x"],["x","d2"]],
    "entries": ["e"],
    "destinations": ["d1","d2"]
  })"), GraphFormat::Json);
  auto paths = enumerate_attack_paths(g);
  REQUIRE(paths.size() == 2);  // e-m-d1 and e-m-d1-x-d2

  // Detectable prefix stops before d1 on both paths.
  for (const auto& p : paths)
    REQUIRE(detectable_nodes(g, p) == std::vector<int>{g.index_of("m")});

  // Simulating the long path still terminates at d1 with a Reached outcome,
  // and the closed form agrees with the empirical mean exactly at theta=1.
  AdversaryStrategy adv;
  adv.paths = {paths[1]};
  adv.prob = {1.0};
  DefenderStrategy def;
  def.theta = 1.0;
  def.trap_prob = {{g.index_of("m"), 1.0}};
  SimConfig cfg;
  cfg.trials = 4000;
  cfg.seed = 8;
  cfg.flows = 1;
  cfg.noise.fn = 0.25;
  auto est = simulate(g, cfg, def, adv);
  REQUIRE(est.n_trapped + est.n_reached == cfg.trials);
  auto cf = expected_payoffs_closed_form(g, def, adv, cfg.noise, cfg.params, 1);
  REQUIRE(std::abs(est.mean_D - cf.u_D) <= 3.0 * est.stderr_D);
  REQUIRE(cf.p_detect == Catch::Approx(0.75));
}

TEST_CASE("benign collision kernel: occupied single target forces a drop") {
  // Benign flow at b has pi_B = {y: 1.0}; when the malicious flow claims y
  // first, resampling is futile, so the exact kernel puts all mass on drop.
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id":"e"},{"id":"b"},{"id":"y"},{"id":"t"}],
    "edges": [["e","y"],["b","y"],["y","t"]],
    "entries": ["e"],
    "destinations": ["t"],
    "benign": {"b": {"y": 1.0}}
  })"), GraphFormat::Json);
  GameState s;
  s.turn = Turn::Adversary;
  s.step = 2;
  s.positions = {g.index_of("e"), g.index_of("b")};
  auto dist = adversary_transition_dist(g, s, AdversaryAction{g.index_of("y")});
  REQUIRE(dist.size() == 1);
  REQUIRE(dist[0].first.positions[0] == g.index_of("y"));
  REQUIRE(dist[0].first.positions[1] == pos::kDropped);
  REQUIRE(dist[0].second == Catch::Approx(1.0));

  // The sampler obeys the same law.
  for (int i = 0; i < 200; ++i) {
    Stream rng = Stream::for_index(6060, i);
    auto ns = step_adversary(g, s, AdversaryAction{g.index_of("y")}, rng);
    REQUIRE(ns.positions[1] == pos::kDropped);
  }
}

TEST_CASE("benign collision kernel: partial occupancy follows the truncated-retry law") {
  // pi_B(b) = {y: 0.5, drop: 0.5} with y occupied: retrying up to 32 times
  // makes drop certain up to 0.5^32.
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id":"e"},{"id":"b"},{"id":"y"},{"id":"z"},{"id":"t"}],
    "edges": [["e","y"],["b","y"],["b","z"],["y","t"],["z","t"]],
    "entries": ["e"],
    "destinations": ["t"],
    "benign": {"b": {"y": 0.5, "z": 0.25, "drop": 0.25}}
  })"), GraphFormat::Json);
  GameState s;
  s.turn = Turn::Adversary;
  s.step = 2;
  s.positions = {g.index_of("e"), g.index_of("b")};
  auto dist = adversary_transition_dist(g, s, AdversaryAction{g.index_of("y")});
  // occupied mass m = 0.5; survivors scale by (1-m^32)/(1-m) ~= 2.
  double scale = (1.0 - std::pow(0.5, 32)) / 0.5;
  std::map<int, double> by_pos;
  for (const auto& [ns, p] : dist) by_pos[ns.positions[1]] = p;
  REQUIRE(by_pos.at(g.index_of("z")) == Catch::Approx(0.25 * scale));
  REQUIRE(by_pos.at(pos::kDropped) ==
          Catch::Approx(0.25 * scale + std::pow(0.5, 32)));
}
