// diftgame: min-cut trap placement and stochastic-game simulation for
// DIFT-style defenses on information flow graphs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diftgame/errors.hpp"
#include "diftgame/experiment.hpp"
#include "diftgame/flownet.hpp"
#include "diftgame/game.hpp"
#include "diftgame/graph.hpp"
#include "diftgame/io.hpp"
#include "diftgame/oracle.hpp"
#include "diftgame/simulate.hpp"
#include "diftgame/strategy.hpp"

namespace fs = std::filesystem;
using namespace diftgame;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNoPath = 4;
constexpr int kExitConfig = 5;
constexpr int kExitEquilibrium = 6;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Parse: return kExitParse;
    case ErrorKind::Validation: return kExitValidation;
    case ErrorKind::CyclicGraph: return kExitValidation;
    case ErrorKind::NoAttackPath: return kExitNoPath;
    case ErrorKind::Disconnected: return kExitNoPath;
    case ErrorKind::ConfigMismatch: return kExitConfig;
    case ErrorKind::InvalidTheta: return kExitConfig;
    case ErrorKind::PathExplosion: return kExitConfig;
    default: return 1;
  }
}

json id_json(const std::string& id) {
  bool digits = !id.empty() && id.size() <= 18;
  for (char c : id) digits = digits && std::isdigit(static_cast<unsigned char>(c));
  if (digits) return json(std::stoull(id));
  return json(id);
}

struct GraphOptions {
  std::string path;
  std::string format = "json";
  std::string on_cycle = "version";
  bool no_prune = false;
};

InfoFlowGraph load_graph(const GraphOptions& opt) {
  std::ifstream in(opt.path);
  if (!in) fail(ErrorKind::Parse, "cannot open input file " + opt.path);
  GraphFormat fmt = opt.format == "dot" ? GraphFormat::Dot : GraphFormat::Json;
  InfoFlowGraph g = parse_ifg(in, fmt);
  g = ensure_acyclic(g, opt.on_cycle == "reject" ? AcyclicMode::Reject
                                                 : AcyclicMode::Version);
  if (!opt.no_prune) g = prune_to_attack_subgraph(g);
  return g;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigMismatch, "cannot write " + path.string());
  out << content;
}

void add_graph_options(CLI::App* cmd, GraphOptions& opt) {
  cmd->add_option("graph", opt.path, "information flow graph file")->required();
  cmd->add_option("--format", opt.format, "input format: json or dot")
      ->check(CLI::IsMember({"json", "dot"}));
  cmd->add_option("--on-cycle", opt.on_cycle,
                  "cycle handling: version (node versioning) or reject")
      ->check(CLI::IsMember({"version", "reject"}));
  cmd->add_flag("--no-prune", opt.no_prune,
                "skip pruning to the attack subgraph");
}

int cmd_mincut(const GraphOptions& gopt, int flows,
               const std::string& out_dir, const std::string& strategies_path) {
  InfoFlowGraph g = load_graph(gopt);
  NodeCut cut = solve_min_node_cut(g);

  json report;
  report["trap_nodes"] = json::array();
  for (int v : cut.trap_nodes) report["trap_nodes"].push_back(id_json(g.ids[v]));
  report["capacity"] = cut.capacity;
  report["flow_value"] = cut.flow_value;
  report["r"] = cut.trap_nodes.size();
  if (flows > 0) {
    report["flows"] = flows;
    report["theta"] = theta_bound(cut, flows);
  }
  std::cout << report.dump(2) << "\n";

  if (!strategies_path.empty()) {
    if (flows <= 0)
      fail(ErrorKind::ConfigMismatch, "--strategies requires --flows");
    auto paths = enumerate_attack_paths(g);
    json bundle;
    bundle["cut"] = cut_to_json(g, cut);
    bundle["defender"] = defender_strategy_to_json(g, nash_defender(cut, flows));
    bundle["adversary"] = adversary_strategy_to_json(g, nash_adversary(paths, cut));
    write_file(strategies_path, bundle.dump(2) + "\n");
  }
  if (!out_dir.empty()) {
    RunManifest m;
    m.command = "mincut";
    m.input_path = gopt.path;
    m.format = gopt.format;
    m.config = {{"flows", flows},
                {"on_cycle", gopt.on_cycle},
                {"no_prune", gopt.no_prune}};
    fs::path dir(out_dir);
    write_file(dir / "mincut.json", report.dump(2) + "\n");
    m.outputs = {"mincut.json"};
    write_file(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
  }
  return 0;
}

struct SimulateFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::string trace_path;
  long trials = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int flows = -1;
  double fn = -1.0, fp = -1.0, theta = -1.0;
  std::string placement;
  std::string label;
};

ExperimentSpec resolve_spec(const InfoFlowGraph& g, const SimulateFlags& flags) {
  ExperimentSpec spec;
  // defaults < flags < config file
  if (flags.trials > 0) spec.trials = flags.trials;
  if (flags.seed_set) spec.seed = flags.seed;
  if (flags.flows > 0) spec.flows = flags.flows;
  if (flags.fn >= 0.0 || flags.fp >= 0.0) {
    NoiseModel m;
    if (flags.fn >= 0.0) m.fn = flags.fn;
    if (flags.fp >= 0.0) m.fp = flags.fp;
    spec.noise_cells = {m};
  }
  if (flags.theta >= 0.0) spec.theta = flags.theta;
  if (!flags.label.empty()) spec.label = flags.label;
  if (!flags.placement.empty()) {
    spec.mode = ExperimentSpec::Mode::ComparePlacements;
    Placement pl;
    auto colon = flags.placement.find(':');
    std::string kind = flags.placement.substr(0, colon == std::string::npos
                                                     ? flags.placement.size()
                                                     : colon);
    pl.kind = detail::placement_kind_from_string(kind);
    pl.label = kind;
    if (colon != std::string::npos) {
      std::string rest = flags.placement.substr(colon + 1);
      if (pl.kind == PlacementKind::Rules) {
        std::ifstream in(rest);
        if (!in) fail(ErrorKind::Parse, "cannot open rules file " + rest);
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.contains("nodes"))
          fail(ErrorKind::Parse, "rules file needs a {\"nodes\":[...]} object");
        for (const auto& id : doc["nodes"]) {
          int v = g.index_of(detail::id_from_json(id));
          if (v < 0) fail(ErrorKind::ConfigMismatch, "rules file names unknown node");
          pl.nodes.push_back(v);
        }
      } else {
        std::string token;
        std::istringstream ss(rest);
        while (std::getline(ss, token, ',')) {
          int v = g.index_of(token);
          if (v < 0)
            fail(ErrorKind::ConfigMismatch, "placement names unknown node " + token);
          pl.nodes.push_back(v);
        }
      }
      std::sort(pl.nodes.begin(), pl.nodes.end());
    }
    spec.placements = {pl};
  }
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) fail(ErrorKind::Parse, "cannot open config " + flags.config_path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::Parse, "malformed config JSON");
    apply_config_json(spec, doc, g);
  }
  return spec;
}

int run_simulate(const GraphOptions& gopt, const ExperimentSpec& spec,
                 const std::string& out_dir, const std::string& trace_path) {
  InfoFlowGraph g = load_graph(gopt);
  ExperimentResult result;
  if (!trace_path.empty()) {
    // Trace the first noise cell's run while computing results normally.
    std::ofstream trace_out(trace_path, std::ios::binary);
    if (!trace_out) fail(ErrorKind::ConfigMismatch, "cannot write " + trace_path);
    TraceSink sink = [&](const TraceRecord& rec) {
      json j;
      j["trial"] = rec.trial;
      j["t"] = rec.t;
      j["turn"] = std::string(1, rec.turn);
      j["action"] = rec.action;
      j["state"] = rec.state;
      j["payoff_D"] = rec.payoff_D;
      j["payoff_A"] = rec.payoff_A;
      trace_out << j.dump() << "\n";
    };
    NodeCut cut = solve_min_node_cut(g);
    auto paths = enumerate_attack_paths(g, spec.path_limit);
    AdversaryStrategy adv = resolve_adversary(g, spec, paths, cut);
    DefenderStrategy def =
        nash_defender(cut, spec.flows);
    if (spec.theta) {
      def.theta = *spec.theta;
      for (auto& [v, p] : def.trap_prob) p = *spec.theta;
    }
    SimConfig cfg;
    cfg.trials = spec.trials;
    cfg.seed = spec.seed;
    cfg.flows = spec.flows;
    cfg.noise = spec.noise_cells.front();
    cfg.params = spec.params;
    cfg.label = spec.label;
    simulate(g, cfg, def, adv, nullptr, &sink);
  }
  result = run_experiment(g, spec);

  fs::path dir(out_dir);
  std::string csv = to_csv(result.rows);
  write_file(dir / "results.csv", csv);
  write_file(dir / "series.json", rows_to_series_json(result.rows).dump(2) + "\n");

  ExperimentSpec resolved = spec;
  RunManifest m;
  m.command = "simulate";
  m.input_path = gopt.path;
  m.format = gopt.format;
  m.config = spec_to_json(g, resolved);
  m.config["on_cycle"] = gopt.on_cycle;
  m.config["no_prune"] = gopt.no_prune;
  m.seed = spec.seed;
  m.outputs = {"results.csv", "series.json"};
  write_file(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");

  std::cout << "cut: ";
  for (int v : result.cut.trap_nodes) std::cout << g.ids[v] << " ";
  std::cout << "(capacity " << format_double(result.cut.capacity)
            << ", theta_NE " << format_double(result.theta_ne) << ")\n";
  std::cout << "rows: " << result.rows.size() << " -> "
            << (dir / "results.csv").string() << "\n";
  return 0;
}

int cmd_verify(const GraphOptions& gopt, int flows, double fn, double fp,
               const std::string& strategy_path, double grid) {
  InfoFlowGraph g = load_graph(gopt);
  NodeCut cut = solve_min_node_cut(g);
  std::vector<AttackPath> paths;
  try {
    paths = enumerate_attack_paths(g, 10000);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::PathExplosion) {
      std::cout << "instance too large for exhaustive verification ("
                << e.what() << ")\n";
      return 0;
    }
    throw;
  }
  NoiseModel noise{fn, fp};
  noise.fn = fn;
  noise.fp = fp;
  PayoffParams params;
  DefenderStrategy def = nash_defender(cut, flows);
  AdversaryStrategy adv = nash_adversary(paths, cut);

  bool ok = true;
  auto check = [&](bool cond, const std::string& what) {
    std::cout << (cond ? "PASS " : "FAIL ") << what << "\n";
    ok = ok && cond;
  };

  if (!strategy_path.empty()) {
    std::ifstream in(strategy_path);
    if (!in) fail(ErrorKind::Parse, "cannot open strategy " + strategy_path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::Parse, "malformed strategy JSON");
    DefenderStrategy given = defender_strategy_from_json(g, doc);
    double lo = 1e300, hi = -1e300;
    bool off_cut = false;
    for (const auto& [v, p] : given.trap_prob) {
      bool in_cut = std::binary_search(cut.trap_nodes.begin(),
                                       cut.trap_nodes.end(), v);
      if (!in_cut && p > 0.0) off_cut = true;
      if (in_cut) { lo = std::min(lo, p); hi = std::max(hi, p); }
    }
    for (int v : cut.trap_nodes)
      if (!given.trap_prob.count(v)) { lo = std::min(lo, 0.0); hi = std::max(hi, 0.0); }
    check(hi - lo <= 1e-9,
          "min-cut trap probabilities are all equal (found spread " +
              format_double(hi - lo) + ")");
    check(!off_cut, "no trap mass outside the min-cut node set");
    check(hi <= theta_bound(cut, flows) + 1e-9,
          "trap probability within the 1/min{W,r} bound");
    if (!ok) return kExitEquilibrium;
    def = given;
  }

  try {
    ClosedFormPayoffs ne = expected_payoffs_closed_form(g, def, adv, noise,
                                                        params, flows);
    OracleLimits limits;
    limits.grid = grid;
    auto br_def = best_response_oracle(g, paths, def, adv, Side::Defender,
                                       noise, params, flows, limits);
    auto br_adv = best_response_oracle(g, paths, def, adv, Side::Adversary,
                                       noise, params, flows, limits);
    double tol = 1e-6;
    check(br_def.payoff <= ne.u_D + tol,
          "no defender deviation improves the closed-form payoff (BR " +
              format_double(br_def.payoff) + " vs NE " + format_double(ne.u_D) + ")");
    check(br_adv.payoff <= ne.u_A + tol,
          "no adversary deviation improves the closed-form payoff (BR " +
              format_double(br_adv.payoff) + " vs NE " + format_double(ne.u_A) + ")");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InstanceTooLarge) {
      std::cout << "instance too large for exhaustive verification: "
                << e.what() << "\n";
      return ok ? 0 : kExitEquilibrium;
    }
    throw;
  }

  // Structural equilibrium properties.
  auto classes = classify_paths_by_cut(paths, cut.trap_nodes);
  check(classes.uncovered.empty(), "every attack path crosses the min-cut");
  bool single_crossing = true;
  for (const auto& p : adv.paths) {
    int crossings = 0;
    for (int v : p)
      if (std::binary_search(cut.trap_nodes.begin(), cut.trap_nodes.end(), v))
        crossings++;
    single_crossing = single_crossing && crossings == 1;
  }
  check(single_crossing,
        "equilibrium adversary support crosses exactly one trap node");
  return ok ? 0 : kExitEquilibrium;
}

int dispatch_manifest(const std::string& manifest_path,
                      const std::string& out_dir_override);

int real_main(int argc, char** argv) {
  CLI::App app{"Optimal DIFT trap placement via minimum node cuts, with a "
               "turn-based stochastic-game simulator"};
  app.require_subcommand(1);

  GraphOptions mincut_g;
  int mincut_flows = 0;
  std::string mincut_out_dir, mincut_strategies;
  auto* mincut = app.add_subcommand("mincut", "solve the trap placement cut");
  add_graph_options(mincut, mincut_g);
  mincut->add_option("--flows", mincut_flows, "number of tagged flows W");
  mincut->add_option("--out-dir", mincut_out_dir, "write report + manifest here");
  mincut->add_option("--strategies", mincut_strategies,
                     "write the equilibrium strategy pair to this file");

  GraphOptions sim_g;
  SimulateFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "run Monte Carlo experiments");
  add_graph_options(sim, sim_g);
  sim->add_option("--config", sim_flags.config_path, "experiment config JSON");
  sim->add_option("--out-dir", sim_flags.out_dir, "output directory");
  sim->add_option("--trials", sim_flags.trials, "trials per cell");
  sim->add_option("--seed", sim_flags.seed, "master seed")
      ->each([&](const std::string&) { sim_flags.seed_set = true; });
  sim->add_option("--flows", sim_flags.flows, "number of tagged flows W");
  sim->add_option("--fn", sim_flags.fn, "false negative rate");
  sim->add_option("--fp", sim_flags.fp, "false positive rate");
  sim->add_option("--theta", sim_flags.theta, "trap probability override");
  sim->add_option("--placement", sim_flags.placement,
                  "mincut | cut:<ids> | noncut:<ids> | rules:<file>");
  sim->add_option("--label", sim_flags.label, "row label prefix");
  sim->add_option("--trace", sim_flags.trace_path,
                  "write a JSONL episode trace of the first cell");

  GraphOptions verify_g;
  int verify_flows = 1;
  double verify_fn = 0.2, verify_fp = 0.0, verify_grid = 0.1;
  std::string verify_strategy;
  auto* verify = app.add_subcommand(
      "verify", "equilibrium checks via the exhaustive best-response oracle");
  add_graph_options(verify, verify_g);
  verify->add_option("--flows", verify_flows, "number of tagged flows W");
  verify->add_option("--fn", verify_fn, "false negative rate");
  verify->add_option("--fp", verify_fp, "false positive rate");
  verify->add_option("--grid", verify_grid, "defender grid resolution");
  verify->add_option("--strategy", verify_strategy,
                     "defender strategy JSON to check instead of the solver's");

  std::string run_manifest_path, run_out_dir;
  auto* run = app.add_subcommand("run", "re-execute a recorded manifest");
  run->add_option("--manifest", run_manifest_path, "manifest JSON")->required();
  run->add_option("--out-dir", run_out_dir, "override the output directory");

  CLI11_PARSE(app, argc, argv);

  if (mincut->parsed())
    return cmd_mincut(mincut_g, mincut_flows, mincut_out_dir, mincut_strategies);
  if (sim->parsed()) {
    InfoFlowGraph g = load_graph(sim_g);
    ExperimentSpec spec = resolve_spec(g, sim_flags);
    return run_simulate(sim_g, spec, sim_flags.out_dir, sim_flags.trace_path);
  }
  if (verify->parsed())
    return cmd_verify(verify_g, verify_flows, verify_fn, verify_fp,
                      verify_strategy, verify_grid);
  if (run->parsed()) return dispatch_manifest(run_manifest_path, run_out_dir);
  return 1;
}

int dispatch_manifest(const std::string& manifest_path,
                      const std::string& out_dir_override) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::Parse, "cannot open manifest " + manifest_path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) fail(ErrorKind::Parse, "malformed manifest JSON");
  RunManifest m = manifest_from_json(doc);

  GraphOptions gopt;
  gopt.path = m.input_path;
  gopt.format = m.format;
  if (m.config.contains("on_cycle"))
    gopt.on_cycle = m.config["on_cycle"].get<std::string>();
  if (m.config.contains("no_prune"))
    gopt.no_prune = m.config["no_prune"].get<bool>();

  std::string out_dir = out_dir_override.empty()
                            ? fs::path(manifest_path).parent_path().string()
                            : out_dir_override;
  if (m.command == "mincut") {
    int flows = m.config.value("flows", 0);
    return cmd_mincut(gopt, flows, out_dir, "");
  }
  if (m.command == "simulate") {
    InfoFlowGraph g = load_graph(gopt);
    ExperimentSpec spec;
    json cfg = m.config;
    cfg.erase("on_cycle");
    cfg.erase("no_prune");
    apply_config_json(spec, cfg, g);
    return run_simulate(gopt, spec, out_dir, "");
  }
  fail(ErrorKind::Parse, "manifest command not rerunnable: " + m.command);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return real_main(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
