#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "diftgame/errors.hpp"
#include "diftgame/flownet.hpp"
#include "diftgame/io.hpp"
#include "diftgame/simulate.hpp"
#include "diftgame/strategy.hpp"

namespace diftgame {

// A fully resolved experiment description. The CLI builds one from defaults,
// then flags, then the config file (later layers win), and the manifest
// records the resolved object so reruns are exact.
struct ExperimentSpec {
  enum class Mode { Single, SweepTheta, ComparePlacements, CostSweep };
  Mode mode = Mode::Single;
  std::string label = "run";
  long trials = 1000;
  std::uint64_t seed = 0;
  int flows = 1;
  PayoffParams params;
  std::vector<NoiseModel> noise_cells{NoiseModel{}};
  std::optional<double> theta;          // Single mode override
  std::vector<double> thetas;           // SweepTheta
  std::vector<Placement> placements;    // ComparePlacements / CostSweep
  std::vector<double> cost_scales;      // CostSweep
  // Adversary: equilibrium mixture by default, or a fixed ground-truth path.
  std::optional<std::vector<std::string>> fixed_path_ids;
  std::uint64_t path_limit = 1000000;
};

namespace detail {

inline ExperimentSpec::Mode mode_from_string(const std::string& s) {
  if (s == "single") return ExperimentSpec::Mode::Single;
  if (s == "sweep_theta") return ExperimentSpec::Mode::SweepTheta;
  if (s == "compare_placements") return ExperimentSpec::Mode::ComparePlacements;
  if (s == "cost_sweep") return ExperimentSpec::Mode::CostSweep;
  fail(ErrorKind::Parse, "unknown experiment mode: " + s);
}

inline const char* mode_to_string(ExperimentSpec::Mode m) {
  switch (m) {
    case ExperimentSpec::Mode::Single: return "single";
    case ExperimentSpec::Mode::SweepTheta: return "sweep_theta";
    case ExperimentSpec::Mode::ComparePlacements: return "compare_placements";
    case ExperimentSpec::Mode::CostSweep: return "cost_sweep";
  }
  return "single";
}

inline PlacementKind placement_kind_from_string(const std::string& s) {
  if (s == "mincut") return PlacementKind::MinCut;
  if (s == "cut") return PlacementKind::Cut;
  if (s == "noncut") return PlacementKind::NonCut;
  if (s == "rules") return PlacementKind::Rules;
  fail(ErrorKind::Parse, "unknown placement kind: " + s);
}

inline const char* placement_kind_to_string(PlacementKind k) {
  switch (k) {
    case PlacementKind::MinCut: return "mincut";
    case PlacementKind::Cut: return "cut";
    case PlacementKind::NonCut: return "noncut";
    case PlacementKind::Rules: return "rules";
  }
  return "rules";
}

}  // namespace detail

// Applies a config-file object on top of `spec`. Unknown keys are rejected so
// a typo cannot silently change an experiment.
inline void apply_config_json(ExperimentSpec& spec, const json& doc,
                              const InfoFlowGraph& g) {
  static const std::vector<std::string> known{
      "mode",    "label",      "trials",    "seed",        "flows",
      "params",  "noise",      "noise_grid", "theta",      "thetas",
      "placements", "cost_scales", "adversary", "path_limit"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) fail(ErrorKind::Parse, "unknown config key: " + key);
  }
  if (doc.contains("mode")) spec.mode = detail::mode_from_string(doc["mode"]);
  if (doc.contains("label")) spec.label = doc["label"].get<std::string>();
  if (doc.contains("trials")) spec.trials = doc["trials"].get<long>();
  if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("flows")) spec.flows = doc["flows"].get<int>();
  if (doc.contains("params")) {
    const auto& p = doc["params"];
    if (p.contains("alpha_D")) spec.params.alpha_D = p["alpha_D"].get<double>();
    if (p.contains("beta_D")) spec.params.beta_D = p["beta_D"].get<double>();
    if (p.contains("alpha_A")) spec.params.alpha_A = p["alpha_A"].get<double>();
    if (p.contains("beta_A")) spec.params.beta_A = p["beta_A"].get<double>();
  }
  auto read_noise = [](const json& j) {
    NoiseModel m;
    if (j.contains("fp")) m.fp = j["fp"].get<double>();
    if (j.contains("fn")) m.fn = j["fn"].get<double>();
    return m;
  };
  if (doc.contains("noise")) spec.noise_cells = {read_noise(doc["noise"])};
  if (doc.contains("noise_grid")) {
    spec.noise_cells.clear();
    for (const auto& j : doc["noise_grid"]) spec.noise_cells.push_back(read_noise(j));
  }
  if (doc.contains("theta")) spec.theta = doc["theta"].get<double>();
  if (doc.contains("thetas"))
    spec.thetas = doc["thetas"].get<std::vector<double>>();
  if (doc.contains("cost_scales"))
    spec.cost_scales = doc["cost_scales"].get<std::vector<double>>();
  if (doc.contains("placements")) {
    spec.placements.clear();
    for (const auto& j : doc["placements"]) {
      Placement pl;
      pl.label = j.value("label", std::string("placement"));
      pl.kind = detail::placement_kind_from_string(j.value("kind", std::string("rules")));
      if (j.contains("nodes")) {
        for (const auto& id : j["nodes"]) {
          std::string sid = detail::id_from_json(id);
          int v = g.index_of(sid);
          if (v < 0)
            fail(ErrorKind::ConfigMismatch, "placement names unknown node " + sid);
          pl.nodes.push_back(v);
        }
      }
      std::sort(pl.nodes.begin(), pl.nodes.end());
      spec.placements.push_back(std::move(pl));
    }
  }
  if (doc.contains("adversary")) {
    const auto& j = doc["adversary"];
    std::string kind = j.value("kind", std::string("nash"));
    if (kind == "nash") {
      spec.fixed_path_ids.reset();
    } else if (kind == "fixed_path") {
      if (!j.contains("path"))
        fail(ErrorKind::Parse, "fixed_path adversary needs a \"path\" array");
      std::vector<std::string> ids;
      for (const auto& id : j["path"]) ids.push_back(detail::id_from_json(id));
      spec.fixed_path_ids = std::move(ids);
    } else {
      fail(ErrorKind::Parse, "unknown adversary kind: " + kind);
    }
  }
  if (doc.contains("path_limit"))
    spec.path_limit = doc["path_limit"].get<std::uint64_t>();
}

inline json spec_to_json(const InfoFlowGraph& g, const ExperimentSpec& spec) {
  json doc;
  doc["mode"] = detail::mode_to_string(spec.mode);
  doc["label"] = spec.label;
  doc["trials"] = spec.trials;
  doc["seed"] = spec.seed;
  doc["flows"] = spec.flows;
  doc["params"] = {{"alpha_D", spec.params.alpha_D},
                   {"beta_D", spec.params.beta_D},
                   {"alpha_A", spec.params.alpha_A},
                   {"beta_A", spec.params.beta_A}};
  doc["noise_grid"] = json::array();
  for (const auto& m : spec.noise_cells)
    doc["noise_grid"].push_back({{"fp", m.fp}, {"fn", m.fn}});
  if (spec.theta) doc["theta"] = *spec.theta;
  if (!spec.thetas.empty()) doc["thetas"] = spec.thetas;
  if (!spec.cost_scales.empty()) doc["cost_scales"] = spec.cost_scales;
  if (!spec.placements.empty()) {
    doc["placements"] = json::array();
    for (const auto& pl : spec.placements) {
      json j;
      j["label"] = pl.label;
      j["kind"] = detail::placement_kind_to_string(pl.kind);
      j["nodes"] = json::array();
      for (int v : pl.nodes) j["nodes"].push_back(g.ids[v]);
      doc["placements"].push_back(j);
    }
  }
  if (spec.fixed_path_ids) {
    doc["adversary"] = {{"kind", "fixed_path"}, {"path", *spec.fixed_path_ids}};
  } else {
    doc["adversary"] = {{"kind", "nash"}};
  }
  doc["path_limit"] = spec.path_limit;
  return doc;
}

struct ExperimentResult {
  std::vector<ResultRow> rows;
  NodeCut cut;
  double theta_ne = 0.0;
};

inline AdversaryStrategy resolve_adversary(const InfoFlowGraph& g,
                                           const ExperimentSpec& spec,
                                           const std::vector<AttackPath>& paths,
                                           const NodeCut& cut) {
  if (!spec.fixed_path_ids) return nash_adversary(paths, cut);
  AttackPath path;
  for (const auto& id : *spec.fixed_path_ids) {
    int v = g.index_of(id);
    if (v < 0) fail(ErrorKind::ConfigMismatch, "fixed path names unknown node " + id);
    path.push_back(v);
  }
  AdversaryStrategy adv;
  adv.paths = {path};
  adv.prob = {1.0};
  validate_adversary_paths(g, adv);
  return adv;
}

inline ExperimentResult run_experiment(const InfoFlowGraph& g,
                                       const ExperimentSpec& spec) {
  ExperimentResult out;
  out.cut = solve_min_node_cut(g);
  out.theta_ne = theta_bound(out.cut, spec.flows);
  auto paths = enumerate_attack_paths(g, spec.path_limit);
  AdversaryStrategy adversary = resolve_adversary(g, spec, paths, out.cut);

  SimConfig base;
  base.trials = spec.trials;
  base.seed = spec.seed;
  base.flows = spec.flows;
  base.params = spec.params;
  base.label = spec.label;

  switch (spec.mode) {
    case ExperimentSpec::Mode::Single: {
      double theta = spec.theta.value_or(out.theta_ne);
      out.rows = sweep_theta(g, out.cut, base, {theta}, spec.noise_cells, adversary);
      break;
    }
    case ExperimentSpec::Mode::SweepTheta: {
      if (spec.thetas.empty())
        fail(ErrorKind::ConfigMismatch, "sweep_theta needs a thetas list");
      out.rows = sweep_theta(g, out.cut, base, spec.thetas, spec.noise_cells, adversary);
      break;
    }
    case ExperimentSpec::Mode::ComparePlacements: {
      if (spec.placements.empty())
        fail(ErrorKind::ConfigMismatch, "compare_placements needs placements");
      out.rows = compare_placements(g, out.cut, base, spec.placements,
                                    spec.noise_cells, adversary);
      break;
    }
    case ExperimentSpec::Mode::CostSweep: {
      if (spec.placements.empty() || spec.cost_scales.empty())
        fail(ErrorKind::ConfigMismatch,
             "cost_sweep needs placements and cost_scales");
      base.noise = spec.noise_cells.front();
      out.rows = cost_sweep(g, base, spec.cost_scales, spec.placements, adversary);
      break;
    }
  }
  return out;
}

// Plot-friendly series grouping: one series per label prefix, one point per
// row (x carries the noise cell or cost scale).
inline json rows_to_series_json(const std::vector<ResultRow>& rows) {
  json doc;
  doc["series"] = json::array();
  json* current = nullptr;
  std::string current_label;
  for (const auto& r : rows) {
    if (r.label != current_label || current == nullptr) {
      doc["series"].push_back(
          {{"label", r.label}, {"points", json::array()}});
      current = &doc["series"].back();
      current_label = r.label;
    }
    char x[64];
    std::snprintf(x, sizeof x, "FP=%g,FN=%g", r.fp, r.fn);
    (*current)["points"].push_back({{"x", x},
                                    {"theta", r.theta},
                                    {"mean_D", r.est.mean_D},
                                    {"stderr_D", r.est.stderr_D},
                                    {"mean_A", r.est.mean_A},
                                    {"stderr_A", r.est.stderr_A}});
  }
  return doc;
}

// ---- run manifest -----------------------------------------------------------

inline constexpr const char* kToolName = "diftgame";
inline constexpr const char* kToolVersion = "1.0.0";

// Emitted alongside every output; rerunning a manifest reproduces the outputs
// byte for byte (nothing time- or host-dependent is recorded).
struct RunManifest {
  std::string command;
  std::string input_path;
  std::string format = "json";
  json config;  // resolved experiment spec or command options
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
};

inline json manifest_to_json(const RunManifest& m) {
  json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["command"] = m.command;
  doc["input"] = m.input_path;
  doc["format"] = m.format;
  doc["config"] = m.config;
  doc["seed"] = m.seed;
  doc["outputs"] = m.outputs;
  return doc;
}

inline RunManifest manifest_from_json(const json& doc) {
  RunManifest m;
  if (!doc.is_object() || !doc.contains("command") || !doc.contains("input"))
    fail(ErrorKind::Parse, "manifest needs command and input fields");
  m.command = doc["command"].get<std::string>();
  m.input_path = doc["input"].get<std::string>();
  m.format = doc.value("format", std::string("json"));
  if (doc.contains("config")) m.config = doc["config"];
  if (doc.contains("seed")) m.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("outputs"))
    m.outputs = doc["outputs"].get<std::vector<std::string>>();
  return m;
}

}  // namespace diftgame
