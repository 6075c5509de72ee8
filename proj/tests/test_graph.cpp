#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "diftgame/flownet.hpp"
#include "diftgame/graph.hpp"
#include "diftgame/io.hpp"
#include "support/test_support.hpp"

using namespace diftgame;
using testsupport::load_fixture;

TEST_CASE("minimal JSON graph parses") {
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id": "a"}, {"id": "b"}],
    "edges": [["a", "b"]],
    "entries": ["a"],
    "destinations": ["b"]
  })"), GraphFormat::Json);
  REQUIRE(g.size() == 2);
  REQUIRE(g.adj[g.index_of("a")].size() == 1);
  REQUIRE(g.is_entry(g.index_of("a")));
  REQUIRE(g.is_dest(g.index_of("b")));
}

TEST_CASE("missing cost defaults to 1.0, missing benign to uniform") {
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
    "edges": [["a", "b"], ["a", "c"]],
    "entries": ["a"],
    "destinations": ["c"]
  })"), GraphFormat::Json);
  for (int v = 0; v < g.size(); ++v) REQUIRE(g.cost[v] == 1.0);
  int a = g.index_of("a");
  REQUIRE(g.benign[a].moves.size() == 2);
  REQUIRE(g.benign[a].drop == Catch::Approx(1.0 / 3));
  for (auto [u, p] : g.benign[a].moves) {
    (void)u;
    REQUIRE(p == Catch::Approx(1.0 / 3));
  }
}

TEST_CASE("validation errors name the invariant") {
  auto expect_validation = [](const std::string& text, const std::string& needle) {
    try {
      parse_ifg(text, GraphFormat::Json);
      FAIL("expected ValidationError");
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::Validation);
      REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_validation(R"({"nodes":[{"id":"a"},{"id":"b"}],
    "edges":[["a","x"]], "entries":["a"], "destinations":["b"]})",
                    "edge endpoint");
  expect_validation(R"({"nodes":[{"id":"a"},{"id":"b"}],
    "edges":[["a","b"]], "entries":["a"], "destinations":["a"]})",
                    "disjoint");
  expect_validation(R"({"nodes":[{"id":"a","cost":0},{"id":"b"}],
    "edges":[["a","b"]], "entries":["a"], "destinations":["b"]})",
                    "strictly positive");
  expect_validation(R"({"nodes":[{"id":"a"},{"id":"b"}],
    "edges":[["a","b"]], "entries":["a"], "destinations":["b"],
    "benign":{"a":{"b":0.6,"drop":0.6}}})",
                    "sum to 1");
  expect_validation(R"({"nodes":[{"id":"a"},{"id":"b"},{"id":"c"}],
    "edges":[["a","b"]], "entries":["a"], "destinations":["b"],
    "benign":{"a":{"c":1.0}}})",
                    "outside out-neighbors");
}

TEST_CASE("malformed input is a parse error") {
  try {
    parse_ifg(std::string("{nope"), GraphFormat::Json);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::Parse);
  }
}

TEST_CASE("exfil fixture: 17 nodes, entries {1,5}, destination {3}") {
  auto g = load_fixture("exfil_pruned.json");
  REQUIRE(g.size() == 17);
  REQUIRE(g.entries.size() == 2);
  REQUIRE(g.ids[g.entries[0]] == "1");
  REQUIRE(g.ids[g.entries[1]] == "5");
  REQUIRE(g.dests.size() == 1);
  REQUIRE(g.ids[g.dests[0]] == "3");
  REQUIRE(g.cost[g.index_of("2")] == Catch::Approx(0.005705));
  REQUIRE(g.cost[g.index_of("16")] == Catch::Approx(0.167162));
  REQUIRE(g.cost[g.index_of("17")] == Catch::Approx(0.016177));
  REQUIRE(g.meta[g.index_of("2")].name == "/usr/bin/sudo");
  REQUIRE(g.meta[g.index_of("11")].name == "/run/ConsoleKit/database~");
}

TEST_CASE("DOT import honors kind/cost/entry/dest attributes") {
  std::string dot = R"(digraph ifg {
    // comment line
    a [kind="Process", cost=5.0, entry=true];
    b [kind="File", cost=2.0];
    c [cost=7.0, dest=true];
    a -> b;
    b -> c;
  })";
  auto g = parse_ifg(dot, GraphFormat::Dot);
  REQUIRE(g.size() == 3);
  REQUIRE(g.meta[g.index_of("a")].kind == NodeKind::Process);
  REQUIRE(g.cost[g.index_of("b")] == 2.0);
  REQUIRE(g.is_entry(g.index_of("a")));
  REQUIRE(g.is_dest(g.index_of("c")));
}

TEST_CASE("serialize/parse round-trip is the identity on random graphs") {
  Stream rng(7);
  for (int iter = 0; iter < 30; ++iter) {
    Stream sub = Stream::for_index(99, iter);
    auto raw = testsupport::random_dag(sub, {});
    auto g = build_graph(raw);
    auto again = parse_ifg(serialize_graph(g), GraphFormat::Json);
    REQUIRE(again.ids == g.ids);
    REQUIRE(again.adj == g.adj);
    REQUIRE(again.entries == g.entries);
    REQUIRE(again.dests == g.dests);
    for (int v = 0; v < g.size(); ++v) {
      REQUIRE(again.cost[v] == g.cost[v]);
      REQUIRE(again.benign[v].moves == g.benign[v].moves);
      REQUIRE(again.benign[v].drop == g.benign[v].drop);
    }
  }
  (void)rng;
}

TEST_CASE("prune removes unreachable nodes and is idempotent") {
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id":"a"},{"id":"b"},{"id":"c"},{"id":"d"}],
    "edges": [["a","b"],["b","c"]],
    "entries": ["a"],
    "destinations": ["c"]
  })"), GraphFormat::Json);
  auto pruned = prune_to_attack_subgraph(g);
  REQUIRE(pruned.size() == 3);
  REQUIRE(pruned.index_of("d") == -1);
  auto twice = prune_to_attack_subgraph(pruned);
  REQUIRE(twice.ids == pruned.ids);
  REQUIRE(twice.adj == pruned.adj);
}

TEST_CASE("prune on random graphs: every survivor lies on an attack path") {
  for (int iter = 0; iter < 25; ++iter) {
    Stream sub = Stream::for_index(1234, iter);
    testsupport::DagOptions opt;
    opt.edge_prob = 0.25;
    auto g = build_graph(testsupport::random_dag(sub, opt));
    auto pruned = prune_to_attack_subgraph(g);
    auto fwd = detail::reach_forward(pruned, pruned.entries);
    auto bwd = detail::reach_backward(pruned, pruned.dests);
    for (int v = 0; v < pruned.size(); ++v) {
      REQUIRE(fwd[v] == 1);
      REQUIRE(bwd[v] == 1);
    }
    auto twice = prune_to_attack_subgraph(pruned);
    REQUIRE(twice.ids == pruned.ids);
  }
}

TEST_CASE("prune folds benign mass of removed neighbors into drop") {
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id":"a"},{"id":"b"},{"id":"c"},{"id":"x"}],
    "edges": [["a","b"],["b","c"],["b","x"]],
    "entries": ["a"],
    "destinations": ["c"],
    "benign": {"b": {"c": 0.5, "x": 0.3, "drop": 0.2}}
  })"), GraphFormat::Json);
  auto pruned = prune_to_attack_subgraph(g);  // x reaches no destination
  REQUIRE(pruned.index_of("x") == -1);
  int b = pruned.index_of("b");
  REQUIRE(pruned.benign[b].moves.size() == 1);
  REQUIRE(pruned.benign[b].moves[0].second == Catch::Approx(0.5));
  REQUIRE(pruned.benign[b].drop == Catch::Approx(0.5));
}

TEST_CASE("unknown node kind is a parse error") {
  try {
    parse_ifg(std::string(R"({"nodes":[{"id":"a","kind":"Gadget"},{"id":"b"}],
      "edges":[["a","b"]], "entries":["a"], "destinations":["b"]})"),
              GraphFormat::Json);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::Parse);
  }
}

TEST_CASE("prune with unreachable destination reports NoAttackPath") {
  auto g = parse_ifg(std::string(R"({
    "nodes": [{"id":"a"},{"id":"b"},{"id":"c"}],
    "edges": [["b","a"]],
    "entries": ["a"],
    "destinations": ["c"]
  })"), GraphFormat::Json);
  try {
    prune_to_attack_subgraph(g);
    FAIL("expected NoAttackPath");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::NoAttackPath);
  }
}

TEST_CASE("large host graph prunes down to the embedded attack core") {
  // A ~299-node supergraph around the exfil core: feeders into the entries,
  // drains out of the destination, and disconnected clutter. None of the
  // extras lies on an entry->destination path.
  auto core = load_fixture("exfil_pruned.json");
  RawGraph raw = to_raw(core);
  Stream rng(5150);
  int extra = 299 - core.size();
  std::vector<std::string> extras;
  for (int i = 0; i < extra; ++i) {
    RawGraph::Node node;
    node.id = "x" + std::to_string(i);
    node.cost = 1.0;
    raw.nodes.push_back(node);
    extras.push_back(node.id);
  }
  for (int i = 0; i < extra; ++i) {
    double roll = rng.uniform();
    if (roll < 0.3) {
      raw.edges.push_back({extras[i], rng.uniform() < 0.5 ? "1" : "5"});
    } else if (roll < 0.6) {
      raw.edges.push_back({"3", extras[i]});
    } else if (i > 0) {
      raw.edges.push_back({extras[i - 1], extras[i]});
    }
  }
  auto host = build_graph(raw);
  REQUIRE(host.size() == 299);
  auto pruned = prune_to_attack_subgraph(host);
  REQUIRE(pruned.size() == 17);
  REQUIRE(enumerate_attack_paths(pruned).size() == 13);
}

TEST_CASE("ensure_acyclic leaves DAGs untouched and rejects cycles with a witness") {
  auto dag = load_fixture("diamond.json");
  auto same = ensure_acyclic(dag, AcyclicMode::Reject);
  REQUIRE(same.ids == dag.ids);

  auto cyc = parse_ifg(std::string(R"({
    "nodes": [{"id":"a"},{"id":"b"},{"id":"t"}],
    "edges": [["a","b"],["b","a"],["b","t"]],
    "entries": ["a"],
    "destinations": ["t"]
  })"), GraphFormat::Json);
  try {
    ensure_acyclic(cyc, AcyclicMode::Reject);
    FAIL("expected CyclicGraph");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::CyclicGraph);
    std::string msg = e.what();
    REQUIRE(msg.find("a") != std::string::npos);
    REQUIRE(msg.find("b") != std::string::npos);
  }
}

TEST_CASE("node versioning: a<->b unrolls to a@1 -> b@1 -> a@2") {
  auto cyc = parse_ifg(std::string(R"({
    "nodes": [{"id":"a"},{"id":"b"}],
    "edges": [["a","b"],["b","a"]],
    "entries": ["a"],
    "destinations": ["b"]
  })"), GraphFormat::Json);
  auto versioned = ensure_acyclic(cyc, AcyclicMode::Version);
  REQUIRE(is_acyclic(versioned));
  REQUIRE(topological_order(versioned).has_value());
  int a1 = versioned.index_of("a@1");
  int b1 = versioned.index_of("b@1");
  int a2 = versioned.index_of("a@2");
  REQUIRE(a1 >= 0);
  REQUIRE(b1 >= 0);
  REQUIRE(a2 >= 0);
  REQUIRE(std::binary_search(versioned.adj[a1].begin(), versioned.adj[a1].end(), b1));
  REQUIRE(std::binary_search(versioned.adj[b1].begin(), versioned.adj[b1].end(), a2));
  REQUIRE(versioned.is_entry(a1));
  REQUIRE_FALSE(versioned.is_entry(a2));

  // The original back-edge-free path a->b keeps its image a@1->b@1.
  auto paths = testsupport::simple_paths_ids(versioned);
  bool found = false;
  for (const auto& p : paths)
    found = found || (p == std::vector<std::string>{"a@1", "b@1"});
  REQUIRE(found);
}

TEST_CASE("node versioning preserves every original simple path") {
  // Cyclic graph with several interleaved cycles; every original simple
  // entry->destination path must have a versioned image.
  auto cyc = parse_ifg(std::string(R"({
    "nodes": [{"id":"e"},{"id":"p"},{"id":"q"},{"id":"r"},{"id":"t"}],
    "edges": [["e","p"],["p","q"],["q","r"],["r","p"],["q","p"],["r","t"],["p","t"]],
    "entries": ["e"],
    "destinations": ["t"]
  })"), GraphFormat::Json);
  auto originals = testsupport::simple_paths_ids(cyc);
  auto versioned = ensure_acyclic(cyc, AcyclicMode::Version);
  REQUIRE(is_acyclic(versioned));
  auto strip = [](const std::string& id) {
    auto at = id.find('@');
    return at == std::string::npos ? id : id.substr(0, at);
  };
  auto images = testsupport::simple_paths_ids(versioned);
  std::set<std::vector<std::string>> projected;
  for (const auto& p : images) {
    std::vector<std::string> s;
    for (const auto& id : p) s.push_back(strip(id));
    projected.insert(s);
  }
  for (const auto& original : originals)
    REQUIRE(projected.count(original) == 1);
}

TEST_CASE("node ids order numerically when possible") {
  REQUIRE(node_id_less("2", "11"));
  REQUIRE_FALSE(node_id_less("11", "2"));
  REQUIRE(node_id_less("2", "alpha"));
  REQUIRE(node_id_less("alpha", "beta"));
}
