#pragma once

#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diftgame/errors.hpp"
#include "diftgame/graph.hpp"

namespace diftgame {

using json = nlohmann::ordered_json;

enum class GraphFormat { Json, Dot };

namespace detail {

inline std::string id_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
  fail(ErrorKind::Parse, "node id must be a string or integer");
}

inline RawGraph raw_from_json(const json& doc) {
  if (!doc.is_object()) fail(ErrorKind::Parse, "top level must be an object");
  RawGraph raw;
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    fail(ErrorKind::Parse, "missing \"nodes\" array");
  for (const auto& jn : doc["nodes"]) {
    RawGraph::Node node;
    if (jn.is_object()) {
      if (!jn.contains("id")) fail(ErrorKind::Parse, "node without id");
      node.id = id_from_json(jn["id"]);
      if (jn.contains("name")) node.name = jn["name"].get<std::string>();
      if (jn.contains("kind")) {
        auto k = node_kind_from_string(jn["kind"].get<std::string>());
        if (!k)
          fail(ErrorKind::Parse,
               "unknown node kind: " + jn["kind"].get<std::string>());
        node.kind = *k;
      }
      if (jn.contains("cost")) {
        if (!jn["cost"].is_number()) fail(ErrorKind::Parse, "cost must be a number");
        node.cost = jn["cost"].get<double>();
      }
    } else {
      node.id = id_from_json(jn);  // bare id shorthand
    }
    raw.nodes.push_back(std::move(node));
  }
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) fail(ErrorKind::Parse, "\"edges\" must be an array");
    for (const auto& je : doc["edges"]) {
      if (!je.is_array() || je.size() != 2)
        fail(ErrorKind::Parse, "each edge must be a [src, dst] pair");
      raw.edges.push_back({id_from_json(je[0]), id_from_json(je[1])});
    }
  }
  for (const char* key : {"entries", "destinations"}) {
    if (!doc.contains(key) || !doc[key].is_array())
      fail(ErrorKind::Parse, std::string("missing \"") + key + "\" array");
    for (const auto& j : doc[key]) {
      if (std::string(key) == "entries")
        raw.entries.push_back(id_from_json(j));
      else
        raw.destinations.push_back(id_from_json(j));
    }
  }
  if (doc.contains("benign")) {
    if (!doc["benign"].is_object())
      fail(ErrorKind::Parse, "\"benign\" must be an object");
    for (const auto& [id, row] : doc["benign"].items()) {
      if (!row.is_object())
        fail(ErrorKind::Parse, "benign row must map target -> probability");
      std::map<std::string, double> dist;
      for (const auto& [target, p] : row.items()) {
        if (!p.is_number()) fail(ErrorKind::Parse, "benign probability must be a number");
        dist[target] = p.get<double>();
      }
      raw.benign[id] = std::move(dist);
    }
  }
  return raw;
}

// Minimal DOT reader: "digraph name { ... }" with node statements carrying
// optional kind/cost/entry/dest attributes and "a -> b" edge statements.
inline RawGraph raw_from_dot(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (text[i] == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else {
      s.push_back(text[i]);
    }
  }
  auto brace = s.find('{');
  auto close = s.rfind('}');
  if (brace == std::string::npos || close == std::string::npos || close < brace)
    fail(ErrorKind::Parse, "DOT input has no { ... } body");
  if (s.find("digraph") == std::string::npos || s.find("digraph") > brace)
    fail(ErrorKind::Parse, "DOT input must declare a digraph");
  std::string body = s.substr(brace + 1, close - brace - 1);

  RawGraph raw;
  std::map<std::string, std::size_t> node_at;
  auto ensure_node = [&](const std::string& id) -> RawGraph::Node& {
    auto it = node_at.find(id);
    if (it == node_at.end()) {
      node_at[id] = raw.nodes.size();
      raw.nodes.push_back({id, "", NodeKind::Unknown, std::nullopt});
      return raw.nodes.back();
    }
    return raw.nodes[it->second];
  };

  std::size_t pos = 0;
  auto skip_ws = [&]() {
    while (pos < body.size() &&
           std::isspace(static_cast<unsigned char>(body[pos])))
      ++pos;
  };
  auto read_token = [&]() -> std::string {
    skip_ws();
    if (pos >= body.size()) return "";
    if (body[pos] == '"') {
      std::string out;
      ++pos;
      while (pos < body.size() && body[pos] != '"') out.push_back(body[pos++]);
      if (pos >= body.size()) fail(ErrorKind::Parse, "unterminated DOT string");
      ++pos;
      return out;
    }
    std::string out;
    while (pos < body.size()) {
      char c = body[pos];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
          c == '/' || c == '~' || c == '@' || c == '-') {
        out.push_back(c);
        ++pos;
      } else {
        break;
      }
    }
    return out;
  };

  while (true) {
    skip_ws();
    if (pos >= body.size()) break;
    if (body[pos] == ';') { ++pos; continue; }
    std::string id = read_token();
    if (id.empty()) fail(ErrorKind::Parse, "unexpected character in DOT body");
    skip_ws();
    if (pos + 1 < body.size() && body[pos] == '-' && body[pos + 1] == '>') {
      pos += 2;
      std::string to = read_token();
      if (to.empty()) fail(ErrorKind::Parse, "dangling edge in DOT body");
      ensure_node(id);
      ensure_node(to);
      raw.edges.push_back({id, to});
      skip_ws();
      if (pos < body.size() && body[pos] == '[') {  // edge attrs ignored
        while (pos < body.size() && body[pos] != ']') ++pos;
        if (pos < body.size()) ++pos;
      }
      continue;
    }
    auto& node = ensure_node(id);
    skip_ws();
    if (pos < body.size() && body[pos] == '[') {
      ++pos;
      while (true) {
        std::string key = read_token();
        if (key.empty()) break;
        skip_ws();
        if (pos < body.size() && body[pos] == '=') {
          ++pos;
          std::string value = read_token();
          if (key == "cost") {
            try {
              node.cost = std::stod(value);
            } catch (const std::exception&) {
              fail(ErrorKind::Parse, "bad DOT cost value: " + value);
            }
          } else if (key == "kind") {
            auto k = node_kind_from_string(value);
            if (!k) fail(ErrorKind::Parse, "unknown DOT kind: " + value);
            node.kind = *k;
          } else if (key == "entry") {
            if (value == "true" || value == "1") raw.entries.push_back(id);
          } else if (key == "dest") {
            if (value == "true" || value == "1") raw.destinations.push_back(id);
          } else if (key == "name" || key == "label") {
            node.name = value;
          }
        }
        skip_ws();
        if (pos < body.size() && (body[pos] == ',' || body[pos] == ';')) ++pos;
        skip_ws();
        if (pos < body.size() && body[pos] == ']') { ++pos; break; }
        if (pos >= body.size()) fail(ErrorKind::Parse, "unterminated DOT attribute list");
      }
    }
  }
  return raw;
}

}  // namespace detail

inline InfoFlowGraph parse_ifg(std::istream& in, GraphFormat format) {
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  RawGraph raw;
  if (format == GraphFormat::Json) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::Parse, "malformed JSON");
    raw = detail::raw_from_json(doc);
  } else {
    raw = detail::raw_from_dot(text);
  }
  return build_graph(raw);
}

inline InfoFlowGraph parse_ifg(const std::string& text, GraphFormat format) {
  std::istringstream in(text);
  return parse_ifg(in, format);
}

inline json graph_to_json(const InfoFlowGraph& g) {
  json doc;
  doc["nodes"] = json::array();
  for (int v = 0; v < g.size(); ++v) {
    json jn;
    jn["id"] = g.ids[v];
    if (!g.meta[v].name.empty()) jn["name"] = g.meta[v].name;
    jn["kind"] = to_string(g.meta[v].kind);
    jn["cost"] = g.cost[v];
    doc["nodes"].push_back(jn);
  }
  doc["edges"] = json::array();
  for (int v = 0; v < g.size(); ++v)
    for (int u : g.adj[v]) doc["edges"].push_back(json::array({g.ids[v], g.ids[u]}));
  doc["entries"] = json::array();
  for (int v : g.entries) doc["entries"].push_back(g.ids[v]);
  doc["destinations"] = json::array();
  for (int v : g.dests) doc["destinations"].push_back(g.ids[v]);
  doc["benign"] = json::object();
  for (int v = 0; v < g.size(); ++v) {
    json row;
    for (auto [u, p] : g.benign[v].moves) row[g.ids[u]] = p;
    row["drop"] = g.benign[v].drop;
    doc["benign"][g.ids[v]] = row;
  }
  return doc;
}

inline std::string serialize_graph(const InfoFlowGraph& g) {
  return graph_to_json(g).dump(2) + "\n";
}

}  // namespace diftgame
