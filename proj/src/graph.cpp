#include "floornav/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <regex>
#include <sstream>

#include "floornav/errors.hpp"
#include "floornav/text.hpp"

namespace floornav {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double BBox::short_side() const { return std::min(x2 - x1, y2 - y1); }

std::string_view to_string(RoomKind k) {
  switch (k) {
    case RoomKind::room: return "room";
    case RoomKind::hallway: return "hallway";
    case RoomKind::elevator: return "elevator";
    case RoomKind::stairs: return "stairs";
    case RoomKind::other: return "other";
  }
  return "other";
}

std::optional<RoomKind> parse_room_kind(std::string_view s) {
  const std::string k = text::name_key(s);
  if (k == "room") return RoomKind::room;
  if (k == "hallway") return RoomKind::hallway;
  if (k == "elevator") return RoomKind::elevator;
  if (k == "stairs") return RoomKind::stairs;
  if (k == "other") return RoomKind::other;
  return std::nullopt;
}

bool is_door_id(std::string_view s) {
  static const std::regex re("^Door_D[0-9]+$");
  return std::regex_match(s.begin(), s.end(), re);
}

FloorGraph::FloorGraph(std::vector<RoomNode> nodes, std::vector<GraphEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  adjacency_ = rebuild_adjacency(nodes_, edges_);
}

FloorGraph::FloorGraph(std::vector<RoomNode> nodes, std::vector<GraphEdge> edges, AdjacencyMatrix adjacency)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), adjacency_(std::move(adjacency)) {}

std::optional<std::size_t> FloorGraph::index_of(std::string_view name) const {
  const std::string key = text::name_key(name);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (text::name_key(nodes_[i].name) == key) return i;
  }
  return std::nullopt;
}

std::size_t FloorGraph::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw UnknownRoomError(std::string(name));
}

bool FloorGraph::adjacent(std::string_view a, std::string_view b) const {
  const auto i = index_of(a);
  const auto j = index_of(b);
  if (!i || !j || *i >= adjacency_.size() || *j >= adjacency_[*i].size()) return false;
  return adjacency_[*i][*j] == 1;
}

std::size_t FloorGraph::degree(std::size_t index) const {
  const std::string key = text::name_key(nodes_.at(index).name);
  std::size_t n = 0;
  for (const auto& e : edges_) {
    if (text::name_key(e.from) == key || text::name_key(e.to) == key) ++n;
  }
  return n;
}

const GraphEdge* FloorGraph::edge_between(std::string_view a, std::string_view b) const {
  const std::string ka = text::name_key(a);
  const std::string kb = text::name_key(b);
  for (const auto& e : edges_) {
    const std::string f = text::name_key(e.from);
    const std::string t = text::name_key(e.to);
    if ((f == ka && t == kb) || (f == kb && t == ka)) return &e;
  }
  return nullptr;
}

bool ValidationReport::has(std::string_view rule_id) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.rule_id == rule_id; });
}

namespace {

std::string edge_label(const GraphEdge& e) { return e.from + " -- " + e.to + " (" + e.via() + ")"; }

}  // namespace

ValidationReport validate_graph(const FloorGraph& g) {
  ValidationReport report;
  auto add = [&](std::string_view rule_id, std::string message, std::string element) {
    report.violations.push_back({std::string(rule_id), std::move(message), std::move(element)});
  };

  const auto& nodes = g.nodes();
  const auto& a = g.adjacency();
  const std::size_t n = nodes.size();

  std::vector<std::string> seen;
  for (const auto& node : nodes) {
    const std::string key = text::name_key(node.name);
    if (key.empty()) add(rule::node_invariant, "room name is empty", node.name);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      add(rule::node_invariant, "duplicate room name", node.name);
    }
    seen.push_back(key);
    if (!std::isfinite(node.centroid.x) || !std::isfinite(node.centroid.y) || node.centroid.x < 0 ||
        node.centroid.y < 0) {
      add(rule::node_invariant, "centroid must be finite and non-negative", node.name);
    }
    if (node.ocr_confidence && (*node.ocr_confidence < 0.0 || *node.ocr_confidence > 1.0)) {
      add(rule::node_invariant, "ocr_confidence outside [0,1]", node.name);
    }
  }

  bool square = a.size() == n;
  for (const auto& row : a) square = square && row.size() == n;
  if (!square) {
    std::ostringstream msg;
    msg << "len(nodes)=" << n << " but matrix has " << a.size() << " rows";
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != n) {
        msg << "; row " << i << " has length " << a[i].size();
        break;
      }
    }
    add(rule::length_consistency, msg.str(), "adjacency_matrix");
  }

  if (square) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const int v = a[i][j];
        if (v != 0 && v != 1) {
          add(rule::value_domain, "matrix value " + std::to_string(v) + " not in {0,1}",
              "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
        } else if (i == j && v != 0) {
          add(rule::value_domain, "diagonal must be 0", nodes[i].name);
        }
        if (j > i && a[i][j] != a[j][i]) {
          add(rule::symmetry, "matrix[" + std::to_string(i) + "][" + std::to_string(j) + "] != matrix[" +
                                  std::to_string(j) + "][" + std::to_string(i) + "]",
              nodes[i].name + " / " + nodes[j].name);
        }
      }
    }
  }

  // Edge-level invariants and edge/matrix agreement.
  std::vector<std::vector<int>> linked(n, std::vector<int>(n, 0));
  for (const auto& e : g.edges()) {
    const auto i = g.index_of(e.from);
    const auto j = g.index_of(e.to);
    if (!i || !j) {
      add(rule::edge_matrix_agreement, "edge references a room that is not a node", edge_label(e));
      continue;
    }
    if (*i == *j) {
      add(rule::edge_invariant, "edge endpoints must differ", edge_label(e));
      continue;
    }
    if (e.door_id && !is_door_id(*e.door_id)) {
      add(rule::edge_invariant, "door id must look like Door_D<n>", edge_label(e));
    }
    if (e.door_bbox && !e.door_bbox->valid()) {
      add(rule::edge_invariant, "door bbox must satisfy x1<x2 and y1<y2", edge_label(e));
    }
    if (!(e.traversal_cost >= 0.0)) add(rule::edge_invariant, "traversal cost must be >= 0", edge_label(e));
    linked[*i][*j] = linked[*j][*i] = 1;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (g.degree(i) == 0) add(rule::min_degree, "EVERY NODE MUST HAVE >= 1 EDGE", nodes[i].name);
  }

  if (square) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool in_matrix = a[i][j] == 1 || a[j][i] == 1;
        if (in_matrix != (linked[i][j] == 1)) {
          add(rule::edge_matrix_agreement,
              in_matrix ? "matrix marks adjacency with no edge" : "edge missing from matrix",
              nodes[i].name + " / " + nodes[j].name);
        }
      }
    }
  }

  report.passed = report.violations.empty();
  return report;
}

AdjacencyMatrix rebuild_adjacency(const std::vector<RoomNode>& nodes, const std::vector<GraphEdge>& edges) {
  const std::size_t n = nodes.size();
  AdjacencyMatrix a(n, std::vector<int>(n, 0));
  auto find = [&](const GraphEdge& e, const std::string& name) {
    const std::string key = text::name_key(name);
    for (std::size_t i = 0; i < n; ++i) {
      if (text::name_key(nodes[i].name) == key) return i;
    }
    throw UnknownRoomError(name, "in edge " + edge_label(e));
  };
  for (const auto& e : edges) {
    const std::size_t i = find(e, e.from);
    const std::size_t j = find(e, e.to);
    if (i == j) continue;
    a[i][j] = a[j][i] = 1;
  }
  return a;
}

std::optional<std::vector<std::string>> bfs_shortest_path(const FloorGraph& g, std::string_view s,
                                                          std::string_view d) {
  const std::size_t src = g.require(s);
  const std::size_t dst = g.require(d);
  const auto& a = g.adjacency();
  const std::size_t n = g.size();

  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, none);
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{src};
  seen[src] = true;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (u == dst) break;
    for (std::size_t v = 0; v < n; ++v) {
      if (a[u][v] == 1 && !seen[v]) {
        seen[v] = true;
        parent[v] = u;
        queue.push_back(v);
      }
    }
  }
  if (!seen[dst]) return std::nullopt;

  std::vector<std::string> path;
  for (std::size_t v = dst; v != none; v = parent[v]) path.push_back(g.nodes()[v].name);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::vector<std::string>> connected_components(const FloorGraph& g) {
  const std::size_t n = g.size();
  const auto& a = g.adjacency();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::string>> out;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] != -1) continue;
    const int id = static_cast<int>(out.size());
    std::vector<std::size_t> members;
    std::deque<std::size_t> queue{start};
    comp[start] = id;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      members.push_back(u);
      for (std::size_t v = 0; v < n; ++v) {
        if (a[u][v] == 1 && comp[v] == -1) {
          comp[v] = id;
          queue.push_back(v);
        }
      }
    }
    std::sort(members.begin(), members.end());
    std::vector<std::string> names;
    for (std::size_t m : members) names.push_back(g.nodes()[m].name);
    out.push_back(std::move(names));
  }
  return out;
}

}  // namespace floornav
