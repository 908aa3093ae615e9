#pragma once

// Spatial knowledge graph: rooms as nodes, door/passage adjacencies as edges,
// and a symmetric {0,1} adjacency matrix kept in agreement with the edge list.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace floornav {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b);

/// Axis-aligned pixel rectangle [x1, y1, x2, y2].
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  bool valid() const { return x1 < x2 && y1 < y2; }
  Point center() const { return {(x1 + x2) / 2.0, (y1 + y2) / 2.0}; }
  double short_side() const;
  bool contains(const Point& p) const { return p.x >= x1 && p.x <= x2 && p.y >= y1 && p.y <= y2; }
  bool operator==(const BBox&) const = default;
};

enum class RoomKind { room, hallway, elevator, stairs, other };

std::string_view to_string(RoomKind k);
std::optional<RoomKind> parse_room_kind(std::string_view s);

/// Width x height in meters.
struct Dimensions {
  double width_m = 0.0;
  double height_m = 0.0;
  bool operator==(const Dimensions&) const = default;
};

struct RoomNode {
  std::string name;
  RoomKind kind = RoomKind::room;
  Point centroid;
  std::optional<Dimensions> dimensions;
  std::optional<double> ocr_confidence;
  std::optional<double> size_m2;
  /// Set when the centroid was placed on a fallback grid instead of an OCR label.
  bool synthetic_centroid = false;
  /// Operator annotation, e.g. "smooth tile floor".
  std::optional<std::string> surface;

  bool operator==(const RoomNode&) const = default;
};

/// "Door_D<n>" check.
bool is_door_id(std::string_view s);

struct GraphEdge {
  std::string from;
  std::string to;
  /// Door id when door-mediated; empty for a passage.
  std::optional<std::string> door_id;
  std::optional<BBox> door_bbox;
  double traversal_cost = 1.0;

  bool is_door() const { return door_id.has_value(); }
  /// "Door_D3" or "passage".
  std::string via() const { return door_id.value_or("passage"); }
  bool operator==(const GraphEdge&) const = default;
};

using AdjacencyMatrix = std::vector<std::vector<int>>;

/// Immutable graph value. The two-argument constructor derives the adjacency
/// matrix from the edge list; the three-argument one stores the matrix as
/// given so malformed inputs can still be validated.
class FloorGraph {
 public:
  FloorGraph() = default;
  FloorGraph(std::vector<RoomNode> nodes, std::vector<GraphEdge> edges);
  FloorGraph(std::vector<RoomNode> nodes, std::vector<GraphEdge> edges, AdjacencyMatrix adjacency);

  const std::vector<RoomNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const AdjacencyMatrix& adjacency() const { return adjacency_; }
  std::size_t size() const { return nodes_.size(); }

  /// Case-insensitive, whitespace-trimmed lookup.
  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Like index_of but throws UnknownRoomError.
  std::size_t require(std::string_view name) const;
  const RoomNode& node(std::string_view name) const { return nodes_[require(name)]; }

  bool adjacent(std::string_view a, std::string_view b) const;
  /// Edge count per node, taken from the edge list.
  std::size_t degree(std::size_t index) const;
  /// First edge in list order joining a and b, either direction.
  const GraphEdge* edge_between(std::string_view a, std::string_view b) const;

  bool operator==(const FloorGraph&) const = default;

 private:
  std::vector<RoomNode> nodes_;
  std::vector<GraphEdge> edges_;
  AdjacencyMatrix adjacency_;
};

struct Violation {
  std::string rule_id;
  std::string message;
  std::string element;
  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  bool passed = true;
  std::vector<Violation> violations;

  bool has(std::string_view rule_id) const;
};

namespace rule {
inline constexpr std::string_view length_consistency = "length-consistency";
inline constexpr std::string_view symmetry = "symmetry";
inline constexpr std::string_view value_domain = "value-domain";
inline constexpr std::string_view min_degree = "min-degree-1";
inline constexpr std::string_view edge_matrix_agreement = "edge-matrix-agreement";
inline constexpr std::string_view node_invariant = "node-invariant";
inline constexpr std::string_view edge_invariant = "edge-invariant";
}  // namespace rule

ValidationReport validate_graph(const FloorGraph& g);

/// Throws UnknownRoomError when an edge endpoint is not a node.
AdjacencyMatrix rebuild_adjacency(const std::vector<RoomNode>& nodes, const std::vector<GraphEdge>& edges);

/// Hop-count BFS, neighbors expanded in ascending node index. Returns
/// canonical node names, or nullopt when s and d are disconnected.
std::optional<std::vector<std::string>> bfs_shortest_path(const FloorGraph& g, std::string_view s,
                                                          std::string_view d);

/// Components ordered by their lowest node index; members in index order.
std::vector<std::vector<std::string>> connected_components(const FloorGraph& g);

// Graph document: nodes_elements / adjacency_matrix / edges / rooms_info.
nlohmann::json graph_to_json(const FloorGraph& g);
FloorGraph graph_from_json(const nlohmann::json& j);
nlohmann::json bbox_to_json(const BBox& b);
std::optional<BBox> bbox_from_json(const nlohmann::json& j);

}  // namespace floornav
