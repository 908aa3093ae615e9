#include <cmath>

#include "floornav/errors.hpp"
#include "floornav/graph.hpp"
#include "floornav/text.hpp"

namespace floornav {

using nlohmann::json;

namespace {

json number_or_int(double v) {
  if (std::floor(v) == v && std::fabs(v) < 1e15) return static_cast<long long>(v);
  return v;
}

}  // namespace

json bbox_to_json(const BBox& b) {
  return json::array({number_or_int(b.x1), number_or_int(b.y1), number_or_int(b.x2), number_or_int(b.y2)});
}

std::optional<BBox> bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) return std::nullopt;
  for (const auto& v : j) {
    if (!v.is_number()) return std::nullopt;
  }
  return BBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json graph_to_json(const FloorGraph& g) {
  json nodes = json::array();
  json rooms_info = json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const RoomNode& n = g.nodes()[i];
    json node = {{"name", n.name},
                 {"type", std::string(to_string(n.kind))},
                 {"centroid", json::array({n.centroid.x, n.centroid.y})}};
    if (n.synthetic_centroid) node["synthetic_centroid"] = true;
    if (n.dimensions) node["dimensions"] = json::array({n.dimensions->width_m, n.dimensions->height_m});
    if (n.ocr_confidence) node["ocr_confidence"] = *n.ocr_confidence;
    if (n.size_m2) node["size_m2"] = *n.size_m2;
    if (n.surface) node["surface"] = *n.surface;
    nodes.push_back(std::move(node));

    json doors = json::array();
    json connected = json::array();
    const std::string key = text::name_key(n.name);
    for (const auto& e : g.edges()) {
      const bool from_here = text::name_key(e.from) == key;
      if (!from_here && text::name_key(e.to) != key) continue;
      if (e.door_id) doors.push_back(*e.door_id);
      const std::string& other = from_here ? e.to : e.from;
      if (std::find(connected.begin(), connected.end(), other) == connected.end()) connected.push_back(other);
    }
    json info = {{"name", n.name}, {"doors", doors}, {"connected_rooms", connected}};
    if (n.size_m2) info["size"] = text::format_number(*n.size_m2) + " m2";
    rooms_info.push_back(std::move(info));
  }

  json edges = json::array();
  for (const auto& e : g.edges()) {
    json edge = {{"from", e.from}, {"to", e.to}, {"via", e.via()}, {"traversal_cost", e.traversal_cost}};
    if (e.door_bbox) edge["door_bbox"] = bbox_to_json(*e.door_bbox);
    edges.push_back(std::move(edge));
  }

  return {{"nodes_elements", nodes},
          {"adjacency_matrix", g.adjacency()},
          {"edges", edges},
          {"rooms_info", rooms_info}};
}

FloorGraph graph_from_json(const json& j) {
  try {
    std::vector<RoomNode> nodes;
    for (const auto& jn : j.at("nodes_elements")) {
      RoomNode n;
      n.name = jn.at("name").get<std::string>();
      if (jn.contains("type")) {
        n.kind = parse_room_kind(jn["type"].get<std::string>()).value_or(RoomKind::other);
      }
      if (jn.contains("centroid")) {
        n.centroid = {jn["centroid"].at(0).get<double>(), jn["centroid"].at(1).get<double>()};
      }
      n.synthetic_centroid = jn.value("synthetic_centroid", false);
      if (jn.contains("dimensions")) {
        n.dimensions = Dimensions{jn["dimensions"].at(0).get<double>(), jn["dimensions"].at(1).get<double>()};
      }
      if (jn.contains("ocr_confidence")) n.ocr_confidence = jn["ocr_confidence"].get<double>();
      if (jn.contains("size_m2")) n.size_m2 = jn["size_m2"].get<double>();
      if (jn.contains("surface")) n.surface = jn["surface"].get<std::string>();
      nodes.push_back(std::move(n));
    }

    std::vector<GraphEdge> edges;
    for (const auto& je : j.at("edges")) {
      GraphEdge e;
      e.from = je.at("from").get<std::string>();
      e.to = je.at("to").get<std::string>();
      const std::string via = je.value("via", std::string("passage"));
      if (via != "passage") e.door_id = via;
      if (je.contains("door_bbox") && !je["door_bbox"].is_null()) {
        e.door_bbox = bbox_from_json(je["door_bbox"]);
        if (!e.door_bbox) throw IngestError("edge " + e.from + " -- " + e.to + ": door_bbox must be [x1,y1,x2,y2]");
      }
      e.traversal_cost = je.value("traversal_cost", 1.0);
      edges.push_back(std::move(e));
    }

    if (j.contains("adjacency_matrix")) {
      return FloorGraph(std::move(nodes), std::move(edges), j["adjacency_matrix"].get<AdjacencyMatrix>());
    }
    return FloorGraph(std::move(nodes), std::move(edges));
  } catch (const json::exception& e) {
    throw IngestError(std::string("malformed graph document: ") + e.what());
  }
}

}  // namespace floornav
