#include "floornav/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "floornav/text.hpp"

namespace floornav {

using nlohmann::json;

namespace {

std::string fmt_point(const Point& p) {
  return "(" + text::format_number(p.x) + ", " + text::format_number(p.y) + ")";
}

std::string fmt_bbox(const BBox& b) {
  return "[" + text::format_number(b.x1) + ", " + text::format_number(b.y1) + ", " + text::format_number(b.x2) +
         ", " + text::format_number(b.y2) + "]";
}

RoomKind infer_kind(std::string_view name) {
  const std::string k = text::name_key(name);
  auto has = [&](std::string_view w) { return k.find(w) != std::string::npos; };
  if (has("hallway") || has("corridor") || has("couloir")) return RoomKind::hallway;
  if (has("elevator") || has("lift") || has("ascenseur")) return RoomKind::elevator;
  if (has("stair") || has("escalier")) return RoomKind::stairs;
  return RoomKind::room;
}

std::optional<double> parse_area(const std::string& s) {
  static const std::regex re(R"(([0-9]+(?:\.[0-9]+)?)\s*m(?:2|²))");
  std::smatch m;
  if (std::regex_search(s, m, re)) return std::stod(m[1].str());
  static const std::regex bare(R"(^\s*([0-9]+(?:\.[0-9]+)?)\s*$)");
  if (std::regex_match(s, m, bare)) return std::stod(m[1].str());
  return std::nullopt;
}

std::optional<Dimensions> parse_dimensions(const std::string& s) {
  static const std::regex re(R"(([0-9]+(?:\.[0-9]+)?)\s*m?\s*[xX×]\s*([0-9]+(?:\.[0-9]+)?)\s*m\b)");
  std::smatch m;
  if (std::regex_search(s, m, re)) return Dimensions{std::stod(m[1].str()), std::stod(m[2].str())};
  return std::nullopt;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RawParse schema

json raw_parse_to_json(const RawParse& raw) {
  json nodes = json::array();
  for (std::size_t i = 0; i < raw.nodes_elements.size(); ++i) {
    json n = {{"name", raw.nodes_elements[i]}};
    if (i < raw.node_kinds.size() && raw.node_kinds[i]) n["type"] = std::string(to_string(*raw.node_kinds[i]));
    nodes.push_back(std::move(n));
  }
  json edges = json::array();
  for (const auto& e : raw.edges) {
    json je = {{"from", e.from}, {"to", e.to}, {"via", e.via}};
    if (e.door_bbox) je["door_bbox"] = bbox_to_json(*e.door_bbox);
    edges.push_back(std::move(je));
  }
  json info = json::array();
  for (const auto& r : raw.rooms_info) {
    json ji = {{"name", r.name}, {"doors", r.doors}, {"connected_rooms", r.connected_rooms}};
    if (r.size) ji["size"] = *r.size;
    info.push_back(std::move(ji));
  }
  return {{"approach", raw.approach},
          {"nodes_elements", nodes},
          {"adjacency_matrix", raw.adjacency_matrix},
          {"edges", edges},
          {"rooms_info", info}};
}

std::vector<std::string> check_raw_parse(const RawParse& raw) {
  std::vector<std::string> out;
  const std::size_t n = raw.nodes_elements.size();
  const auto& m = raw.adjacency_matrix;

  bool square = m.size() == n;
  for (const auto& row : m) square = square && row.size() == n;
  if (!square) {
    std::ostringstream ss;
    ss << "VALIDATION (1) len(nodes)==len(matrix)==len(row) violated: " << n << " nodes, " << m.size()
       << " matrix rows";
    out.push_back(ss.str());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (m[i][j] != 0 && m[i][j] != 1) {
          out.push_back("VALIDATION (3) values in {0,1}: matrix[" + std::to_string(i) + "][" + std::to_string(j) +
                        "]=" + std::to_string(m[i][j]));
        } else if (i == j && m[i][j] != 0) {
          out.push_back("VALIDATION (3) diagonal=0: matrix[" + std::to_string(i) + "][" + std::to_string(i) +
                        "]=1 (" + raw.nodes_elements[i] + ")");
        }
        if (j > i && m[i][j] != m[j][i]) {
          out.push_back("VALIDATION (2) symmetric: matrix[" + std::to_string(i) + "][" + std::to_string(j) +
                        "]=" + std::to_string(m[i][j]) + " but matrix[" + std::to_string(j) + "][" +
                        std::to_string(i) + "]=" + std::to_string(m[j][i]) + " (" + raw.nodes_elements[i] +
                        " / " + raw.nodes_elements[j] + ")");
        }
      }
    }
  }

  std::set<std::string> names;
  for (const auto& name : raw.nodes_elements) {
    const std::string key = text::name_key(name);
    if (key.empty()) out.push_back("node with empty name");
    else if (!names.insert(key).second) {
      out.push_back("duplicate node name \"" + name + "\": number distinct areas sharing a label");
    }
  }

  std::vector<int> degree(n, 0);
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    const std::string key = text::name_key(name);
    for (std::size_t i = 0; i < n; ++i) {
      if (text::name_key(raw.nodes_elements[i]) == key) return i;
    }
    return std::nullopt;
  };
  for (const auto& e : raw.edges) {
    const auto i = find(e.from);
    const auto j = find(e.to);
    if (!i || !j) {
      out.push_back("edge " + e.from + " -- " + e.to + " references a room missing from nodes_elements");
      continue;
    }
    if (*i == *j) {
      out.push_back("edge " + e.from + " -- " + e.to + " links a room to itself");
      continue;
    }
    ++degree[*i];
    ++degree[*j];
  }
  if (square) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) degree[i] += (i != j && m[i][j] == 1) ? 1 : 0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (degree[i] == 0) {
      out.push_back("VALIDATION (4) EVERY NODE MUST HAVE >= 1 EDGE: \"" + raw.nodes_elements[i] + "\" has none");
    }
  }
  return out;
}

RawParse raw_parse_from_json(const json& j) {
  RawParse raw;
  std::vector<std::string> diag;
  if (!j.is_object()) throw ParseError("parser output is not a JSON object", {"expected the Parser JSON schema"});
  try {
    raw.approach = j.value("approach", std::string());
    for (const auto& n : j.at("nodes_elements")) {
      if (n.is_string()) {
        raw.nodes_elements.push_back(n.get<std::string>());
        raw.node_kinds.emplace_back();
      } else {
        raw.nodes_elements.push_back(n.at("name").get<std::string>());
        std::optional<RoomKind> kind;
        if (n.contains("type") && n["type"].is_string()) kind = parse_room_kind(n["type"].get<std::string>());
        raw.node_kinds.push_back(kind);
      }
    }
    for (const auto& row : j.at("adjacency_matrix")) {
      std::vector<int> r;
      for (const auto& v : row) {
        if (v.is_boolean()) r.push_back(v.get<bool>() ? 1 : 0);
        else if (v.is_number_integer()) r.push_back(v.get<int>());
        else if (v.is_number() && std::floor(v.get<double>()) == v.get<double>()) r.push_back(static_cast<int>(v.get<double>()));
        else r.push_back(-1);
      }
      raw.adjacency_matrix.push_back(std::move(r));
    }
    for (const auto& e : j.value("edges", json::array())) {
      RawEdge re;
      re.from = e.at("from").get<std::string>();
      re.to = e.at("to").get<std::string>();
      if (e.contains("via") && e["via"].is_string()) re.via = text::trim(e["via"].get<std::string>());
      if (e.contains("door_bbox")) {
        if (auto b = bbox_from_json(e["door_bbox"]); b && b->valid()) re.door_bbox = b;
      }
      raw.edges.push_back(std::move(re));
    }
    for (const auto& r : j.value("rooms_info", json::array())) {
      RawRoomInfo info;
      info.name = r.at("name").get<std::string>();
      if (r.contains("size")) {
        if (r["size"].is_string()) info.size = r["size"].get<std::string>();
        else if (r["size"].is_number()) info.size = text::format_number(r["size"].get<double>()) + " m2";
      }
      for (const auto& d : r.value("doors", json::array())) {
        if (d.is_string()) info.doors.push_back(d.get<std::string>());
      }
      for (const auto& c : r.value("connected_rooms", json::array())) {
        if (c.is_string()) info.connected_rooms.push_back(c.get<std::string>());
      }
      raw.rooms_info.push_back(std::move(info));
    }
  } catch (const json::exception& e) {
    throw ParseError("parser output does not follow the JSON schema", {std::string("schema: ") + e.what()});
  }
  diag = check_raw_parse(raw);
  if (!diag.empty()) throw ParseError("parser output failed VALIDATION", diag);
  return raw;
}

// ---------------------------------------------------------------------------
// Agent 1

std::string render_detection_context(const DetectionSet& dets) {
  if (dets.detections.empty() && dets.labels.empty()) return "";
  std::ostringstream ss;
  if (!dets.detections.empty()) {
    ss << "DETECTIONS (object detector, pixel coordinates):\n";
    for (const auto& d : dets.detections) {
      ss << "- " << d.id << ": " << d.class_name << " conf " << text::format_number(d.confidence) << " bbox "
         << fmt_bbox(d.bbox) << " center " << fmt_point(d.center) << "\n";
    }
  }
  if (!dets.labels.empty()) {
    ss << "ROOM LABELS (OCR, pixel coordinates):\n";
    for (const auto& l : dets.labels) ss << "- " << l.name << " at " << fmt_point(l.position) << "\n";
  }
  return ss.str();
}

RawParse parse_floorplan(llm::Gateway& gateway, const llm::PromptLibrary& prompts, const std::string& image_ref,
                         const DetectionSet& dets, const std::optional<std::string>& feedback) {
  llm::CompletionRequest req;
  req.template_id = llm::TemplateId::parser;
  req.bindings["detection_context"] = render_detection_context(dets);
  req.prompt = llm::render_prompt(prompts.get(llm::TemplateId::parser), req.bindings);
  if (feedback) {
    req.bindings["feedback"] = *feedback;
    req.prompt += "\n\n" + *feedback;
  }
  if (!image_ref.empty()) req.image_ref = image_ref;

  const std::string text = gateway.complete(req);
  json payload;
  try {
    payload = llm::extract_structured_payload(text);
  } catch (const llm::PayloadError& e) {
    throw ParseError(e.what(), {std::string(e.what()) + " near: " + e.excerpt()});
  }
  return raw_parse_from_json(payload);
}

std::optional<std::pair<std::size_t, std::size_t>> nearest_two_rooms(const std::vector<RoomNode>& nodes,
                                                                      const Point& p) {
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].synthetic_centroid) continue;
    ranked.emplace_back(distance(nodes[i].centroid, p), i);
  }
  if (ranked.size() < 2) return std::nullopt;
  std::partial_sort(ranked.begin(), ranked.begin() + 2, ranked.end());
  return std::pair{ranked[0].second, ranked[1].second};
}

RawParse heuristic_parse(const DetectionSet& dets) {
  RawParse raw;
  raw.approach = "detection-only heuristic: rooms from OCR labels, doors link their two nearest rooms";
  std::vector<RoomNode> nodes;
  for (const auto& l : dets.labels) {
    raw.nodes_elements.push_back(l.name);
    raw.node_kinds.emplace_back();
    RoomNode n;
    n.name = l.name;
    n.centroid = l.position;
    nodes.push_back(std::move(n));
  }
  const std::size_t n = nodes.size();
  raw.adjacency_matrix.assign(n, std::vector<int>(n, 0));
  for (const Detection* d : dets.doors()) {
    const auto pair = nearest_two_rooms(nodes, d->center);
    if (!pair) continue;
    const auto [a, b] = std::minmax(pair->first, pair->second);
    raw.edges.push_back({nodes[a].name, nodes[b].name, d->id, d->bbox});
    raw.adjacency_matrix[a][b] = raw.adjacency_matrix[b][a] = 1;
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Agent 2

BuildResult build_graph(const RawParse& raw, const DetectionSet& dets) {
  BuildResult out;
  std::vector<RoomNode> nodes;
  std::size_t synthetic = 0;
  for (std::size_t i = 0; i < raw.nodes_elements.size(); ++i) {
    RoomNode n;
    n.name = text::trim(raw.nodes_elements[i]);
    n.kind = (i < raw.node_kinds.size() && raw.node_kinds[i]) ? *raw.node_kinds[i] : infer_kind(n.name);
    if (const ResolvedLabel* l = dets.label_for(n.name)) {
      n.centroid = l->position;
      n.ocr_confidence = l->confidence;
    } else {
      n.centroid = {50.0 + 100.0 * static_cast<double>(synthetic % 4), 50.0 + 100.0 * static_cast<double>(synthetic / 4)};
      n.synthetic_centroid = true;
      ++synthetic;
      out.notes.push_back("room \"" + n.name + "\" has no OCR label; placed on a synthetic grid centroid");
    }
    for (const auto& info : raw.rooms_info) {
      if (!text::names_equal(info.name, n.name) || !info.size) continue;
      n.size_m2 = parse_area(*info.size);
      n.dimensions = parse_dimensions(*info.size);
    }
    nodes.push_back(std::move(n));
  }

  auto index = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (text::names_equal(nodes[i].name, name)) return i;
    }
    return std::nullopt;
  };

  std::vector<GraphEdge> edges;
  std::set<std::pair<std::size_t, std::size_t>> linked;
  const auto doors = dets.doors();
  for (const Detection* d : doors) {
    const auto pair = nearest_two_rooms(nodes, d->center);
    if (!pair) {
      out.unassociated_doors.push_back(d->id);
      continue;
    }
    const auto [a, b] = std::minmax(pair->first, pair->second);
    edges.push_back({nodes[a].name, nodes[b].name, d->id, d->bbox, 1.0});
    linked.insert({a, b});
  }
  if (!out.unassociated_doors.empty()) {
    out.notes.push_back("fewer than two rooms with centroids; doors left unassociated: " +
                        join(out.unassociated_doors, ", "));
  }

  const bool grounded = !doors.empty();
  auto preserve = [&](std::size_t i, std::size_t j, const RawEdge* source) {
    if (i == j) return;
    const auto [a, b] = std::minmax(i, j);
    if (!linked.insert({a, b}).second) return;
    GraphEdge e{nodes[a].name, nodes[b].name, std::nullopt, std::nullopt, 1.0};
    if (!grounded && source && is_door_id(source->via)) {
      e.door_id = source->via;
      e.door_bbox = source->door_bbox;
    }
    edges.push_back(std::move(e));
  };
  for (const auto& re : raw.edges) {
    const auto i = index(re.from);
    const auto j = index(re.to);
    if (!i || !j) {
      out.notes.push_back("dropped raw edge " + re.from + " -- " + re.to + ": unknown room");
      continue;
    }
    preserve(*i, *j, &re);
  }
  const auto& m = raw.adjacency_matrix;
  for (std::size_t i = 0; i < m.size() && i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < m[i].size() && j < nodes.size(); ++j) {
      if (m[i][j] == 1) preserve(i, j, nullptr);
    }
  }

  out.graph = FloorGraph(std::move(nodes), std::move(edges));
  return out;
}

// ---------------------------------------------------------------------------
// Agent 3

std::string_view to_string(CriticCheck c) {
  switch (c) {
    case CriticCheck::connectivity: return "connectivity";
    case CriticCheck::door_edge_consistency: return "door_edge_consistency";
    case CriticCheck::spatial_coherence: return "spatial_coherence";
    case CriticCheck::symmetry: return "symmetry";
    case CriticCheck::isolated_nodes: return "isolated_nodes";
  }
  return "connectivity";
}

bool CriticReport::failed(CriticCheck c) const {
  return std::find(failed_checks.begin(), failed_checks.end(), c) != failed_checks.end();
}

json critic_report_to_json(const CriticReport& r) {
  json failed = json::array();
  for (auto c : r.failed_checks) failed.push_back(std::string(to_string(c)));
  json flagged = json::array();
  for (const auto& [a, b] : r.flagged_edges) flagged.push_back(json::array({a, b}));
  return {{"passed", r.passed},           {"issues", r.issues},
          {"suggested_fixes", r.suggested_fixes}, {"failed_checks", failed},
          {"flagged_edges", flagged},     {"advisory_issues", r.advisory_issues},
          {"notes", r.notes}};
}

namespace {

void fail(CriticReport& r, CriticCheck c, std::string issue, std::string fix) {
  if (!r.failed(c)) r.failed_checks.push_back(c);
  r.issues.push_back(std::move(issue));
  if (!fix.empty()) r.suggested_fixes.push_back(std::move(fix));
}

std::string render_detection_summary(const DetectionSet& dets) {
  if (dets.detections.empty()) return "DETECTIONS: none";
  std::ostringstream ss;
  ss << "DETECTIONS:";
  for (const auto& d : dets.detections) {
    ss << "\n- " << d.id << " " << d.class_name << " center " << fmt_point(d.center);
  }
  return ss.str();
}

json edges_to_json(const FloorGraph& g) { return graph_to_json(g)["edges"]; }

}  // namespace

CriticReport critic_check(const FloorGraph& g, const DetectionSet& dets, const CriticOptions& options) {
  CriticReport r;

  // (1) connectivity
  const auto comps = connected_components(g);
  if (comps.size() > 1) {
    std::vector<std::string> groups;
    for (const auto& c : comps) groups.push_back("[" + join(c, ", ") + "]");
    fail(r, CriticCheck::connectivity,
         "connectivity: graph splits into " + std::to_string(comps.size()) + " components: " + join(groups, " | "),
         "add the door or passage that joins " + groups[0] + " to the rest of the plan");
  }

  // (2) door-edge consistency
  const auto doors = dets.doors();
  if (doors.empty()) {
    r.notes.push_back("door_edge_consistency skipped: no door detections");
  } else {
    for (const Detection* d : doors) {
      const auto n = std::count_if(g.edges().begin(), g.edges().end(),
                                   [&](const GraphEdge& e) { return e.door_id == d->id; });
      if (n != 1) {
        fail(r, CriticCheck::door_edge_consistency,
             "door_edge_consistency: detected " + d->id + " at " + fmt_point(d->center) + " maps to " +
                 std::to_string(n) + " edges (expected exactly 1)",
             "link " + d->id + " to the two rooms it separates");
      }
    }
    for (const auto& e : g.edges()) {
      if (!e.door_id) continue;
      const Detection* d = dets.find(*e.door_id);
      if (!d || !d->is_door()) {
        fail(r, CriticCheck::door_edge_consistency,
             "door_edge_consistency: edge " + e.from + " -- " + e.to + " cites " + *e.door_id +
                 " which has no door detection",
             "replace " + *e.door_id + " on " + e.from + " -- " + e.to + " with a detected door or a passage");
      }
    }
  }

  // (3) spatial coherence over edge lengths
  std::vector<std::pair<const GraphEdge*, double>> lengths;
  for (const auto& e : g.edges()) {
    const auto i = g.index_of(e.from);
    const auto j = g.index_of(e.to);
    if (!i || !j) continue;
    const RoomNode& a = g.nodes()[*i];
    const RoomNode& b = g.nodes()[*j];
    if (a.synthetic_centroid || b.synthetic_centroid) continue;
    lengths.emplace_back(&e, distance(a.centroid, b.centroid));
  }
  if (lengths.size() < 3) {
    r.notes.push_back("spatial_coherence skipped: fewer than 3 edges with measured centroids");
  } else {
    double mean = 0.0;
    for (const auto& [e, d] : lengths) mean += d;
    mean /= static_cast<double>(lengths.size());
    double var = 0.0;
    for (const auto& [e, d] : lengths) var += (d - mean) * (d - mean);
    const double sigma = std::sqrt(var / static_cast<double>(lengths.size()));
    const double limit = mean + 2.0 * sigma;
    for (const auto& [e, d] : lengths) {
      if (d > limit) {
        r.flagged_edges.emplace_back(e->from, e->to);
        fail(r, CriticCheck::spatial_coherence,
             "spatial_coherence: edge " + e->from + " -- " + e->to + " spans " + text::format_number(d) +
                 " px, beyond mu+2sigma = " + text::format_number(limit) + " px",
             "verify that " + e->from + " and " + e->to + " really share a door; remove the edge if not");
      }
    }
  }

  // (4) symmetry
  const auto& a = g.adjacency();
  bool square = a.size() == g.size();
  for (const auto& row : a) square = square && row.size() == g.size();
  if (!square) {
    fail(r, CriticCheck::symmetry, "symmetry: adjacency matrix is not " + std::to_string(g.size()) + "x" +
                                       std::to_string(g.size()),
         "rebuild the adjacency matrix from the edge list");
  } else {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) {
        if (a[i][j] != a[j][i]) {
          fail(r, CriticCheck::symmetry,
               "symmetry: matrix[" + std::to_string(i) + "][" + std::to_string(j) + "] != matrix[" +
                   std::to_string(j) + "][" + std::to_string(i) + "] (" + g.nodes()[i].name + " / " +
                   g.nodes()[j].name + ")",
               "make matrix[i][j] equal matrix[j][i]");
        }
      }
    }
  }

  // (5) isolated nodes
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.degree(i) == 0) {
      fail(r, CriticCheck::isolated_nodes, "isolated_nodes: \"" + g.nodes()[i].name + "\" has no edges",
           "connect \"" + g.nodes()[i].name + "\" through its door or passage");
    }
  }

  r.passed = r.failed_checks.empty();

  if (options.gateway && options.prompts) {
    llm::CompletionRequest req;
    req.template_id = llm::TemplateId::self_critic;
    req.bindings = {{"graph_json", graph_to_json(g).dump()},
                    {"edges_json", edges_to_json(g).dump()},
                    {"detection_summary", render_detection_summary(dets)},
                    {"structural_issues", r.issues.empty() ? "none" : join(r.issues, "; ")}};
    req.prompt = llm::render_prompt(options.prompts->get(llm::TemplateId::self_critic), req.bindings);
    try {
      const json reply = llm::extract_structured_payload(options.gateway->complete(req));
      for (const auto& i : reply.value("issues", json::array())) {
        if (i.is_string()) r.advisory_issues.push_back(i.get<std::string>());
      }
      for (const auto& f : reply.value("suggested_fixes", json::array())) {
        if (f.is_string()) r.suggested_fixes.push_back(f.get<std::string>());
      }
    } catch (const Error& e) {
      r.notes.push_back(std::string("model critic unavailable: ") + e.what());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Orchestrator

namespace {

std::string render_feedback(const std::vector<std::pair<int, std::vector<std::string>>>& history,
                            const std::vector<std::string>& fixes) {
  std::ostringstream ss;
  ss << "CORRECTIONS REQUIRED (previous attempts failed validation):";
  for (const auto& [attempt, issues] : history) {
    ss << "\nAttempt " << attempt + 1 << " issues:";
    for (const auto& i : issues) ss << "\n- " << i;
  }
  if (!fixes.empty()) {
    ss << "\nSuggested fixes:";
    for (const auto& f : fixes) ss << "\n- " << f;
  }
  return ss.str();
}

}  // namespace

ExtractionResult run_extraction(llm::Gateway& gateway, const llm::PromptLibrary& prompts,
                                const std::string& image_ref, const DetectionSet& dets,
                                const ExtractionOptions& options) {
  ExtractionResult result;
  result.context.max_retries = options.max_retries;
  std::vector<std::string> fixes;
  bool built = false;
  CriticOptions critic_opts;
  if (options.model_critic) critic_opts = {&gateway, &prompts};

  for (int r = 0; r <= options.max_retries; ++r) {
    result.context.attempt = r;
    std::optional<std::string> feedback;
    if (!result.context.error_history.empty()) feedback = render_feedback(result.context.error_history, fixes);

    AttemptRecord rec;
    rec.attempt = r;
    RawParse raw;
    try {
      raw = parse_floorplan(gateway, prompts, image_ref, dets, feedback);
    } catch (const ParseError& e) {
      rec.outcome = "parse_error";
      rec.issues = e.diagnostics();
      if (rec.issues.empty()) rec.issues.push_back(e.what());
      result.context.error_history.emplace_back(r, rec.issues);
      result.attempts.push_back(std::move(rec));
      continue;
    }

    BuildResult b = build_graph(raw, dets);
    CriticReport report = critic_check(b.graph, dets, critic_opts);
    report.notes.insert(report.notes.begin(), b.notes.begin(), b.notes.end());
    rec.critic = report;
    result.graph = std::move(b.graph);
    result.report = report;
    built = true;
    if (report.passed) {
      rec.outcome = "passed";
      result.attempts.push_back(std::move(rec));
      result.degraded = false;
      return result;
    }
    rec.outcome = "critic_failed";
    rec.issues = report.issues;
    rec.issues.insert(rec.issues.end(), report.advisory_issues.begin(), report.advisory_issues.end());
    result.context.error_history.emplace_back(r, rec.issues);
    fixes.insert(fixes.end(), report.suggested_fixes.begin(), report.suggested_fixes.end());
    result.attempts.push_back(std::move(rec));
  }

  if (!built) {
    throw ExtractionError("extraction failed: no attempt produced a valid parser payload (" +
                              std::to_string(result.attempts.size()) + " attempts)",
                          result.attempts);
  }
  result.degraded = true;
  return result;
}

ExtractionResult run_heuristic_extraction(const DetectionSet& dets) {
  ExtractionResult result;
  result.context.max_retries = 0;
  BuildResult b = build_graph(heuristic_parse(dets), dets);
  CriticReport report = critic_check(b.graph, dets);
  report.notes.insert(report.notes.begin(), b.notes.begin(), b.notes.end());
  AttemptRecord rec;
  rec.outcome = report.passed ? "passed" : "critic_failed";
  rec.issues = report.issues;
  rec.critic = report;
  if (!report.passed) result.context.error_history.emplace_back(0, report.issues);
  result.attempts.push_back(std::move(rec));
  result.graph = std::move(b.graph);
  result.report = std::move(report);
  result.degraded = !result.report.passed;
  return result;
}

json extraction_report_to_json(const ExtractionResult& result) {
  json attempts = json::array();
  for (const auto& a : result.attempts) {
    json ja = {{"attempt", a.attempt}, {"outcome", a.outcome}, {"issues", a.issues}};
    if (a.critic) ja["critic_report"] = critic_report_to_json(*a.critic);
    attempts.push_back(std::move(ja));
  }
  json history = json::array();
  for (const auto& [attempt, issues] : result.context.error_history) {
    history.push_back({{"attempt", attempt}, {"issues", issues}});
  }
  return {{"degraded", result.degraded},
          {"max_retries", result.context.max_retries},
          {"attempts", attempts},
          {"error_history", history},
          {"critic_report", critic_report_to_json(result.report)},
          {"graph", graph_to_json(result.graph)}};
}

}  // namespace floornav
