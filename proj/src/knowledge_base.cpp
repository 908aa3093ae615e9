#include "floornav/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "floornav/text.hpp"

namespace floornav {

std::string_view to_string(DocKind k) {
  switch (k) {
    case DocKind::room: return "room";
    case DocKind::door: return "door";
    case DocKind::transition: return "transition";
  }
  return "room";
}

// ---------------------------------------------------------------------------
// Embedding

std::vector<std::string> HashEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t HashEmbedder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(text::fnv1a64(token) % dimension_);
}

Vector HashEmbedder::embed(std::string_view text) const {
  Vector v(dimension_, 0.0);
  for (const auto& t : tokenize(text)) v[bucket(t)] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) return v;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return 0.0;
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  // sqrt(na*nb) keeps self-similarity at exactly 1.0.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

const Vector* VectorIndex::find(std::string_view doc_id) const {
  for (const auto& [id, v] : entries) {
    if (id == doc_id) return &v;
  }
  return nullptr;
}

const SemanticDoc* KnowledgeBase::doc(std::string_view doc_id) const {
  for (const auto& d : docs) {
    if (d.doc_id == doc_id) return &d;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Documents

std::string direction_word(const Point& from, const Point& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (std::fabs(dx) > std::fabs(dy)) return dx > 0 ? "East" : "West";
  return dy > 0 ? "South" : "North";
}

std::string room_doc_id(std::string_view room) { return "room:" + std::string(room); }
std::string door_doc_id(std::string_view door_id) { return "door:" + std::string(door_id); }
std::string transition_doc_id(const GraphEdge& e) {
  std::string id = "transition:" + e.from + "->" + e.to;
  if (e.door_id) id += "|" + *e.door_id;
  return id;
}

namespace {

std::string fmt_bbox(const BBox& b) {
  return "[" + text::format_number(b.x1) + ", " + text::format_number(b.y1) + ", " + text::format_number(b.x2) +
         ", " + text::format_number(b.y2) + "]";
}

std::string fmt_point(const Point& p) {
  return "(" + text::format_number(p.x) + ", " + text::format_number(p.y) + ")";
}

std::string size_phrase(const RoomNode& n) {
  std::string s = text::format_number(*n.size_m2) + " m2";
  if (n.dimensions) {
    s += " (" + text::format_number(n.dimensions->width_m) + " m x " + text::format_number(n.dimensions->height_m) +
         " m)";
  }
  return s;
}

bool directional(const RoomNode& a, const RoomNode& b) { return !a.synthetic_centroid && !b.synthetic_centroid; }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Transition doc id per edge, suffixed when two edges would collide.
std::vector<std::string> transition_ids(const FloorGraph& g) {
  std::vector<std::string> ids;
  std::map<std::string, int> seen;
  for (const auto& e : g.edges()) {
    std::string id = transition_doc_id(e);
    if (int n = seen[id]++; n > 0) id += "#" + std::to_string(n + 1);
    ids.push_back(std::move(id));
  }
  return ids;
}

const RoomNode* nearest_room(const FloorGraph& g, const Point& p) {
  const RoomNode* best = nullptr;
  double best_d = 0.0;
  for (const auto& n : g.nodes()) {
    if (n.synthetic_centroid) continue;
    const double d = distance(n.centroid, p);
    if (!best || d < best_d) {
      best = &n;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

std::string template_door_note(const FloorGraph& g, const GraphEdge& e, const Detection& d,
                               const std::string& image_ref) {
  const RoomNode& a = g.node(e.from);
  std::ostringstream ss;
  ss << "Image Source: " << (image_ref.empty() ? "Input Floor Plan Image" : image_ref) << "\n"
     << "Detection: " << d.class_name << " | Confidence: " << text::format_number(d.confidence) << "\n"
     << "Bounding box: " << fmt_bbox(d.bbox) << "\n"
     << "Center: " << fmt_point(d.center) << "\n"
     << "Room A: " << e.from << " | Room B: " << e.to << "\n";
  if (!a.synthetic_centroid) {
    const std::string wall = direction_word(a.centroid, d.center);
    ss << "Wall side: " << wall << " wall of " << e.from << "\n"
       << "Door type: hinged single door\n"
       << "Description: Standard interior door connecting " << e.from << " to " << e.to << ", on the "
       << lower(wall) << " wall of " << e.from;
  } else {
    ss << "Door type: hinged single door\n"
       << "Description: Standard interior door connecting " << e.from << " to " << e.to;
  }
  return ss.str();
}

std::vector<SemanticDoc> build_semantic_docs(const FloorGraph& g, const DetectionSet& dets) {
  std::vector<SemanticDoc> docs;

  std::map<std::string, std::vector<std::string>> windows;  // room key -> wall sides
  for (const auto& d : dets.detections) {
    if (!d.is_window()) continue;
    if (const RoomNode* r = nearest_room(g, d.center)) {
      windows[text::name_key(r->name)].push_back(direction_word(r->centroid, d.center) + " wall");
    }
  }

  for (const auto& n : g.nodes()) {
    const std::string key = text::name_key(n.name);
    SemanticDoc doc;
    doc.doc_id = room_doc_id(n.name);
    doc.kind = DocKind::room;
    doc.source_refs.push_back(n.name);

    std::vector<std::string> doors;
    std::vector<std::string> connected;
    std::set<std::string> seen;
    for (const auto& e : g.edges()) {
      const bool from_here = text::name_key(e.from) == key;
      if (!from_here && text::name_key(e.to) != key) continue;
      const std::string& other = from_here ? e.to : e.from;
      if (e.door_id) {
        doors.push_back(*e.door_id + " to " + other);
        doc.source_refs.push_back(*e.door_id);
      }
      if (!seen.insert(text::name_key(other)).second) continue;
      const auto j = g.index_of(other);
      if (j && directional(n, g.nodes()[*j])) {
        connected.push_back(other + " to " + direction_word(n.centroid, g.nodes()[*j].centroid));
      } else {
        connected.push_back(other);
      }
      doc.source_refs.push_back(other);
    }

    std::ostringstream ss;
    ss << "Room: " << n.name << "\n";
    ss << "Type: " << to_string(n.kind);
    if (n.size_m2) ss << " | Size: " << text::format_number(*n.size_m2) << " m2";
    ss << "\n";
    if (n.dimensions) {
      ss << "Dimensions: " << text::format_number(n.dimensions->width_m) << " m x "
         << text::format_number(n.dimensions->height_m) << " m\n";
    }
    if (n.ocr_confidence) ss << "OCR confidence: " << text::format_number(*n.ocr_confidence) << "\n";
    if (!doors.empty()) {
      ss << "Doors (" << doors.size() << "): ";
      for (std::size_t i = 0; i < doors.size(); ++i) ss << (i ? "; " : "") << doors[i];
      ss << "\n";
    }
    if (auto w = windows.find(key); w != windows.end()) {
      ss << "Windows (" << w->second.size() << "): ";
      for (std::size_t i = 0; i < w->second.size(); ++i) ss << (i ? "; " : "") << w->second[i];
      ss << "\n";
    }
    if (!connected.empty()) {
      ss << "Connected rooms: ";
      for (std::size_t i = 0; i < connected.size(); ++i) ss << (i ? "; " : "") << connected[i];
      ss << "\n";
    }
    if (n.surface) ss << "Surface: " << *n.surface << "\n";
    doc.body = ss.str();
    doc.body.pop_back();
    docs.push_back(std::move(doc));
  }

  for (const auto& e : g.edges()) {
    if (!e.door_id) continue;
    SemanticDoc doc;
    doc.doc_id = door_doc_id(*e.door_id);
    if (std::any_of(docs.begin(), docs.end(), [&](const SemanticDoc& d) { return d.doc_id == doc.doc_id; })) {
      continue;
    }
    doc.kind = DocKind::door;
    doc.source_refs = {*e.door_id, e.from, e.to};
    std::ostringstream ss;
    ss << "Door: " << *e.door_id << "\n";
    ss << "Connects: " << e.from << " <-> " << e.to << "\n";
    const Detection* det = dets.find(*e.door_id);
    if (det) ss << "Detection: " << det->class_name << " | Confidence: " << text::format_number(det->confidence) << "\n";
    if (e.door_bbox) ss << "Bounding box: " << fmt_bbox(*e.door_bbox) << "\n";
    if (det) {
      ss << "Center: " << fmt_point(det->center) << "\n";
      const RoomNode& a = g.node(e.from);
      if (!a.synthetic_centroid) ss << "Wall side: " << direction_word(a.centroid, det->center) << " wall of " << e.from << "\n";
    }
    doc.body = ss.str();
    doc.body.pop_back();
    docs.push_back(std::move(doc));
  }

  const auto ids = transition_ids(g);
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const auto& e = g.edges()[i];
    SemanticDoc doc;
    doc.doc_id = ids[i];
    doc.kind = DocKind::transition;
    doc.source_refs = {e.from, e.to};
    std::ostringstream ss;
    ss << "Transition: " << e.from << " -> " << e.to << "\n";
    if (e.door_id) {
      doc.source_refs.push_back(*e.door_id);
      ss << "Via: door | Door ID: " << *e.door_id << "\n";
      if (e.door_bbox) ss << "Door position (bbox): " << fmt_bbox(*e.door_bbox) << "\n";
      ss << "Door description: " << *e.door_id << " to " << e.to << "\n";
    } else {
      ss << "Via: passage\n";
    }
    for (const std::string* room : {&e.from, &e.to}) {
      if (const auto j = g.index_of(*room); j && g.nodes()[*j].size_m2) {
        ss << *room << " size: " << size_phrase(g.nodes()[*j]) << "\n";
      }
    }
    doc.body = ss.str();
    doc.body.pop_back();
    docs.push_back(std::move(doc));
  }
  return docs;
}

KnowledgeBase build_knowledge_base(const FloorGraph& g, const DetectionSet& dets, const KnowledgeBaseOptions& options) {
  const HashEmbedder fallback;
  const Embedder& embedder = options.embedder ? *options.embedder : fallback;

  KnowledgeBase kb;
  kb.building_id = options.building_id;
  kb.graph = g;
  kb.scale_cm_per_px = options.scale_cm_per_px;
  kb.docs = build_semantic_docs(g, dets);
  kb.index.dimension = embedder.dimension();
  kb.index.embedder = embedder.name();
  for (const auto& d : kb.docs) kb.index.entries.emplace_back(d.doc_id, embedder.embed(d.body));

  kb.visual.image_ref = dets.image_ref;
  kb.visual.detections = dets;
  const DoorNoteWriter writer = options.door_notes ? options.door_notes : DoorNoteWriter(template_door_note);
  for (const auto& e : g.edges()) {
    if (!e.door_id) continue;
    const Detection* det = dets.find(*e.door_id);
    if (!det || kb.visual.element_notes.count(det->id)) continue;
    kb.visual.element_notes[det->id] = writer(g, e, *det, dets.image_ref);
  }
  for (const auto& d : dets.detections) {
    if (!d.is_window()) continue;
    if (const RoomNode* r = nearest_room(g, d.center)) {
      kb.visual.element_notes[d.id] = "Detection: " + d.class_name + " | Confidence: " +
                                      text::format_number(d.confidence) + "\nWindow on the " +
                                      direction_word(r->centroid, d.center) + " wall of " + r->name;
    }
  }
  return kb;
}

std::vector<std::string> check_bijection(const KnowledgeBase& kb) {
  std::vector<std::string> problems;
  std::set<std::string> doc_ids;
  for (const auto& d : kb.docs) {
    if (!doc_ids.insert(d.doc_id).second) problems.push_back("duplicate doc id " + d.doc_id);
  }
  std::set<std::string> vec_ids;
  for (const auto& [id, v] : kb.index.entries) {
    if (!vec_ids.insert(id).second) problems.push_back("duplicate vector id " + id);
    if (!doc_ids.count(id)) problems.push_back("vector " + id + " has no document");
    if (v.size() != kb.index.dimension) problems.push_back("vector " + id + " has wrong dimension");
    for (double x : v) {
      if (!std::isfinite(x)) {
        problems.push_back("vector " + id + " has a non-finite entry");
        break;
      }
    }
  }
  for (const auto& id : doc_ids) {
    if (!vec_ids.count(id)) problems.push_back("document " + id + " has no vector");
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Retrieval

std::vector<ScoredDoc> retrieve(const KnowledgeBase& kb, std::string_view query, std::size_t k,
                                const Embedder* embedder) {
  const HashEmbedder fallback(kb.index.dimension);
  const Embedder& emb = embedder ? *embedder : fallback;
  const Vector q = emb.embed(query);
  std::vector<ScoredDoc> scored;
  for (const auto& d : kb.docs) {
    const Vector* v = kb.index.find(d.doc_id);
    scored.push_back({&d, v ? cosine_similarity(q, *v) : 0.0});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc->doc_id < b.doc->doc_id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

std::string NavigationContext::render() const {
  std::ostringstream ss;
  if (!path) {
    ss << "SHORTEST PATH: none (" << start << " and " << destination << " are not connected)";
    return ss.str();
  }
  ss << "SHORTEST PATH: ";
  for (std::size_t i = 0; i < path->size(); ++i) ss << (i ? " -> " : "") << (*path)[i];
  ss << "\nROOMS:";
  for (const auto* d : room_docs) ss << "\n" << d->body << "\n";
  if (!transition_docs.empty()) {
    ss << "\nTRANSITIONS:";
    for (const auto* d : transition_docs) ss << "\n" << d->body << "\n";
  }
  if (!door_notes.empty()) {
    ss << "\nVISUAL CONTEXT:";
    for (const auto& [id, note] : door_notes) ss << "\n" << note << "\n";
  }
  if (!retrieved.empty()) {
    ss << "\nRELATED:";
    for (const auto& r : retrieved) ss << "\n[" << r.doc->doc_id << "] " << text::format_number(r.score);
  }
  return ss.str();
}

NavigationContext assemble_context(const KnowledgeBase& kb, std::string_view s, std::string_view d, std::size_t k,
                                   const Embedder* embedder) {
  NavigationContext ctx;
  ctx.start = kb.graph.node(s).name;
  ctx.destination = kb.graph.node(d).name;
  ctx.path = bfs_shortest_path(kb.graph, s, d);
  if (!ctx.path) return ctx;

  for (const auto& room : *ctx.path) {
    if (const SemanticDoc* doc = kb.doc(room_doc_id(room))) ctx.room_docs.push_back(doc);
  }
  const auto ids = transition_ids(kb.graph);
  std::set<std::string> on_path;
  for (std::size_t i = 0; i + 1 < ctx.path->size(); ++i) {
    const GraphEdge* e = kb.graph.edge_between((*ctx.path)[i], (*ctx.path)[i + 1]);
    if (!e) continue;
    const std::size_t idx = static_cast<std::size_t>(e - kb.graph.edges().data());
    if (const SemanticDoc* doc = kb.doc(ids[idx])) {
      ctx.transition_docs.push_back(doc);
      on_path.insert(doc->doc_id);
    }
    if (e->door_id) {
      if (auto it = kb.visual.element_notes.find(*e->door_id); it != kb.visual.element_notes.end()) {
        ctx.door_notes.emplace_back(it->first, it->second);
      }
    }
  }
  for (const auto& hit : retrieve(kb, "navigate from " + ctx.start + " to " + ctx.destination, k, embedder)) {
    if (hit.doc->kind == DocKind::transition && !on_path.count(hit.doc->doc_id)) continue;
    ctx.retrieved.push_back(hit);
  }
  return ctx;
}

}  // namespace floornav
