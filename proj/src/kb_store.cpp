#include <fstream>
#include <sstream>

#include "floornav/knowledge_base.hpp"

namespace floornav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kGraph = "graph.json";
constexpr const char* kDocs = "docs.json";
constexpr const char* kVectors = "vectors.json";
constexpr const char* kVisual = "visual.json";

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError(StoreError::Kind::io, "cannot write " + p.string());
  out << j.dump(2) << "\n";
  if (!out) throw StoreError(StoreError::Kind::io, "write failed for " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StoreError(StoreError::Kind::corrupted, "knowledge base file missing: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw StoreError(StoreError::Kind::corrupted, "corrupted knowledge base file " + p.string() + ": " + e.what());
  }
}

fs::path normalized(const fs::path& dir) {
  fs::path p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p;
}

std::optional<DocKind> parse_doc_kind(const std::string& s) {
  for (DocKind k : {DocKind::room, DocKind::door, DocKind::transition}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

}  // namespace

void persist(const KnowledgeBase& kb, const fs::path& dir_in) {
  const fs::path dir = normalized(dir_in);
  const fs::path tmp = dir.parent_path() / (dir.filename().string() + ".tmp");
  const fs::path old = dir.parent_path() / (dir.filename().string() + ".old");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  if (!dir.parent_path().empty()) fs::create_directories(dir.parent_path(), ec);
  if (!fs::create_directories(tmp, ec) && ec) {
    throw StoreError(StoreError::Kind::io, "cannot create " + tmp.string() + ": " + ec.message());
  }

  json manifest = {{"schema_version", kKnowledgeBaseSchemaVersion},
                   {"building_id", kb.building_id},
                   {"embedder", {{"name", kb.index.embedder}, {"dimension", kb.index.dimension}}},
                   {"files", {kGraph, kDocs, kVectors, kVisual}}};
  if (kb.scale_cm_per_px) manifest["scale_cm_per_px"] = *kb.scale_cm_per_px;

  json docs = json::array();
  for (const auto& d : kb.docs) {
    docs.push_back({{"doc_id", d.doc_id},
                    {"kind", std::string(to_string(d.kind))},
                    {"body", d.body},
                    {"source_refs", d.source_refs}});
  }
  json rows = json::array();
  for (const auto& [id, v] : kb.index.entries) rows.push_back({{"doc_id", id}, {"vector", v}});
  json visual = {{"image_ref", kb.visual.image_ref},
                 {"detections", detection_set_to_json(kb.visual.detections)},
                 {"element_notes", kb.visual.element_notes}};

  write_json(tmp / kGraph, graph_to_json(kb.graph));
  write_json(tmp / kDocs, docs);
  write_json(tmp / kVectors, {{"dimension", kb.index.dimension}, {"rows", rows}});
  write_json(tmp / kVisual, visual);
  write_json(tmp / kManifest, manifest);

  fs::remove_all(old, ec);
  if (fs::exists(dir)) {
    fs::rename(dir, old, ec);
    if (ec) throw StoreError(StoreError::Kind::io, "cannot replace " + dir.string() + ": " + ec.message());
  }
  fs::rename(tmp, dir, ec);
  if (ec) throw StoreError(StoreError::Kind::io, "cannot move store into " + dir.string() + ": " + ec.message());
  fs::remove_all(old, ec);
}

KnowledgeBase load(const fs::path& dir_in) {
  const fs::path dir = normalized(dir_in);
  if (!fs::exists(dir / kManifest)) {
    throw StoreError(StoreError::Kind::missing, "no knowledge base store at " + dir.string() + " (missing manifest)");
  }
  const json manifest = read_json(dir / kManifest);
  const int version = manifest.value("schema_version", -1);
  if (version != kKnowledgeBaseSchemaVersion) {
    throw StoreError(StoreError::Kind::version_mismatch,
                     "knowledge base schema version " + std::to_string(version) + " at " + dir.string() +
                         ", expected " + std::to_string(kKnowledgeBaseSchemaVersion));
  }

  KnowledgeBase kb;
  auto corrupt = [&](const char* file, const std::string& why) {
    return StoreError(StoreError::Kind::corrupted, "corrupted knowledge base file " + (dir / file).string() + ": " + why);
  };
  try {
    kb.building_id = manifest.at("building_id").get<std::string>();
    kb.index.embedder = manifest.at("embedder").at("name").get<std::string>();
    if (manifest.contains("scale_cm_per_px")) kb.scale_cm_per_px = manifest["scale_cm_per_px"].get<double>();
  } catch (const std::exception& e) {
    throw corrupt(kManifest, e.what());
  }
  try {
    kb.graph = graph_from_json(read_json(dir / kGraph));
  } catch (const StoreError&) {
    throw;
  } catch (const std::exception& e) {
    throw corrupt(kGraph, e.what());
  }
  try {
    for (const auto& d : read_json(dir / kDocs)) {
      SemanticDoc doc;
      doc.doc_id = d.at("doc_id").get<std::string>();
      const auto kind = parse_doc_kind(d.at("kind").get<std::string>());
      if (!kind) throw std::runtime_error("unknown doc kind for " + doc.doc_id);
      doc.kind = *kind;
      doc.body = d.at("body").get<std::string>();
      doc.source_refs = d.at("source_refs").get<std::vector<std::string>>();
      kb.docs.push_back(std::move(doc));
    }
  } catch (const StoreError&) {
    throw;
  } catch (const std::exception& e) {
    throw corrupt(kDocs, e.what());
  }
  try {
    const json v = read_json(dir / kVectors);
    kb.index.dimension = v.at("dimension").get<std::size_t>();
    for (const auto& row : v.at("rows")) {
      kb.index.entries.emplace_back(row.at("doc_id").get<std::string>(), row.at("vector").get<Vector>());
    }
  } catch (const StoreError&) {
    throw;
  } catch (const std::exception& e) {
    throw corrupt(kVectors, e.what());
  }
  try {
    const json v = read_json(dir / kVisual);
    kb.visual.image_ref = v.at("image_ref").get<std::string>();
    kb.visual.detections = detection_set_from_json(v.at("detections"));
    kb.visual.element_notes = v.at("element_notes").get<std::map<std::string, std::string>>();
  } catch (const StoreError&) {
    throw;
  } catch (const std::exception& e) {
    throw corrupt(kVisual, e.what());
  }

  if (const auto problems = check_bijection(kb); !problems.empty()) throw corrupt(kVectors, problems.front());
  return kb;
}

}  // namespace floornav
