#pragma once

// Three-tier store built from a validated graph: graph relations, embedded
// semantic documents, and visual grounding context.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "floornav/graph.hpp"
#include "floornav/ingest.hpp"
#include "floornav/llm.hpp"

namespace floornav {

inline constexpr int kKnowledgeBaseSchemaVersion = 1;
inline constexpr std::size_t kDefaultEmbeddingDimension = 256;

enum class DocKind { room, door, transition };
std::string_view to_string(DocKind k);

struct SemanticDoc {
  std::string doc_id;
  DocKind kind = DocKind::room;
  std::string body;
  std::vector<std::string> source_refs;
  bool operator==(const SemanticDoc&) const = default;
};

using Vector = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual Vector embed(std::string_view text) const = 0;
};

/// Token-hash bag of words, L2-normalized. Text with no tokens maps to the zero vector.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = kDefaultEmbeddingDimension) : dimension_(dimension) {}
  std::string name() const override { return "token-hash-bow"; }
  std::size_t dimension() const override { return dimension_; }
  Vector embed(std::string_view text) const override;

  /// Lowercased alphanumeric runs (bytes >= 0x80 count as alphanumeric).
  static std::vector<std::string> tokenize(std::string_view text);
  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dimension_;
};

/// OpenAI-compatible /embeddings endpoint.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(llm::ProviderConfig config, std::size_t dimension);
  std::string name() const override { return "http:" + config_.model_name; }
  std::size_t dimension() const override { return dimension_; }
  Vector embed(std::string_view text) const override;

 private:
  llm::ProviderConfig config_;
  std::size_t dimension_;
};

/// Cosine similarity; 0 when either side is the zero vector.
double cosine_similarity(const Vector& a, const Vector& b);

struct VectorIndex {
  std::size_t dimension = kDefaultEmbeddingDimension;
  std::string embedder;
  std::vector<std::pair<std::string, Vector>> entries;

  const Vector* find(std::string_view doc_id) const;
  bool operator==(const VectorIndex&) const = default;
};

struct VisualContext {
  std::string image_ref;
  DetectionSet detections;
  /// Keyed by detection id.
  std::map<std::string, std::string> element_notes;
  bool operator==(const VisualContext&) const = default;
};

/// Produces the per-door note; the default is a geometry rule template.
using DoorNoteWriter = std::function<std::string(const FloorGraph&, const GraphEdge&, const Detection&,
                                                 const std::string& image_ref)>;

std::string template_door_note(const FloorGraph& g, const GraphEdge& e, const Detection& d,
                               const std::string& image_ref);

struct KnowledgeBase {
  std::string building_id;
  FloorGraph graph;
  std::vector<SemanticDoc> docs;
  VectorIndex index;
  VisualContext visual;
  /// Per-building calibration, when the operator supplied one.
  std::optional<double> scale_cm_per_px;

  const SemanticDoc* doc(std::string_view doc_id) const;
  bool operator==(const KnowledgeBase&) const = default;
};

/// Cardinal word ("North", ...) from `from` towards `to`; y grows southwards.
std::string direction_word(const Point& from, const Point& to);

std::string room_doc_id(std::string_view room);
std::string door_doc_id(std::string_view door_id);
std::string transition_doc_id(const GraphEdge& e);

std::vector<SemanticDoc> build_semantic_docs(const FloorGraph& g, const DetectionSet& dets);

struct KnowledgeBaseOptions {
  std::string building_id = "building";
  const Embedder* embedder = nullptr;  // HashEmbedder when null
  DoorNoteWriter door_notes;          // template_door_note when empty
  std::optional<double> scale_cm_per_px;
};

KnowledgeBase build_knowledge_base(const FloorGraph& g, const DetectionSet& dets,
                                   const KnowledgeBaseOptions& options = {});

/// Docs and index entries must match one-to-one by doc_id.
std::vector<std::string> check_bijection(const KnowledgeBase& kb);

struct ScoredDoc {
  const SemanticDoc* doc = nullptr;
  double score = 0.0;
};

/// Top-k by cosine similarity, descending; ties by doc_id.
std::vector<ScoredDoc> retrieve(const KnowledgeBase& kb, std::string_view query, std::size_t k,
                                const Embedder* embedder = nullptr);

struct NavigationContext {
  std::string start;
  std::string destination;
  /// nullopt marks NoPath.
  std::optional<std::vector<std::string>> path;
  std::vector<const SemanticDoc*> room_docs;
  std::vector<const SemanticDoc*> transition_docs;
  std::vector<ScoredDoc> retrieved;
  /// Door id -> visual note, for doors on the path.
  std::vector<std::pair<std::string, std::string>> door_notes;

  bool no_path() const { return !path.has_value(); }
  std::string render() const;
};

/// Throws UnknownRoomError for rooms outside the graph.
NavigationContext assemble_context(const KnowledgeBase& kb, std::string_view s, std::string_view d,
                                   std::size_t k = 3, const Embedder* embedder = nullptr);

class StoreError : public Error {
 public:
  enum class Kind { missing, version_mismatch, corrupted, io };
  StoreError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Writes manifest.json, graph.json, docs.json, vectors.json and visual.json
/// into a sibling temp directory, then swaps it into place.
void persist(const KnowledgeBase& kb, const std::filesystem::path& dir);
KnowledgeBase load(const std::filesystem::path& dir);

}  // namespace floornav
