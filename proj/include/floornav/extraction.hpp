#pragma once

// Knowledge construction: Parser -> Graph Builder -> Self-Critic with a
// bounded retry loop that feeds critic findings back into the next parse.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "floornav/graph.hpp"
#include "floornav/ingest.hpp"
#include "floornav/llm.hpp"

namespace floornav {

inline constexpr int kDefaultCriticRetries = 2;

struct RawEdge {
  std::string from;
  std::string to;
  /// "Door_D<n>" or "passage" as emitted by the model.
  std::string via = "passage";
  std::optional<BBox> door_bbox;
};

struct RawRoomInfo {
  std::string name;
  std::optional<std::string> size;
  std::vector<std::string> doors;
  std::vector<std::string> connected_rooms;
};

struct RawParse {
  std::string approach;
  std::vector<std::string> nodes_elements;
  /// Optional per-node "type" emitted alongside the name.
  std::vector<std::optional<RoomKind>> node_kinds;
  AdjacencyMatrix adjacency_matrix;
  std::vector<RawEdge> edges;
  std::vector<RawRoomInfo> rooms_info;
};

nlohmann::json raw_parse_to_json(const RawParse& raw);

/// Thrown for unparseable or schema-invalid parser output; the loop retries on it.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::vector<std::string> diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Decodes the Parser JSON schema and applies its four VALIDATION rules plus
/// name uniqueness and edge endpoint checks. Throws ParseError.
RawParse raw_parse_from_json(const nlohmann::json& j);
/// Schema diagnostics without throwing; empty when valid.
std::vector<std::string> check_raw_parse(const RawParse& raw);

/// Grounding block for the {detection_context} placeholder; empty for no detections.
std::string render_detection_context(const DetectionSet& dets);

/// Agent 1. Feedback, when given, is appended after the rendered prompt.
RawParse parse_floorplan(llm::Gateway& gateway, const llm::PromptLibrary& prompts, const std::string& image_ref,
                         const DetectionSet& dets, const std::optional<std::string>& feedback = std::nullopt);

/// Detection-only stand-in for the Parser when no model is available: rooms
/// from resolved labels, one edge per door between its two nearest rooms.
RawParse heuristic_parse(const DetectionSet& dets);

struct BuildResult {
  FloorGraph graph;
  std::vector<std::string> notes;
  /// Door detections that could not be tied to two rooms.
  std::vector<std::string> unassociated_doors;
};

/// Agent 2. Each door detection links its two nearest rooms (ties to the lower
/// node index); raw adjacencies not backed by a detection become passage edges.
BuildResult build_graph(const RawParse& raw, const DetectionSet& dets);

/// Two nearest rooms with real centroids, ordered by (distance, index).
std::optional<std::pair<std::size_t, std::size_t>> nearest_two_rooms(const std::vector<RoomNode>& nodes,
                                                                      const Point& p);

enum class CriticCheck { connectivity, door_edge_consistency, spatial_coherence, symmetry, isolated_nodes };
std::string_view to_string(CriticCheck c);

struct CriticReport {
  bool passed = true;
  std::vector<std::string> issues;
  std::vector<std::string> suggested_fixes;
  std::vector<CriticCheck> failed_checks;
  /// Edges exceeding mu + 2 sigma, as (from, to).
  std::vector<std::pair<std::string, std::string>> flagged_edges;
  /// From the model-backed critic; never affects `passed`.
  std::vector<std::string> advisory_issues;
  std::vector<std::string> notes;

  bool failed(CriticCheck c) const;
};

nlohmann::json critic_report_to_json(const CriticReport& r);

struct CriticOptions {
  llm::Gateway* gateway = nullptr;
  const llm::PromptLibrary* prompts = nullptr;
};

/// Agent 3: five deterministic structural checks, plus advisory model review
/// when a gateway is supplied.
CriticReport critic_check(const FloorGraph& g, const DetectionSet& dets, const CriticOptions& options = {});

struct AttemptRecord {
  int attempt = 0;
  std::string outcome;  // "parse_error", "critic_failed", "passed"
  std::vector<std::string> issues;
  std::optional<CriticReport> critic;
};

struct RetryContext {
  int attempt = 0;
  int max_retries = kDefaultCriticRetries;
  std::vector<std::pair<int, std::vector<std::string>>> error_history;
};

struct ExtractionResult {
  FloorGraph graph;
  CriticReport report;
  std::vector<AttemptRecord> attempts;
  RetryContext context;
  bool degraded = false;
};

class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& what, std::vector<AttemptRecord> attempts)
      : Error(what), attempts_(std::move(attempts)) {}
  const std::vector<AttemptRecord>& attempts() const { return attempts_; }

 private:
  std::vector<AttemptRecord> attempts_;
};

struct ExtractionOptions {
  int max_retries = kDefaultCriticRetries;
  bool model_critic = false;
};

/// Up to max_retries + 1 parse/build/critic rounds. Returns the first passing
/// graph, else the last built graph flagged degraded. Throws ExtractionError
/// when no attempt produced a parseable payload.
ExtractionResult run_extraction(llm::Gateway& gateway, const llm::PromptLibrary& prompts,
                                const std::string& image_ref, const DetectionSet& dets,
                                const ExtractionOptions& options = {});

/// Single pass over heuristic_parse output, no retries.
ExtractionResult run_heuristic_extraction(const DetectionSet& dets);

nlohmann::json extraction_report_to_json(const ExtractionResult& result);

}  // namespace floornav
