#pragma once

// Detector/OCR file ingestion and fuzzy room-label resolution.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "floornav/graph.hpp"

namespace floornav {

inline constexpr double kLabelMatchThreshold = 0.55;

struct Detection {
  /// Stable identifier, e.g. "Door_D3". Doors without one get Door_D<k> in file order.
  std::string id;
  std::string class_name;
  double confidence = 0.0;
  BBox bbox;
  Point center;

  bool is_door() const;
  bool is_window() const;
  bool operator==(const Detection&) const = default;
};

struct OcrToken {
  std::string text;
  Point position;
  std::optional<double> confidence;
};

struct ResolvedLabel {
  std::string name;
  Point position;
  std::optional<double> confidence;
  bool operator==(const ResolvedLabel&) const = default;
};

struct DetectionSet {
  std::string image_ref;
  std::vector<Detection> detections;
  std::vector<ResolvedLabel> labels;

  std::vector<const Detection*> doors() const;
  const Detection* find(std::string_view id) const;
  const ResolvedLabel* label_for(std::string_view room) const;
  bool operator==(const DetectionSet&) const = default;
};

/// Reads a detection file: either a bare array of records or an object with
/// "image_ref" and "detections". Throws IngestError listing every bad record.
DetectionSet load_detections(const std::filesystem::path& path);
DetectionSet parse_detections(std::string_view content, std::string_view source = "<memory>");

/// Merges tokens from any number of OCR engine outputs, in argument order.
std::vector<OcrToken> load_ocr_tokens(const std::vector<std::filesystem::path>& paths);
std::vector<OcrToken> parse_ocr_tokens(std::string_view content, std::string_view source = "<memory>");

/// Newline-separated names; blank lines and '#' comments skipped.
std::vector<std::string> load_roster(const std::filesystem::path& path);

/// 1 - editdistance / max(len), over case-folded code points.
double levenshtein_ratio(std::string_view a, std::string_view b);

struct LabelMatch {
  std::vector<ResolvedLabel> labels;
  /// One entry per dropped token.
  std::vector<std::string> log;
};

/// Maps each token to its best known label when ratio >= threshold. With an
/// empty roster the trimmed token text is used verbatim.
LabelMatch match_labels(const std::vector<OcrToken>& tokens, const std::vector<std::string>& known,
                        double threshold = kLabelMatchThreshold);

/// Repeated names become "<name> 1", "<name> 2", ... in input order.
std::vector<std::string> number_duplicates(const std::vector<std::string>& names);

/// match_labels followed by number_duplicates.
std::vector<ResolvedLabel> resolve_labels(const std::vector<OcrToken>& tokens,
                                          const std::vector<std::string>& known,
                                          std::vector<std::string>* log = nullptr);

nlohmann::json detection_to_json(const Detection& d);
nlohmann::json detection_set_to_json(const DetectionSet& set);
DetectionSet detection_set_from_json(const nlohmann::json& j);

}  // namespace floornav
