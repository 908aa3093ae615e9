#pragma once

// Fixtures, seeded generators and brute-force oracles shared by the unit and
// acceptance tests. Oracles here are written independently of the library.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "floornav/extraction.hpp"
#include "floornav/graph.hpp"
#include "floornav/ingest.hpp"
#include "floornav/knowledge_base.hpp"
#include "floornav/llm.hpp"
#include "floornav/navigation.hpp"
#include "floornav/walkthrough.hpp"

namespace support {

std::filesystem::path data_dir();
std::filesystem::path apartment_dir();
std::string read_file(const std::filesystem::path& p);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// sample apartment detections with OCR labels resolved against the roster.
floornav::DetectionSet apartment_detections();
/// Same labels, no door or window detections.
floornav::DetectionSet apartment_labels_only();
std::string apartment_parser_response();
/// Parser reply that splits the plan into two components.
std::string apartment_split_response();

struct Apartment {
  floornav::DetectionSet dets;
  floornav::ExtractionResult extraction;
  floornav::KnowledgeBase kb;
};
/// Mock extraction of the sample apartment fixture plus its knowledge base.
Apartment build_apartment(std::optional<double> scale_cm_per_px = std::nullopt);

/// Two rooms 100 px apart joined by one 40 px-wide door.
floornav::KnowledgeBase door_width_kb(double scale_cm_per_px);
std::string door_width_plan_response();

/// Grid building with rooms 200 px apart, a door between grid neighbours on a
/// random spanning tree plus a few extra neighbour links.
struct Building {
  std::string id;
  floornav::DetectionSet dets;
  floornav::FloorGraph truth;
};
Building make_building(const std::string& id, std::size_t rooms, std::uint64_t seed);

/// Uniform random connected graph with unit-spaced synthetic geometry.
floornav::FloorGraph random_connected_graph(std::mt19937_64& rng, std::size_t n, double extra_edge_p);

/// Schema-valid random parser output plus detections for it.
std::pair<floornav::RawParse, floornav::DetectionSet> random_raw_parse(std::mt19937_64& rng);

std::shared_ptr<floornav::llm::MockProvider> planner_mock(std::vector<std::string> responses);

// ---- oracles --------------------------------------------------------------

/// Textbook full-matrix Levenshtein over Latin-1-folded code points.
double oracle_levenshtein_ratio(const std::string& a, const std::string& b);

/// Fewest edges over all simple paths by exhaustive DFS; -1 when unreachable.
int oracle_min_hops(const floornav::AdjacencyMatrix& a, std::size_t s, std::size_t d);

/// Component labels via boolean transitive closure.
std::vector<std::vector<std::size_t>> oracle_components(const floornav::AdjacencyMatrix& a);

/// Heading after a sequence, by summing signed quarter turns.
int oracle_heading_degrees(int start_degrees, const std::vector<floornav::Action>& actions);

/// Population mean and standard deviation.
std::pair<double, double> oracle_mean_sigma(const std::vector<double>& xs);

}  // namespace support
