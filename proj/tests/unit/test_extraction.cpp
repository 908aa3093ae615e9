#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "floornav/extraction.hpp"
#include "support.hpp"

using namespace floornav;
using nlohmann::json;

namespace {

bool has_issue(const std::vector<std::string>& issues, const std::string& needle) {
  for (const auto& i : issues) {
    if (i.find(needle) != std::string::npos) return true;
  }
  return false;
}

llm::Gateway parser_gateway(std::vector<std::string> responses) {
  auto mock = std::make_shared<llm::MockProvider>();
  mock->set_sequence(llm::TemplateId::parser, std::move(responses));
  return llm::Gateway(mock);
}

RoomNode at(const std::string& name, double x, double y) {
  RoomNode n;
  n.name = name;
  n.centroid = {x, y};
  return n;
}

}  // namespace

TEST_CASE("raw parse validation names each rule") {
  json j = {{"nodes_elements", {"A", "B", "C"}},
            {"adjacency_matrix", {{0, 1, 0}, {0, 0, 1}, {0, 1, 1}}},
            {"edges", json::array()}};
  try {
    raw_parse_from_json(j);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(has_issue(e.diagnostics(), "VALIDATION (2) symmetric"));
    CHECK(has_issue(e.diagnostics(), "VALIDATION (3) diagonal=0"));
  }

  j["adjacency_matrix"] = {{0, 1}, {1, 0}};
  CHECK(has_issue(check_raw_parse(RawParse{"", {"A", "B", "C"}, {}, {{0, 1}, {1, 0}}, {}, {}}),
                  "VALIDATION (1)"));
  CHECK_THROWS_AS(raw_parse_from_json(j), ParseError);

  const RawParse lonely{"", {"A", "B", "C"}, {}, {{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}, {}, {}};
  CHECK(has_issue(check_raw_parse(lonely), "VALIDATION (4) EVERY NODE MUST HAVE >= 1 EDGE: \"C\""));

  const RawParse twice{"", {"Hall", "hall"}, {}, {{0, 1}, {1, 0}}, {}, {}};
  CHECK(has_issue(check_raw_parse(twice), "duplicate node name"));

  CHECK_THROWS_AS(raw_parse_from_json(json::array()), ParseError);
  CHECK_THROWS_AS(raw_parse_from_json(json{{"nodes_elements", {"A"}}}), ParseError);
}

TEST_CASE("random schema-valid parses survive validation and graph building") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 150; ++trial) {
    auto [raw, dets] = support::random_raw_parse(rng);
    REQUIRE(check_raw_parse(raw).empty());
    CHECK(raw_parse_from_json(raw_parse_to_json(raw)).nodes_elements == raw.nodes_elements);

    const BuildResult b = build_graph(raw, dets);
    CHECK(validate_graph(b.graph).passed);
    const auto& m = raw.adjacency_matrix;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t k = i + 1; k < m.size(); ++k) {
        if (m[i][k] == 1) CHECK(b.graph.adjacent(raw.nodes_elements[i], raw.nodes_elements[k]));
      }
    }
    for (const Detection* d : dets.doors()) {
      int n = 0;
      for (const auto& e : b.graph.edges()) n += e.door_id == d->id ? 1 : 0;
      const bool loose = std::count(b.unassociated_doors.begin(), b.unassociated_doors.end(), d->id) == 1;
      CHECK(n == (loose ? 0 : 1));
    }

    // Breaking symmetry must always be caught.
    RawParse broken = raw;
    const std::size_t i = rng() % m.size();
    const std::size_t k = (i + 1 + rng() % (m.size() - 1)) % m.size();
    broken.adjacency_matrix[i][k] ^= 1;
    CHECK(has_issue(check_raw_parse(broken), "VALIDATION (2) symmetric"));
  }
}

TEST_CASE("sample apartment builds the expected graph") {
  const auto dets = support::apartment_detections();
  const RawParse raw = raw_parse_from_json(llm::extract_structured_payload(support::apartment_parser_response()));
  const BuildResult b = build_graph(raw, dets);
  const auto& e = b.graph.edges();
  REQUIRE(e.size() == 5);
  CHECK(e[0].from == "Cuisine");
  CHECK(e[0].to == "Cellier");
  CHECK(e[0].door_id == "Door_D2");
  CHECK(e[1].from == "Cuisine");
  CHECK(e[1].to == "Repas");
  CHECK(e[1].door_id == "Door_D3");
  CHECK(e[2].from == "Hall");
  CHECK(e[2].to == "Sejour");
  CHECK(e[2].door_id == "Door_D4");
  CHECK(e[3].from == "Cuisine");
  CHECK(e[3].to == "Hall");
  CHECK(e[3].door_id == "Door_D6");
  CHECK(e[4].from == "Repas");
  CHECK(e[4].to == "Sejour");
  CHECK_FALSE(e[4].door_id.has_value());

  const RoomNode& cuisine = b.graph.nodes()[0];
  CHECK(cuisine.centroid == Point{170, 150});
  CHECK(cuisine.size_m2 == doctest::Approx(11.85));
  REQUIRE(cuisine.dimensions);
  CHECK(cuisine.dimensions->width_m == doctest::Approx(3.5));

  const CriticReport r = critic_check(b.graph, dets);
  CHECK(r.passed);
  CHECK(r.issues.empty());
}

TEST_CASE("nearest two rooms break ties toward the lower index") {
  const std::vector<RoomNode> nodes = {at("A", 0, 0), at("B", 10, 0), at("C", 5, 10)};
  const auto p = nearest_two_rooms(nodes, {5, 0});
  REQUIRE(p);
  CHECK(p->first == 0);
  CHECK(p->second == 1);
  CHECK_FALSE(nearest_two_rooms({at("A", 0, 0)}, {1, 1}).has_value());
}

TEST_CASE("critic: spatial coherence flags only the outlier edge") {
  // Edge lengths {10,10,10,10,10,60}.
  const std::vector<RoomNode> nodes = {at("H", 0, 0),   at("A", 10, 0), at("B", 0, 10),
                                       at("C", -10, 0), at("D", 0, -10), at("F", 10, 10), at("E", 60, 0)};
  std::vector<GraphEdge> edges;
  for (const char* n : {"A", "B", "C", "D"}) edges.push_back({"H", n, std::nullopt, std::nullopt, 1.0});
  edges.push_back({"A", "F", std::nullopt, std::nullopt, 1.0});
  edges.push_back({"H", "E", std::nullopt, std::nullopt, 1.0});
  const FloorGraph g(nodes, edges);

  std::vector<double> lengths;
  for (const auto& e : g.edges()) {
    const auto& a = g.nodes()[*g.index_of(e.from)].centroid;
    const auto& b = g.nodes()[*g.index_of(e.to)].centroid;
    lengths.push_back(std::hypot(a.x - b.x, a.y - b.y));
  }
  const auto [mu, sigma] = support::oracle_mean_sigma(lengths);
  REQUIRE(60.0 > mu + 2 * sigma);
  REQUIRE(10.0 <= mu + 2 * sigma);

  const CriticReport r = critic_check(g, {});
  CHECK_FALSE(r.passed);
  CHECK(r.failed_checks == std::vector<CriticCheck>{CriticCheck::spatial_coherence});
  REQUIRE(r.flagged_edges.size() == 1);
  CHECK(r.flagged_edges[0] == std::pair<std::string, std::string>{"H", "E"});
}

TEST_CASE("critic: connectivity, isolation and door consistency") {
  const auto dets = support::apartment_detections();
  const FloorGraph split({at("Cuisine", 170, 150), at("Repas", 170, 390), at("Hall", 420, 150), at("Attic", 0, 0)},
                         {{"Cuisine", "Repas", std::string("Door_D3"), std::nullopt, 1.0},
                          {"Cuisine", "Repas", std::string("Door_D9"), std::nullopt, 1.0}});
  const CriticReport r = critic_check(split, dets);
  CHECK_FALSE(r.passed);
  CHECK(r.failed(CriticCheck::connectivity));
  CHECK(r.failed(CriticCheck::isolated_nodes));
  CHECK(r.failed(CriticCheck::door_edge_consistency));
  CHECK_FALSE(r.failed(CriticCheck::symmetry));
  CHECK(has_issue(r.issues, "Door_D2"));
  CHECK(has_issue(r.issues, "cites Door_D9"));
  CHECK(has_issue(r.issues, "\"Attic\" has no edges"));
  CHECK_FALSE(r.suggested_fixes.empty());

  const FloorGraph asym({at("A", 0, 0), at("B", 1, 0)}, {{"A", "B", std::nullopt, std::nullopt, 1.0}},
                        {{0, 1}, {0, 0}});
  CHECK(critic_check(asym, {}).failed(CriticCheck::symmetry));
}

TEST_CASE("retry loop feeds critic findings into the next parse") {
  const auto dets = support::apartment_labels_only();
  const auto prompts = llm::PromptLibrary::load_default();

  SUBCASE("recovers on the second attempt") {
    auto gw = parser_gateway({support::apartment_split_response(), support::apartment_parser_response()});
    const auto res = run_extraction(gw, prompts, "apartment.png", dets);
    CHECK_FALSE(res.degraded);
    REQUIRE(res.attempts.size() == 2);
    CHECK(res.attempts[0].outcome == "critic_failed");
    CHECK(res.attempts[1].outcome == "passed");
    const auto sent = gw.prompts(llm::TemplateId::parser);
    REQUIRE(sent.size() == 2);
    CHECK(sent[0].find("CORRECTIONS REQUIRED") == std::string::npos);
    CHECK(sent[1].find("CORRECTIONS REQUIRED") != std::string::npos);
    CHECK(sent[1].find("connectivity: graph splits into 2 components") != std::string::npos);
  }
  SUBCASE("gives up after max_retries + 1 attempts and flags the graph") {
    auto gw = parser_gateway({support::apartment_split_response()});
    const auto res = run_extraction(gw, prompts, "apartment.png", dets);
    CHECK(res.degraded);
    CHECK(res.attempts.size() == kDefaultCriticRetries + 1);
    CHECK(gw.call_count(llm::TemplateId::parser) == kDefaultCriticRetries + 1);
    CHECK(res.context.error_history.size() == kDefaultCriticRetries + 1);
    CHECK(res.report.failed(CriticCheck::connectivity));
  }
  SUBCASE("custom retry bound") {
    auto gw = parser_gateway({support::apartment_split_response()});
    const auto res = run_extraction(gw, prompts, "apartment.png", dets, {0, false});
    CHECK(res.attempts.size() == 1);
    CHECK(res.degraded);
  }
  SUBCASE("parse errors count as attempts") {
    auto gw = parser_gateway({"I cannot read this plan.", support::apartment_parser_response()});
    const auto res = run_extraction(gw, prompts, "apartment.png", dets);
    REQUIRE(res.attempts.size() == 2);
    CHECK(res.attempts[0].outcome == "parse_error");
    CHECK_FALSE(res.degraded);
  }
  SUBCASE("no parseable payload at all") {
    auto gw = parser_gateway({"nothing useful"});
    try {
      run_extraction(gw, prompts, "apartment.png", dets);
      FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
      CHECK(e.attempts().size() == kDefaultCriticRetries + 1);
    }
  }
}

TEST_CASE("ungrounded parse keeps the model's door ids") {
  const auto dets = support::apartment_labels_only();
  const RawParse raw = raw_parse_from_json(llm::extract_structured_payload(support::apartment_parser_response()));
  const BuildResult b = build_graph(raw, dets);
  CHECK(b.graph.size() == 5);
  bool d3 = false;
  for (const auto& e : b.graph.edges()) d3 = d3 || (e.door_id == "Door_D3" && e.from == "Cuisine");
  CHECK(d3);
  const CriticReport r = critic_check(b.graph, dets);
  CHECK(r.passed);
  CHECK(has_issue(r.notes, "door_edge_consistency skipped"));
}

TEST_CASE("heuristic extraction works from detections alone") {
  const auto res = run_heuristic_extraction(support::apartment_detections());
  CHECK_FALSE(res.degraded);
  CHECK(res.graph.size() == 5);
  CHECK(res.graph.edges().size() == 4);
  CHECK(res.graph.adjacent("Cuisine", "Hall"));

  const auto json_report = extraction_report_to_json(res);
  CHECK(json_report["degraded"] == false);
  CHECK(json_report["attempts"].size() == 1);
}

TEST_CASE("model critic findings are advisory") {
  auto mock = std::make_shared<llm::MockProvider>();
  mock->set_sequence(llm::TemplateId::self_critic,
                     {R"({"is_valid": false, "issues": ["Cellier looks too small"], "suggested_fixes": []})"});
  llm::Gateway gw(mock);
  const auto prompts = llm::PromptLibrary::load_default();
  const auto res = run_heuristic_extraction(support::apartment_detections());
  const CriticReport r = critic_check(res.graph, support::apartment_detections(), {&gw, &prompts});
  CHECK(r.passed);
  CHECK(r.advisory_issues == std::vector<std::string>{"Cellier looks too small"});
}
