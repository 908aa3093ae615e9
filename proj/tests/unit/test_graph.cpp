#include <doctest.h>

#include <random>

#include "floornav/errors.hpp"
#include "floornav/graph.hpp"
#include "support.hpp"

using namespace floornav;

namespace {

RoomNode room(const std::string& name, double x = 0, double y = 0) {
  RoomNode n;
  n.name = name;
  n.centroid = {x, y};
  return n;
}

GraphEdge passage(const std::string& a, const std::string& b) { return {a, b, std::nullopt, std::nullopt, 1.0}; }

FloorGraph diamond() {
  // A - B - D and A - C - D; B sorts before C so BFS prefers it.
  return FloorGraph({room("A"), room("B"), room("C"), room("D")},
                    {passage("A", "B"), passage("A", "C"), passage("B", "D"), passage("C", "D")});
}

}  // namespace

TEST_CASE("adjacency is derived from the edge list") {
  const FloorGraph g = diamond();
  const AdjacencyMatrix expected = {{0, 1, 1, 0}, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 1, 1, 0}};
  CHECK(g.adjacency() == expected);
  CHECK(validate_graph(g).passed);
  CHECK(g.adjacent("a", "B "));
  CHECK_FALSE(g.adjacent("A", "D"));
  CHECK(g.degree(0) == 2);
}

TEST_CASE("unknown edge endpoints are rejected by name") {
  try {
    FloorGraph({room("A"), room("B")}, {passage("A", "Storage")});
    FAIL("expected UnknownRoomError");
  } catch (const UnknownRoomError& e) {
    CHECK(e.room() == "Storage");
  }
  CHECK_THROWS_AS(diamond().require("Attic"), UnknownRoomError);
}

TEST_CASE("validate_graph reports each broken invariant") {
  SUBCASE("asymmetric matrix") {
    const FloorGraph g({room("A"), room("B")}, {passage("A", "B")}, {{0, 1}, {0, 0}});
    const auto r = validate_graph(g);
    CHECK_FALSE(r.passed);
    CHECK(r.has(rule::symmetry));
  }
  SUBCASE("non-binary value and self loop") {
    const FloorGraph g({room("A"), room("B")}, {passage("A", "B")}, {{1, 2}, {2, 0}});
    CHECK(validate_graph(g).has(rule::value_domain));
  }
  SUBCASE("ragged matrix") {
    const FloorGraph g({room("A"), room("B")}, {passage("A", "B")}, {{0, 1}});
    CHECK(validate_graph(g).has(rule::length_consistency));
  }
  SUBCASE("isolated node") {
    const FloorGraph g({room("A"), room("B"), room("C")}, {passage("A", "B")});
    const auto r = validate_graph(g);
    CHECK(r.has(rule::min_degree));
    bool named = false;
    for (const auto& v : r.violations) named = named || v.element == "C";
    CHECK(named);
  }
  SUBCASE("matrix entry without an edge") {
    const FloorGraph g({room("A"), room("B"), room("C")}, {passage("A", "B"), passage("B", "C")},
                       {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    CHECK(validate_graph(g).has(rule::edge_matrix_agreement));
  }
}

TEST_CASE("BFS uses ascending index tie-break and canonical names") {
  const auto p = bfs_shortest_path(diamond(), " a", "d");
  REQUIRE(p);
  CHECK(*p == std::vector<std::string>{"A", "B", "D"});
  CHECK(*bfs_shortest_path(diamond(), "C", "C") == std::vector<std::string>{"C"});

  const FloorGraph split({room("A"), room("B"), room("C"), room("D")}, {passage("A", "B"), passage("C", "D")});
  CHECK_FALSE(bfs_shortest_path(split, "A", "D").has_value());
  CHECK_THROWS_AS(bfs_shortest_path(split, "A", "Nowhere"), UnknownRoomError);
}

TEST_CASE("BFS hop counts match the exhaustive simple-path oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const FloorGraph g = support::random_connected_graph(rng, 2 + rng() % 7, 0.25);
    for (std::size_t s = 0; s < g.size(); ++s) {
      for (std::size_t d = 0; d < g.size(); ++d) {
        const auto p = bfs_shortest_path(g, g.nodes()[s].name, g.nodes()[d].name);
        REQUIRE(p);
        CHECK(static_cast<int>(p->size()) - 1 == support::oracle_min_hops(g.adjacency(), s, d));
        for (std::size_t i = 0; i + 1 < p->size(); ++i) CHECK(g.adjacent((*p)[i], (*p)[i + 1]));
      }
    }
  }
}

TEST_CASE("connected components agree with the transitive-closure oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<RoomNode> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back(room("R" + std::to_string(i)));
    std::vector<GraphEdge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng() % 4 == 0) edges.push_back(passage(nodes[i].name, nodes[j].name));
      }
    }
    const FloorGraph g(nodes, edges);
    const auto got = connected_components(g);
    const auto want = support::oracle_components(g.adjacency());
    REQUIRE(got.size() == want.size());
    for (std::size_t c = 0; c < got.size(); ++c) {
      REQUIRE(got[c].size() == want[c].size());
      for (std::size_t k = 0; k < got[c].size(); ++k) CHECK(got[c][k] == nodes[want[c][k]].name);
    }
  }
}

TEST_CASE("graph document round-trips") {
  RoomNode a = room("Cuisine", 170, 150);
  a.size_m2 = 11.85;
  a.dimensions = Dimensions{3.5, 3.4};
  a.ocr_confidence = 0.95;
  RoomNode b = room("Repas", 170, 390);
  b.surface = "smooth tile floor";
  RoomNode c = room("Cellier", 50, 50);
  c.synthetic_centroid = true;
  const FloorGraph g({a, b, c}, {{"Cuisine", "Repas", std::string("Door_D3"), BBox{160, 260, 180, 280}, 1.0},
                                 passage("Cuisine", "Cellier")});
  const auto j = graph_to_json(g);
  CHECK(j["edges"][0]["via"] == "Door_D3");
  CHECK(j["edges"][0]["door_bbox"].dump() == "[160,260,180,280]");
  CHECK(j["rooms_info"][0]["size"] == "11.85 m2");
  CHECK(graph_from_json(j) == g);
  CHECK(graph_from_json(nlohmann::json::parse(j.dump())) == g);
}
