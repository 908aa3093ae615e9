#include <doctest.h>

#include <random>

#include "floornav/walkthrough.hpp"
#include "support.hpp"

using namespace floornav;
using nlohmann::json;

namespace {

TruthManifest apartment_truth(const KnowledgeBase& kb) {
  TruthManifest t;
  t.graph = kb.graph;
  t.checkpoints = CheckpointTable::auto_assign(kb.graph);
  return t;
}

Replanner replanner_for(const KnowledgeBase& kb) {
  return [&kb](const std::string& from, const std::string& to) { return reroute_from(kb, from, to); };
}

// Independent rounding: exact quotient and remainder, half rounds up.
long long oracle_basis_points(long long s, long long t) {
  const long long q = 10000 * s / t;
  const long long r = 10000 * s % t;
  return q + (2 * r >= t ? 1 : 0);
}

}  // namespace

TEST_CASE("checkpoint table and confirmation") {
  const auto f = support::build_apartment();
  const auto table = CheckpointTable::auto_assign(f.kb.graph);
  REQUIRE(table.all().size() == 5);
  CHECK(table.by_marker(1)->node == "Cuisine");
  CHECK(table.for_room("sejour")->marker_id == 5);
  CHECK(table.by_marker(6) == nullptr);

  CheckpointTable copy = table;
  CHECK_THROWS_AS(copy.add({3, "Hall"}), Error);

  const Checkpoint& repas = *table.for_room("Repas");
  const auto ok = confirm_checkpoint(repas, 2, table);
  CHECK(ok.confirmed);
  CHECK(ok.detected_node == "Repas");
  const auto wrong = confirm_checkpoint(repas, 4, table);
  CHECK_FALSE(wrong.confirmed);
  CHECK(wrong.detected_node == "Hall");
  try {
    confirm_checkpoint(repas, 42, table);
    FAIL("expected UnknownMarkerError");
  } catch (const UnknownMarkerError& e) {
    CHECK(e.marker() == 42);
  }
}

TEST_CASE("truth manifests") {
  const auto f = support::build_apartment();
  json j = {{"graph", graph_to_json(f.kb.graph)}, {"inaccessible", {"cellier"}}};
  const TruthManifest t = truth_from_json(j);
  CHECK(t.checkpoints.all().size() == 5);
  CHECK(t.is_inaccessible("Cellier"));
  CHECK_FALSE(t.is_inaccessible("Hall"));
  const TruthManifest back = truth_from_json(truth_to_json(t));
  CHECK(back.checkpoints.all() == t.checkpoints.all());
  CHECK(back.inaccessible == t.inaccessible);

  j["checkpoints"] = {{{"marker_id", 7}, {"node", "hall"}}, {{"marker_id", 7}, {"node", "Repas"}}};
  CHECK_THROWS_AS(truth_from_json(j), IngestError);
  j["checkpoints"] = {{{"marker_id", 7}, {"node", "Garage"}}};
  CHECK_THROWS_AS(truth_from_json(j), IngestError);
  j["checkpoints"] = {{{"marker_id", 7}, {"node", "hall"}}};
  CHECK(truth_from_json(j).checkpoints.by_marker(7)->node == "Hall");
  CHECK_THROWS_AS(truth_from_json(json::array()), IngestError);
}

TEST_CASE("route classes follow hop counts") {
  CHECK(classify_hops(0) == RouteClass::short_route);
  CHECK(classify_hops(2) == RouteClass::short_route);
  CHECK(classify_hops(3) == RouteClass::medium_route);
  CHECK(classify_hops(5) == RouteClass::medium_route);
  CHECK(classify_hops(6) == RouteClass::long_route);
  CHECK(parse_route_class("Medium") == RouteClass::medium_route);
  CHECK_FALSE(parse_route_class("tiny").has_value());

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const FloorGraph g = support::random_connected_graph(rng, 2 + rng() % 9, 0.1);
    const std::size_t s = rng() % g.size();
    const std::size_t d = rng() % g.size();
    const int hops = support::oracle_min_hops(g.adjacency(), s, d);
    const auto c = classify_route(g, g.nodes()[s].name, g.nodes()[d].name);
    REQUIRE(c);
    CHECK(*c == (hops <= 2 ? RouteClass::short_route : hops <= 5 ? RouteClass::medium_route : RouteClass::long_route));
  }
}

TEST_CASE("success rate formatting") {
  CHECK(format_sr(12, 13) == "92.31 (12)");
  CHECK(format_sr(8, 13) == "61.54 (8)");
  CHECK(format_sr(0, 5) == "0.00 (0)");
  CHECK(format_sr(5, 5) == "100.00 (5)");
  CHECK(format_sr(2, 3) == "66.67 (2)");
  CHECK_THROWS_AS(sr_basis_points(0, 0), EmptySuiteError);
  CHECK_THROWS_AS(aggregate({}), EmptySuiteError);

  for (int t = 1; t <= 400; ++t) {
    for (int s = 0; s <= t; s += 1 + t / 37) CHECK(sr_basis_points(s, t) == oracle_basis_points(s, t));
  }
}

TEST_CASE("aggregation by class") {
  std::vector<TrialResult> trials;
  for (int i = 0; i < 13; ++i) trials.push_back({"s" + std::to_string(i), RouteClass::short_route, i < 12, 0, {}});
  for (int i = 0; i < 13; ++i) trials.push_back({"m" + std::to_string(i), RouteClass::medium_route, i < 8, 0, {}});
  const EvalReport r = aggregate(trials);
  CHECK(r.short_routes.successes == 12);
  CHECK(r.medium_routes.total == 13);
  CHECK(r.long_routes.total == 0);
  CHECK(r.overall.total == 26);
  const std::string table = render_eval_table(r);
  CHECK(table.find("Short      | 92.31 (12)      | 13") != std::string::npos);
  CHECK(table.find("Medium     | 61.54 (8)       | 13") != std::string::npos);
  CHECK(table.find("Long       | n/a (0)         | 0") != std::string::npos);
  CHECK(table.find("Overall    | 76.92 (20)      | 26") != std::string::npos);
  const json j = eval_report_to_json(r);
  CHECK(j["classes"]["short"]["sr_percent"] == "92.31");
  CHECK(j["classes"]["long"]["sr_percent"].is_null());
  CHECK(j["trials"].size() == 26);
}

TEST_CASE("walking a plan on an identical truth graph succeeds") {
  const auto f = support::build_apartment();
  const auto truth = apartment_truth(f.kb);
  for (const auto& a : f.kb.graph.nodes()) {
    for (const auto& b : f.kb.graph.nodes()) {
      const NavPlan plan = navigate(f.kb, a.name, b.name);
      const TrialResult r = simulate_walk(plan, truth, FaultModel::none(), a.name + "-" + b.name, replanner_for(f.kb));
      CHECK(r.success);
      CHECK(r.reroutes == 0);
      CHECK_FALSE(r.failure_reason.has_value());
    }
  }
}

TEST_CASE("a wrong marker reroutes from the scanned room") {
  const auto f = support::build_apartment();
  const auto truth = apartment_truth(f.kb);
  const NavPlan plan = navigate(f.kb, "Cuisine", "Sejour");
  const TrialResult r =
      simulate_walk(plan, truth, FaultModel::scripted({{0, 4}}), "cuisine-sejour", replanner_for(f.kb));
  CHECK(r.success);
  CHECK(r.reroutes == 1);
}

TEST_CASE("reroutes are bounded") {
  const auto f = support::build_apartment();
  const auto truth = apartment_truth(f.kb);
  const NavPlan plan = navigate(f.kb, "Cuisine", "Sejour");
  const TrialResult r = simulate_walk(plan, truth, FaultModel::scripted({{0, 4}, {1, 4}, {2, 4}, {3, 4}}), "loop",
                                      replanner_for(f.kb));
  CHECK_FALSE(r.success);
  CHECK(r.reroutes == kMaxReroutes + 1);
  CHECK(r.failure_reason->find("reroute limit") != std::string::npos);
}

TEST_CASE("plans that disagree with the truth fail") {
  const auto f = support::build_apartment();
  const NavPlan plan = navigate(f.kb, "Cuisine", "Sejour");

  SUBCASE("missing connection") {
    std::vector<GraphEdge> edges;
    for (const auto& e : f.kb.graph.edges()) {
      if (!(e.from == "Cuisine" && e.to == "Repas")) edges.push_back(e);
    }
    TruthManifest truth;
    truth.graph = FloorGraph(f.kb.graph.nodes(), edges);
    truth.checkpoints = CheckpointTable::auto_assign(truth.graph);
    const auto r = simulate_walk(plan, truth, FaultModel::none(), "x", replanner_for(f.kb));
    CHECK_FALSE(r.success);
    CHECK(r.failure_reason == "invalid transition: Cuisine -> Repas");
  }
  SUBCASE("inaccessible room") {
    auto truth = apartment_truth(f.kb);
    truth.inaccessible.insert("repas");
    const auto r = simulate_walk(plan, truth, FaultModel::none(), "x", replanner_for(f.kb));
    CHECK_FALSE(r.success);
    CHECK(r.failure_reason == "entered inaccessible room: Repas");
  }
  SUBCASE("plan that stops short") {
    NavPlan shortened = plan;
    shortened.steps.erase(shortened.steps.begin() + 1, shortened.steps.end() - 1);
    shortened.steps.back().current_position = "Repas";
    const auto r = simulate_walk(shortened, apartment_truth(f.kb), FaultModel::none(), "x", replanner_for(f.kb));
    CHECK_FALSE(r.success);
    CHECK(r.failure_reason == "did not reach Sejour (stopped at Repas)");
  }
}

TEST_CASE("walk session drives scans step by step") {
  const auto f = support::build_apartment();
  const auto table = CheckpointTable::auto_assign(f.kb.graph);
  WalkSession s(navigate(f.kb, "Cuisine", "Sejour"), &table, replanner_for(f.kb));
  CHECK(s.position() == "Cuisine");
  REQUIRE(s.expected_checkpoint());
  CHECK(s.expected_checkpoint()->node == "Repas");

  const auto unknown = s.scan(99);
  CHECK(unknown.kind == WalkSession::ScanResult::Kind::unknown_marker);
  CHECK(s.position() == "Cuisine");

  CHECK(s.scan(2).kind == WalkSession::ScanResult::Kind::confirmed);
  CHECK(s.position() == "Repas");
  CHECK(s.expected_checkpoint() == nullptr);
  s.complete_step();
  CHECK(s.expected_checkpoint()->node == "Sejour");
  const auto off = s.scan(4);
  CHECK(off.kind == WalkSession::ScanResult::Kind::mismatch);
  CHECK(s.position() == "Hall");
  CHECK(s.plan().reroute_from_checkpoint);
  CHECK(s.plan().start == "Hall");
  CHECK(s.scan(5).kind == WalkSession::ScanResult::Kind::confirmed);
  s.complete_step();
  CHECK(s.done());
  CHECK(s.arrived());
  CHECK(s.reroutes() == 1);
}

TEST_CASE("suite evaluation is deterministic under seeded faults") {
  std::vector<RouteSpec> routes;
  const auto b = support::make_building("B1", 10, 3);
  const auto ex = run_heuristic_extraction(b.dets);
  const KnowledgeBase kb = build_knowledge_base(ex.graph, b.dets);
  TruthManifest truth;
  truth.graph = b.truth;
  truth.checkpoints = CheckpointTable::auto_assign(b.truth);
  for (std::size_t i = 0; i < b.truth.size(); ++i) {
    routes.push_back({"r" + std::to_string(i), b.truth.nodes()[i].name, b.truth.nodes()[(i + 5) % 10].name, {}});
  }
  const auto a = evaluate_suite(routes, kb, truth, FaultModel::seeded(77, 0.5));
  const auto c = evaluate_suite(routes, kb, truth, FaultModel::seeded(77, 0.5));
  CHECK(a.trials == c.trials);
  CHECK(render_eval_table(a) == render_eval_table(c));

  int rerouted = 0;
  for (const auto& t : a.trials) {
    CHECK(t.reroutes <= 1);
    rerouted += t.reroutes;
  }
  CHECK(rerouted > 0);

  const auto clean = evaluate_suite(routes, kb, truth, FaultModel::seeded(77, 0.0));
  CHECK(clean.overall.successes == clean.overall.total);

  routes.push_back({"ghost", "Attic", b.truth.nodes()[0].name, RouteClass::short_route});
  const auto with_ghost = evaluate_suite(routes, kb, truth, FaultModel::none());
  CHECK(with_ghost.trials.back().failure_reason == "endpoint missing from truth: Attic");
  CHECK_FALSE(with_ghost.trials.back().success);

  CHECK_THROWS_AS(evaluate_suite({}, kb, truth, FaultModel::none()), EmptySuiteError);
}

TEST_CASE("route suites parse from JSON") {
  const auto routes = route_suite_from_json(json::parse(R"({"routes": [
    {"route_id": "a", "start": "Hall", "destination": "Repas", "class": "short"},
    {"start": "Hall", "destination": "Cellier"}]})"));
  REQUIRE(routes.size() == 2);
  CHECK(routes[0].route_class == RouteClass::short_route);
  CHECK(routes[1].route_id == "route-2");
  CHECK_THROWS_AS(route_suite_from_json(json::parse(R"([{"start": "Hall"}])")), IngestError);
  CHECK_THROWS_AS(route_suite_from_json(json::parse(R"([{"start": "A", "destination": "B", "class": "tiny"}])")),
                  IngestError);
}
