#include "floornav/walkthrough.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "floornav/text.hpp"

namespace floornav {

using nlohmann::json;

CheckpointTable::CheckpointTable(std::vector<Checkpoint> checkpoints) {
  for (auto& c : checkpoints) add(std::move(c));
}

CheckpointTable CheckpointTable::auto_assign(const FloorGraph& g) {
  CheckpointTable t;
  for (std::size_t i = 0; i < g.size(); ++i) t.add({static_cast<int>(i + 1), g.nodes()[i].name});
  return t;
}

void CheckpointTable::add(Checkpoint c) {
  if (by_marker(c.marker_id)) {
    throw Error("marker " + std::to_string(c.marker_id) + " is registered twice");
  }
  checkpoints_.push_back(std::move(c));
}

const Checkpoint* CheckpointTable::by_marker(int marker) const {
  for (const auto& c : checkpoints_) {
    if (c.marker_id == marker) return &c;
  }
  return nullptr;
}

const Checkpoint* CheckpointTable::for_room(std::string_view room) const {
  for (const auto& c : checkpoints_) {
    if (text::names_equal(c.node, room)) return &c;
  }
  return nullptr;
}

CheckpointResult confirm_checkpoint(const Checkpoint& expected, int scanned, const CheckpointTable& table) {
  const Checkpoint* hit = table.by_marker(scanned);
  if (!hit) throw UnknownMarkerError(scanned);
  if (scanned == expected.marker_id) return {true, hit->node};
  return {false, hit->node};
}

bool TruthManifest::is_inaccessible(std::string_view room) const {
  return inaccessible.count(text::name_key(room)) > 0;
}

TruthManifest truth_from_json(const json& j) {
  if (!j.is_object() || !j.contains("graph")) throw IngestError("truth manifest needs a \"graph\" object");
  TruthManifest t;
  t.graph = graph_from_json(j["graph"]);
  std::vector<std::string> problems;
  try {
    if (j.contains("checkpoints")) {
      for (const auto& c : j["checkpoints"]) {
        Checkpoint cp{c.at("marker_id").get<int>(), c.at("node").get<std::string>()};
        if (!t.graph.index_of(cp.node)) {
          problems.push_back("checkpoint " + std::to_string(cp.marker_id) + " names unknown room \"" + cp.node + "\"");
          continue;
        }
        cp.node = t.graph.node(cp.node).name;
        if (t.checkpoints.by_marker(cp.marker_id)) {
          problems.push_back("marker " + std::to_string(cp.marker_id) + " is registered twice");
          continue;
        }
        t.checkpoints.add(std::move(cp));
      }
    } else {
      t.checkpoints = CheckpointTable::auto_assign(t.graph);
    }
    for (const auto& room : j.value("inaccessible", json::array())) {
      const auto name = room.get<std::string>();
      if (!t.graph.index_of(name)) problems.push_back("inaccessible room \"" + name + "\" is not in the graph");
      t.inaccessible.insert(text::name_key(name));
    }
    if (j.contains("scale_cm_per_px") && !j["scale_cm_per_px"].is_null()) {
      t.scale_cm_per_px = j["scale_cm_per_px"].get<double>();
    }
  } catch (const json::exception& e) {
    throw IngestError(std::string("truth manifest: ") + e.what());
  }
  if (!problems.empty()) throw IngestError("truth manifest is invalid: " + problems.front(), problems);
  return t;
}

json truth_to_json(const TruthManifest& t) {
  json cps = json::array();
  for (const auto& c : t.checkpoints.all()) cps.push_back({{"marker_id", c.marker_id}, {"node", c.node}});
  json inacc = json::array();
  for (const auto& n : t.graph.nodes()) {
    if (t.is_inaccessible(n.name)) inacc.push_back(n.name);
  }
  json j = {{"graph", graph_to_json(t.graph)}, {"checkpoints", cps}, {"inaccessible", inacc}};
  if (t.scale_cm_per_px) j["scale_cm_per_px"] = *t.scale_cm_per_px;
  return j;
}

TruthManifest load_truth_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot read truth manifest " + path.string());
  try {
    return truth_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw IngestError("truth manifest " + path.string() + " is not valid JSON: " + e.what());
  }
}

FaultModel FaultModel::scripted(std::vector<std::pair<int, int>> injections) {
  FaultModel f;
  f.kind = Kind::scripted;
  f.injections = std::move(injections);
  f.max_faults_per_trial = static_cast<int>(f.injections.size());
  return f;
}

FaultModel FaultModel::seeded(std::uint64_t seed, double probability, int max_faults_per_trial) {
  FaultModel f;
  f.kind = Kind::seeded;
  f.seed = seed;
  f.probability = probability;
  f.max_faults_per_trial = max_faults_per_trial;
  return f;
}

WalkSession::WalkSession(NavPlan plan, const CheckpointTable* checkpoints, Replanner replanner, int max_reroutes)
    : plan_(std::move(plan)),
      checkpoints_(checkpoints),
      replanner_(std::move(replanner)),
      max_reroutes_(max_reroutes),
      destination_(plan_.destination),
      position_(plan_.start) {
  if (plan_.steps.empty()) fail("plan has no steps");
}

const Checkpoint* WalkSession::expected_checkpoint() const {
  if (done_ || !checkpoints_) return nullptr;
  const NavStep& s = step();
  const auto action = parse_action(s.action);
  if (!action || !action->is_move()) return nullptr;
  return checkpoints_->for_room(s.current_position);
}

void WalkSession::complete_step() {
  if (!done_) finish_step();
}

void WalkSession::finish_step() {
  position_ = step().current_position;
  ++index_;
  if (index_ >= plan_.steps.size()) {
    done_ = true;
    arrived_ = text::names_equal(position_, destination_);
    if (!arrived_) failure_ = "did not reach " + destination_ + " (stopped at " + position_ + ")";
  }
}

WalkSession::ScanResult WalkSession::scan(int marker) {
  ScanResult r;
  const Checkpoint* expected = expected_checkpoint();
  if (!expected) {
    r.kind = ScanResult::Kind::confirmed;
    complete_step();
    return r;
  }
  CheckpointResult c;
  try {
    c = confirm_checkpoint(*expected, marker, *checkpoints_);
  } catch (const UnknownMarkerError& e) {
    r.kind = ScanResult::Kind::unknown_marker;
    r.message = e.what();
    return r;
  }
  r.detected_node = c.detected_node;
  if (c.confirmed) {
    r.kind = ScanResult::Kind::confirmed;
    r.message = "checkpoint " + std::to_string(marker) + " confirmed at " + c.detected_node;
    finish_step();
    return r;
  }
  r.kind = ScanResult::Kind::mismatch;
  r.message = "expected marker " + std::to_string(expected->marker_id) + " at " + expected->node + ", scanned " +
              std::to_string(marker) + " at " + c.detected_node;
  position_ = c.detected_node;
  ++reroutes_;
  if (reroutes_ > max_reroutes_) {
    fail("reroute limit reached after " + std::to_string(max_reroutes_) + " reroutes");
    return r;
  }
  if (!replanner_) {
    fail("checkpoint mismatch at " + c.detected_node + " and no replanner");
    return r;
  }
  try {
    NavPlan next = replanner_(c.detected_node, destination_);
    next.reroute_from_checkpoint = true;
    plan_ = std::move(next);
  } catch (const Error& e) {
    fail(e.what());
    return r;
  }
  index_ = 0;
  if (plan_.steps.empty()) fail("reroute plan has no steps");
  return r;
}

void WalkSession::fail(std::string reason) {
  done_ = true;
  arrived_ = false;
  failure_ = std::move(reason);
}

std::string_view to_string(RouteClass c) {
  switch (c) {
    case RouteClass::short_route: return "short";
    case RouteClass::medium_route: return "medium";
    case RouteClass::long_route: return "long";
  }
  return "short";
}

std::optional<RouteClass> parse_route_class(std::string_view s) {
  const std::string k = text::name_key(s);
  if (k == "short") return RouteClass::short_route;
  if (k == "medium") return RouteClass::medium_route;
  if (k == "long") return RouteClass::long_route;
  return std::nullopt;
}

RouteClass classify_hops(std::size_t hops) {
  if (hops <= 2) return RouteClass::short_route;
  if (hops <= 5) return RouteClass::medium_route;
  return RouteClass::long_route;
}

std::optional<RouteClass> classify_route(const FloorGraph& truth, std::string_view s, std::string_view d) {
  if (!truth.index_of(s) || !truth.index_of(d)) return std::nullopt;
  const auto path = bfs_shortest_path(truth, s, d);
  if (!path) return std::nullopt;
  return classify_hops(path->size() - 1);
}

namespace {

class FaultState {
 public:
  FaultState(const FaultModel& model, const std::string& route_id)
      : model_(model), rng_(model.seed ^ text::fnv1a64(route_id)) {}

  /// Marker to report at this arrival.
  int scan(int arrival, const Checkpoint& expected, const CheckpointTable& table) {
    if (used_ >= model_.max_faults_per_trial) return expected.marker_id;
    if (model_.kind == FaultModel::Kind::scripted) {
      for (const auto& [at, marker] : model_.injections) {
        if (at == arrival) {
          ++used_;
          return marker;
        }
      }
    } else if (model_.kind == FaultModel::Kind::seeded) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      if (u < model_.probability) {
        std::vector<int> wrong;
        for (const auto& c : table.all()) {
          if (!text::names_equal(c.node, expected.node)) wrong.push_back(c.marker_id);
        }
        if (!wrong.empty()) {
          ++used_;
          return wrong[rng_() % wrong.size()];
        }
      }
    }
    return expected.marker_id;
  }

 private:
  const FaultModel& model_;
  std::mt19937_64 rng_;
  int used_ = 0;
};

}  // namespace

TrialResult simulate_walk(const NavPlan& plan, const TruthManifest& truth, const FaultModel& fault,
                          const std::string& route_id, const Replanner& replanner) {
  TrialResult result;
  result.route_id = route_id;
  result.route_class = classify_route(truth.graph, plan.start, plan.destination).value_or(RouteClass::long_route);

  WalkSession session(plan, &truth.checkpoints, replanner);
  if (!truth.graph.index_of(plan.start)) {
    session.fail("start room " + plan.start + " is not in the truth graph");
  } else if (truth.is_inaccessible(plan.start)) {
    session.fail("entered inaccessible room: " + plan.start);
  }
  FaultState faults(fault, route_id);
  int arrival = 0;
  while (!session.done()) {
    const std::string& here = session.position();
    const std::string next = session.step().current_position;
    if (!text::names_equal(here, next)) {
      if (!truth.graph.adjacent(here, next)) {
        session.fail("invalid transition: " + here + " -> " + next);
        break;
      }
      if (truth.is_inaccessible(next)) {
        session.fail("entered inaccessible room: " + next);
        break;
      }
    }
    if (const Checkpoint* cp = session.expected_checkpoint()) {
      const int marker = faults.scan(arrival++, *cp, truth.checkpoints);
      const auto r = session.scan(marker);
      if (r.kind == WalkSession::ScanResult::Kind::mismatch && !session.done() &&
          truth.is_inaccessible(session.position())) {
        session.fail("entered inaccessible room: " + session.position());
      }
    } else {
      session.complete_step();
    }
  }
  result.reroutes = session.reroutes();
  result.success = session.arrived();
  if (!result.success) result.failure_reason = session.failure().value_or("did not reach destination");
  return result;
}

NavPlan reroute_from(const KnowledgeBase& kb, std::string_view current, std::string_view d,
                     const NavigateOptions& options) {
  NavPlan p = navigate(kb, current, d, options);
  p.reroute_from_checkpoint = true;
  return p;
}

std::vector<RouteSpec> route_suite_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("routes") ? j["routes"] : j;
  if (!arr.is_array()) throw IngestError("route suite must be a JSON array or {\"routes\": [...]}");
  std::vector<RouteSpec> routes;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& r = arr[i];
    const std::string where = "route " + std::to_string(i + 1);
    if (!r.is_object() || !r.contains("start") || !r.contains("destination") || !r["start"].is_string() ||
        !r["destination"].is_string()) {
      problems.push_back(where + ": needs string \"start\" and \"destination\"");
      continue;
    }
    RouteSpec spec;
    spec.route_id = r.contains("route_id") && r["route_id"].is_string() ? r["route_id"].get<std::string>()
                                                                       : "route-" + std::to_string(i + 1);
    spec.start = r["start"].get<std::string>();
    spec.destination = r["destination"].get<std::string>();
    if (r.contains("class") && r["class"].is_string()) {
      spec.route_class = parse_route_class(r["class"].get<std::string>());
      if (!spec.route_class) problems.push_back(where + ": class must be short, medium or long");
    }
    routes.push_back(std::move(spec));
  }
  if (!problems.empty()) throw IngestError("route suite is invalid: " + problems.front(), problems);
  return routes;
}

std::vector<RouteSpec> load_route_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot read route suite " + path.string());
  try {
    return route_suite_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw IngestError("route suite " + path.string() + " is not valid JSON: " + e.what());
  }
}

long long sr_basis_points(int successes, int total) {
  if (total <= 0) throw EmptySuiteError();
  return (static_cast<long long>(successes) * 20000 + total) / (2LL * total);
}

std::string format_sr(int successes, int total) {
  const long long bp = sr_basis_points(successes, total);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%lld.%02lld (%d)", bp / 100, bp % 100, successes);
  return buf;
}

const ClassStats& EvalReport::stats(RouteClass c) const {
  switch (c) {
    case RouteClass::short_route: return short_routes;
    case RouteClass::medium_route: return medium_routes;
    case RouteClass::long_route: return long_routes;
  }
  return overall;
}

EvalReport aggregate(std::vector<TrialResult> trials) {
  if (trials.empty()) throw EmptySuiteError();
  EvalReport r;
  for (const auto& t : trials) {
    ClassStats& c = t.route_class == RouteClass::short_route    ? r.short_routes
                    : t.route_class == RouteClass::medium_route ? r.medium_routes
                                                                : r.long_routes;
    ++c.total;
    ++r.overall.total;
    if (t.success) {
      ++c.successes;
      ++r.overall.successes;
    }
  }
  r.trials = std::move(trials);
  return r;
}

EvalReport evaluate_suite(const std::vector<RouteSpec>& routes, const KnowledgeBase& kb, const TruthManifest& truth,
                          const FaultModel& fault, const NavigateOptions& options) {
  if (routes.empty()) throw EmptySuiteError();
  const Replanner replanner = [&](const std::string& from, const std::string& to) {
    return reroute_from(kb, from, to, options);
  };
  std::vector<TrialResult> trials;
  for (const auto& route : routes) {
    TrialResult t;
    t.route_id = route.route_id;
    t.route_class = route.route_class.value_or(
        classify_route(truth.graph, route.start, route.destination).value_or(RouteClass::long_route));
    std::string missing;
    for (const auto* room : {&route.start, &route.destination}) {
      if (!truth.graph.index_of(*room)) missing = *room;
    }
    if (!missing.empty()) {
      t.failure_reason = "endpoint missing from truth: " + missing;
      trials.push_back(std::move(t));
      continue;
    }
    try {
      const NavPlan plan = navigate(kb, route.start, route.destination, options);
      TrialResult sim = simulate_walk(plan, truth, fault, route.route_id, replanner);
      sim.route_class = t.route_class;
      trials.push_back(std::move(sim));
    } catch (const NoPathError& e) {
      t.failure_reason = e.what();
      trials.push_back(std::move(t));
    } catch (const UnknownRoomError& e) {
      t.failure_reason = e.what();
      trials.push_back(std::move(t));
    }
  }
  return aggregate(std::move(trials));
}

json eval_report_to_json(const EvalReport& r) {
  auto stats = [](const ClassStats& c) {
    json j = {{"successes", c.successes}, {"total", c.total}, {"sr", c.sr()}};
    if (c.total > 0) {
      const long long bp = sr_basis_points(c.successes, c.total);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%lld.%02lld", bp / 100, bp % 100);
      j["sr_percent"] = buf;
    } else {
      j["sr_percent"] = nullptr;
    }
    return j;
  };
  json trials = json::array();
  for (const auto& t : r.trials) {
    json j = {{"route_id", t.route_id},
              {"route_class", std::string(to_string(t.route_class))},
              {"success", t.success},
              {"reroutes", t.reroutes}};
    if (t.failure_reason) j["failure_reason"] = *t.failure_reason;
    trials.push_back(std::move(j));
  }
  return {{"classes",
           {{"short", stats(r.short_routes)}, {"medium", stats(r.medium_routes)}, {"long", stats(r.long_routes)}}},
          {"overall", stats(r.overall)},
          {"trials", trials}};
}

std::string render_eval_table(const EvalReport& r) {
  std::ostringstream ss;
  char line[96];
  auto row = [&](const char* name, const ClassStats& c) {
    const std::string sr = c.total > 0 ? format_sr(c.successes, c.total) : "n/a (0)";
    std::snprintf(line, sizeof line, "%-10s | %-15s | %d\n", name, sr.c_str(), c.total);
    ss << line;
  };
  std::snprintf(line, sizeof line, "%-10s | %-15s | %s\n", "Route type", "SR% (successes)", "Trials");
  ss << line;
  row("Short", r.short_routes);
  row("Medium", r.medium_routes);
  row("Long", r.long_routes);
  row("Overall", r.overall);
  return ss.str();
}

}  // namespace floornav
