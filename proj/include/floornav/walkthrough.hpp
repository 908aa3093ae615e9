#pragma once

// Checkpoint-confirmed walking, replayed against a ground-truth graph, and the
// success-rate harness over route suites.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "floornav/graph.hpp"
#include "floornav/knowledge_base.hpp"
#include "floornav/navigation.hpp"

namespace floornav {

struct Checkpoint {
  int marker_id = 0;
  std::string node;
  bool operator==(const Checkpoint&) const = default;
};

class UnknownMarkerError : public Error {
 public:
  explicit UnknownMarkerError(int marker)
      : Error("unknown marker " + std::to_string(marker) + ": not registered for this building"), marker_(marker) {}
  int marker() const { return marker_; }

 private:
  int marker_;
};

/// Marker registry for one building; marker ids are unique.
class CheckpointTable {
 public:
  CheckpointTable() = default;
  explicit CheckpointTable(std::vector<Checkpoint> checkpoints);
  /// Marker i + 1 for node i.
  static CheckpointTable auto_assign(const FloorGraph& g);

  void add(Checkpoint c);
  const Checkpoint* by_marker(int marker) const;
  const Checkpoint* for_room(std::string_view room) const;
  const std::vector<Checkpoint>& all() const { return checkpoints_; }
  bool empty() const { return checkpoints_.empty(); }

 private:
  std::vector<Checkpoint> checkpoints_;
};

struct CheckpointResult {
  bool confirmed = false;
  /// Node of the scanned marker.
  std::string detected_node;
};

/// Throws UnknownMarkerError for an unregistered scan.
CheckpointResult confirm_checkpoint(const Checkpoint& expected, int scanned, const CheckpointTable& table);

struct TruthManifest {
  FloorGraph graph;
  CheckpointTable checkpoints;
  /// Rooms the walker must not enter, by name key.
  std::set<std::string> inaccessible;
  std::optional<double> scale_cm_per_px;

  bool is_inaccessible(std::string_view room) const;
};

/// {"graph", "checkpoints"?, "inaccessible"?, "scale_cm_per_px"?}; checkpoints
/// are auto-assigned when absent. Throws IngestError.
TruthManifest truth_from_json(const nlohmann::json& j);
nlohmann::json truth_to_json(const TruthManifest& t);
TruthManifest load_truth_manifest(const std::filesystem::path& path);

/// Wrong-marker injections. Arrival k is the k-th checkpoint scan of a trial.
struct FaultModel {
  enum class Kind { none, scripted, seeded };
  Kind kind = Kind::none;
  /// Scripted: (arrival index, marker scanned instead of the expected one).
  std::vector<std::pair<int, int>> injections;
  std::uint64_t seed = 0;
  double probability = 0.0;
  int max_faults_per_trial = 1;

  static FaultModel none() { return {}; }
  static FaultModel scripted(std::vector<std::pair<int, int>> injections);
  static FaultModel seeded(std::uint64_t seed, double probability, int max_faults_per_trial = 1);
};

inline constexpr int kMaxReroutes = 3;

using Replanner = std::function<NavPlan(const std::string& from, const std::string& to)>;

/// Step-by-step execution of a plan with checkpoint confirmation. Shared by
/// the simulator and the interactive walk command.
class WalkSession {
 public:
  WalkSession(NavPlan plan, const CheckpointTable* checkpoints, Replanner replanner, int max_reroutes = kMaxReroutes);

  const NavPlan& plan() const { return plan_; }
  bool done() const { return done_; }
  bool arrived() const { return arrived_; }
  const std::optional<std::string>& failure() const { return failure_; }
  int reroutes() const { return reroutes_; }
  /// Room the user is in before the current step.
  const std::string& position() const { return position_; }
  const NavStep& step() const { return plan_.steps[index_]; }
  /// Marker to scan after the current step, when it enters a room that has one.
  const Checkpoint* expected_checkpoint() const;

  /// Completes a step that needs no scan.
  void complete_step();

  struct ScanResult {
    enum class Kind { confirmed, mismatch, unknown_marker };
    Kind kind = Kind::confirmed;
    std::string detected_node;
    std::string message;
  };
  /// Confirmed advances; mismatch replans from the scanned marker's room;
  /// an unknown marker leaves the session where it was.
  ScanResult scan(int marker);

  void fail(std::string reason);

 private:
  void finish_step();

  NavPlan plan_;
  const CheckpointTable* checkpoints_;
  Replanner replanner_;
  int max_reroutes_;
  std::string destination_;
  std::size_t index_ = 0;
  std::string position_;
  int reroutes_ = 0;
  bool done_ = false;
  bool arrived_ = false;
  std::optional<std::string> failure_;
};

enum class RouteClass { short_route, medium_route, long_route };
std::string_view to_string(RouteClass c);
std::optional<RouteClass> parse_route_class(std::string_view s);
/// <= 2 edges short, 3-5 medium, >= 6 long.
RouteClass classify_hops(std::size_t hops);
std::optional<RouteClass> classify_route(const FloorGraph& truth, std::string_view s, std::string_view d);

struct TrialResult {
  std::string route_id;
  RouteClass route_class = RouteClass::short_route;
  bool success = false;
  int reroutes = 0;
  std::optional<std::string> failure_reason;
  bool operator==(const TrialResult&) const = default;
};

/// Replays the plan's room transitions on the truth graph.
TrialResult simulate_walk(const NavPlan& plan, const TruthManifest& truth, const FaultModel& fault,
                          const std::string& route_id, const Replanner& replanner);

/// navigate from `current`, marked as a checkpoint reroute.
NavPlan reroute_from(const KnowledgeBase& kb, std::string_view current, std::string_view d,
                     const NavigateOptions& options = {});

struct RouteSpec {
  std::string route_id;
  std::string start;
  std::string destination;
  std::optional<RouteClass> route_class;
};

/// JSON array, or {"routes": [...]}, of {route_id, start, destination, class?}.
std::vector<RouteSpec> route_suite_from_json(const nlohmann::json& j);
std::vector<RouteSpec> load_route_suite(const std::filesystem::path& path);

struct ClassStats {
  int successes = 0;
  int total = 0;
  double sr() const { return total == 0 ? 0.0 : static_cast<double>(successes) / total; }
};

/// Success rate in hundredths of a percent, rounded half up.
long long sr_basis_points(int successes, int total);
/// "92.31 (12)".
std::string format_sr(int successes, int total);

struct EvalReport {
  std::vector<TrialResult> trials;
  ClassStats short_routes;
  ClassStats medium_routes;
  ClassStats long_routes;
  ClassStats overall;

  const ClassStats& stats(RouteClass c) const;
};

class EmptySuiteError : public Error {
 public:
  EmptySuiteError() : Error("empty suite: success rate is undefined for zero routes") {}
};

/// Throws EmptySuiteError for no trials.
EvalReport aggregate(std::vector<TrialResult> trials);

EvalReport evaluate_suite(const std::vector<RouteSpec>& routes, const KnowledgeBase& kb, const TruthManifest& truth,
                          const FaultModel& fault, const NavigateOptions& options = {});

nlohmann::json eval_report_to_json(const EvalReport& r);
/// Route type | SR% (successes) | Trials, one row per class plus Overall.
std::string render_eval_table(const EvalReport& r);

}  // namespace floornav
