#pragma once

// Route planning on the knowledge base: BFS path, heading-tracked step
// instructions (model planner or deterministic template), step validation
// against the path, rule-based safety scoring and a single hazard reroute.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "floornav/graph.hpp"
#include "floornav/ingest.hpp"
#include "floornav/knowledge_base.hpp"
#include "floornav/llm.hpp"

namespace floornav {

enum class Heading { N = 0, E = 90, S = 180, W = 270 };

int degrees(Heading h);
Heading heading_from_degrees(int deg);
std::string_view to_string(Heading h);
std::optional<Heading> parse_heading(std::string_view s);

/// Cardinal direction of travel from `from` to `to`, y growing southwards.
Heading bearing(const Point& from, const Point& to);

struct Action {
  enum class Kind { move_forward, turn_left, turn_right, turn_around, stop };
  Kind kind = Kind::stop;
  int count = 0;  // Move forward only

  static Action move(int n) { return {Kind::move_forward, n}; }
  static Action left() { return {Kind::turn_left, 0}; }
  static Action right() { return {Kind::turn_right, 0}; }
  static Action around() { return {Kind::turn_around, 0}; }
  static Action stop() { return {Kind::stop, 0}; }

  bool is_move() const { return kind == Kind::move_forward; }
  bool is_turn() const { return kind == Kind::turn_left || kind == Kind::turn_right || kind == Kind::turn_around; }
  bool operator==(const Action&) const = default;
};

/// "Move forward 3", "Turn left", "Turn right", "Turn around", "Stop".
std::string to_string(const Action& a);
/// Case-insensitive; "Move forward N" needs N >= 1 and may end in "step(s)".
std::optional<Action> parse_action(std::string_view s);

Heading heading_after(Heading h, const Action& a);

struct NavStep {
  int step = 0;
  std::string action;
  Heading heading_after_step = Heading::N;
  std::string sensory_feedback;
  std::string current_position;
  std::string confirmation;
  bool operator==(const NavStep&) const = default;
};

nlohmann::json steps_to_json(const std::vector<NavStep>& steps);
/// Accepts a bare array or {"steps": [...]}. Throws llm::PayloadError(malformed).
std::vector<NavStep> steps_from_json(const nlohmann::json& j);

namespace step_rule {
inline constexpr std::string_view empty = "empty-plan";
inline constexpr std::string_view numbering = "step-numbering";
inline constexpr std::string_view hallucinated_room = "hallucinated-room";
inline constexpr std::string_view path_order = "path-order";
inline constexpr std::string_view invalid_action = "invalid-action";
inline constexpr std::string_view heading_algebra = "heading-algebra";
inline constexpr std::string_view final_stop = "final-stop";
}  // namespace step_rule

/// Without an initial heading the first step's stated heading is taken as given.
ValidationReport validate_steps(const std::vector<NavStep>& steps, const std::vector<std::string>& path,
                                const FloorGraph& g, std::optional<Heading> initial = std::nullopt);

enum class HazardType { narrow_passage, missing_door_edge, long_traversal, dead_end, wall_collision };
std::string_view to_string(HazardType t);
std::optional<HazardType> parse_hazard_type(std::string_view s);
int default_severity(HazardType t);

inline constexpr double kMinClearanceCm = 90.0;
inline constexpr int kMaxStepsBetweenLandmarks = 5;
inline constexpr int kRerouteSeverity = 4;

struct Hazard {
  HazardType hazard_type = HazardType::long_traversal;
  int severity = 1;
  std::string location;
  std::string mitigation;
  /// Room where the hazard is met, used to place warnings in instructions.
  std::string room;
  bool operator==(const Hazard&) const = default;
};

/// One line per hazard; this is the text handed to the planner as safety context.
std::string describe_hazard(const Hazard& h);
std::string render_safety_context(const std::vector<Hazard>& hazards);
int max_severity(const std::vector<Hazard>& hazards);

struct SafetyReport {
  std::vector<Hazard> hazards;
  std::vector<std::string> notes;
};

SafetyReport safety_evaluate(const FloorGraph& g, const std::vector<std::string>& path,
                             const std::vector<NavStep>& steps, const DetectionSet& dets,
                             std::optional<double> scale_cm_per_px, double step_size_cm = 50.0);

/// Walking steps for one edge: centroid distance (cm when scaled, else pixels
/// read as cm) over the step size, at least 1.
int steps_for_edge(const RoomNode& a, const RoomNode& b, double step_size_cm, std::optional<double> scale_cm_per_px);

struct TemplatePlanOptions {
  double step_size_cm = 50.0;
  std::optional<double> scale_cm_per_px;
  /// Warnings injected into the instruction that enters each hazard's room.
  std::vector<Hazard> warnings;
};

/// Deterministic planner: initial heading faces the first edge, a turn step
/// wherever the snapped bearing changes, one Move per edge, Stop at the end.
std::vector<NavStep> template_plan(const FloorGraph& g, const std::vector<std::string>& path,
                                   const TemplatePlanOptions& options = {});
/// Heading the template planner starts with.
Heading initial_heading(const FloorGraph& g, const std::vector<std::string>& path);

class NoPathError : public Error {
 public:
  NoPathError(std::string from, std::string to)
      : Error("no route from " + from + " to " + to + ": the rooms are not connected"),
        from_(std::move(from)),
        to_(std::move(to)) {}
  const std::string& from() const { return from_; }
  const std::string& to() const { return to_; }

 private:
  std::string from_;
  std::string to_;
};

struct NavigateOptions {
  double step_size_cm = 50.0;
  /// Model planner when both are set; template planner otherwise.
  llm::Gateway* gateway = nullptr;
  const llm::PromptLibrary* prompts = nullptr;
  /// Advisory model safety review after the rule checks.
  bool model_safety = false;
  std::size_t context_docs = 3;
  const Embedder* embedder = nullptr;
};

struct NavPlan {
  std::string start;
  std::string destination;
  std::vector<std::string> path;
  std::vector<NavStep> steps;
  /// Hazards of the final plan.
  std::vector<Hazard> hazards;
  /// Hazards of the first plan, before any reroute.
  std::vector<Hazard> initial_hazards;
  std::vector<Hazard> advisory_hazards;
  bool rerouted = false;
  bool safe = true;
  /// Set when the template planner stood in for a failed model plan.
  bool degraded = false;
  /// Plan issued from a checkpoint mismatch.
  bool reroute_from_checkpoint = false;
  std::string planner;  // "model" or "template"
  int planner_calls = 0;
  int regenerations = 0;
  std::string recommendation;
  std::vector<std::string> notes;
};

/// Path plus steps, without safety fields. Throws NoPathError / UnknownRoomError.
NavPlan plan_route(const KnowledgeBase& kb, std::string_view s, std::string_view d,
                   const NavigateOptions& options = {});

/// plan_route -> validate_steps (one regeneration) -> safety_evaluate -> one
/// reroute with hazard context when max severity reaches 4.
NavPlan navigate(const KnowledgeBase& kb, std::string_view s, std::string_view d,
                 const NavigateOptions& options = {});

nlohmann::json hazard_to_json(const Hazard& h);
nlohmann::json nav_plan_to_json(const NavPlan& plan);
/// One line per step ("1. Turn left [E] @ Cuisine: ...") followed by the safety report.
std::string render_plan_text(const NavPlan& plan);

}  // namespace floornav
