#include "floornav/navigation.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include "floornav/extraction.hpp"
#include "floornav/text.hpp"

namespace floornav {

using nlohmann::json;

int degrees(Heading h) { return static_cast<int>(h); }

Heading heading_from_degrees(int deg) {
  deg = ((deg % 360) + 360) % 360;
  switch (deg) {
    case 0: return Heading::N;
    case 90: return Heading::E;
    case 180: return Heading::S;
    case 270: return Heading::W;
  }
  throw std::invalid_argument("heading must be a multiple of 90 degrees, got " + std::to_string(deg));
}

std::string_view to_string(Heading h) {
  switch (h) {
    case Heading::N: return "N";
    case Heading::E: return "E";
    case Heading::S: return "S";
    case Heading::W: return "W";
  }
  return "N";
}

std::optional<Heading> parse_heading(std::string_view s) {
  const std::string k = text::name_key(s);
  if (k == "n" || k == "north" || k == "0") return Heading::N;
  if (k == "e" || k == "east" || k == "90") return Heading::E;
  if (k == "s" || k == "south" || k == "180") return Heading::S;
  if (k == "w" || k == "west" || k == "270") return Heading::W;
  return std::nullopt;
}

Heading bearing(const Point& from, const Point& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (std::abs(dx) > std::abs(dy)) return dx > 0 ? Heading::E : Heading::W;
  return dy > 0 ? Heading::S : Heading::N;
}

std::string to_string(const Action& a) {
  switch (a.kind) {
    case Action::Kind::move_forward: return "Move forward " + std::to_string(a.count);
    case Action::Kind::turn_left: return "Turn left";
    case Action::Kind::turn_right: return "Turn right";
    case Action::Kind::turn_around: return "Turn around";
    case Action::Kind::stop: return "Stop";
  }
  return "Stop";
}

std::optional<Action> parse_action(std::string_view s) {
  std::string k = text::name_key(s);
  static const std::regex spaces(R"(\s+)");
  k = std::regex_replace(k, spaces, " ");
  if (k == "turn left") return Action::left();
  if (k == "turn right") return Action::right();
  if (k == "turn around") return Action::around();
  if (k == "stop") return Action::stop();
  static const std::regex move(R"(^move forward ([0-9]{1,6})( steps?)?$)");
  std::smatch m;
  if (std::regex_match(k, m, move)) {
    const int n = std::stoi(m[1].str());
    if (n >= 1) return Action::move(n);
  }
  return std::nullopt;
}

Heading heading_after(Heading h, const Action& a) {
  switch (a.kind) {
    case Action::Kind::turn_left: return heading_from_degrees(degrees(h) - 90);
    case Action::Kind::turn_right: return heading_from_degrees(degrees(h) + 90);
    case Action::Kind::turn_around: return heading_from_degrees(degrees(h) + 180);
    default: return h;
  }
}

json steps_to_json(const std::vector<NavStep>& steps) {
  json arr = json::array();
  for (const auto& s : steps) {
    arr.push_back({{"step", s.step},
                   {"action", s.action},
                   {"heading_after_step", std::string(to_string(s.heading_after_step))},
                   {"sensory_feedback", s.sensory_feedback},
                   {"current_position", s.current_position},
                   {"confirmation", s.confirmation}});
  }
  return arr;
}

std::vector<NavStep> steps_from_json(const json& j) {
  auto malformed = [&](const std::string& why) {
    return llm::PayloadError(llm::PayloadError::Kind::malformed, "planner output: " + why, j.dump().substr(0, 200));
  };
  const json* arr = &j;
  if (j.is_object() && j.contains("steps")) arr = &j["steps"];
  if (!arr->is_array()) throw malformed("expected a JSON array of steps");
  std::vector<NavStep> steps;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const json& e = (*arr)[i];
    const std::string where = "step record " + std::to_string(i + 1);
    if (!e.is_object()) throw malformed(where + " is not an object");
    NavStep s;
    if (!e.contains("step") || !e["step"].is_number_integer()) throw malformed(where + ": missing integer \"step\"");
    s.step = e["step"].get<int>();
    if (!e.contains("action") || !e["action"].is_string()) throw malformed(where + ": missing \"action\"");
    s.action = e["action"].get<std::string>();
    if (!e.contains("current_position") || !e["current_position"].is_string()) {
      throw malformed(where + ": missing \"current_position\"");
    }
    s.current_position = e["current_position"].get<std::string>();
    if (!e.contains("heading_after_step")) throw malformed(where + ": missing \"heading_after_step\"");
    const json& h = e["heading_after_step"];
    const auto heading = h.is_string()             ? parse_heading(h.get<std::string>())
                         : h.is_number_integer() ? parse_heading(std::to_string(h.get<int>()))
                                                 : std::nullopt;
    if (!heading) throw malformed(where + ": heading_after_step must be N, E, S or W");
    s.heading_after_step = *heading;
    s.sensory_feedback = e.value("sensory_feedback", "");
    s.confirmation = e.value("confirmation", "");
    steps.push_back(std::move(s));
  }
  return steps;
}

ValidationReport validate_steps(const std::vector<NavStep>& steps, const std::vector<std::string>& path,
                                const FloorGraph& g, std::optional<Heading> initial) {
  ValidationReport r;
  auto add = [&](std::string_view rule, std::string message, std::string element) {
    r.passed = false;
    r.violations.push_back({std::string(rule), std::move(message), std::move(element)});
  };
  if (steps.empty()) {
    add(step_rule::empty, "plan has no steps", "");
    return r;
  }

  std::size_t prev = 0;
  std::optional<Heading> cur = initial;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const NavStep& s = steps[i];
    const std::string label = "step " + std::to_string(i + 1);
    if (s.step != static_cast<int>(i + 1)) {
      add(step_rule::numbering, label + " is numbered " + std::to_string(s.step), label);
    }

    const auto it = std::find_if(path.begin(), path.end(),
                                 [&](const std::string& p) { return text::names_equal(p, s.current_position); });
    if (it == path.end()) {
      add(step_rule::hallucinated_room,
          label + ": room \"" + s.current_position + "\" is not on the computed path" +
              (g.index_of(s.current_position) ? "" : " and not in the graph"),
          s.current_position);
    } else {
      const auto idx = static_cast<std::size_t>(it - path.begin());
      if (idx < prev) {
        add(step_rule::path_order, label + ": moves back from " + path[prev] + " to " + path[idx], s.current_position);
      } else if (idx > prev + 1) {
        add(step_rule::path_order, label + ": skips from " + path[prev] + " to " + path[idx], s.current_position);
      } else if (idx == prev + 1 && !g.adjacent(path[prev], path[idx])) {
        add(step_rule::path_order, label + ": " + path[prev] + " and " + path[idx] + " are not adjacent",
            s.current_position);
      }
      prev = std::max(prev, idx);
    }

    const auto action = parse_action(s.action);
    if (!action) {
      add(step_rule::invalid_action, label + ": action \"" + s.action + "\" is not in the allowed vocabulary", label);
    } else {
      if (cur) {
        const Heading expected = heading_after(*cur, *action);
        if (expected != s.heading_after_step) {
          add(step_rule::heading_algebra,
              label + ": " + to_string(*action) + " from " + std::string(to_string(*cur)) + " gives " +
                  std::string(to_string(expected)) + ", plan says " + std::string(to_string(s.heading_after_step)),
              label);
        }
      }
      if (action->kind == Action::Kind::stop && i + 1 != steps.size()) {
        add(step_rule::final_stop, label + ": Stop before the final step", label);
      }
    }
    cur = s.heading_after_step;
  }

  const NavStep& last = steps.back();
  const auto last_action = parse_action(last.action);
  if (!last_action || last_action->kind != Action::Kind::stop) {
    add(step_rule::final_stop, "final step must be Stop, got \"" + last.action + "\"", last.action);
  } else if (!path.empty() && !text::names_equal(last.current_position, path.back())) {
    add(step_rule::final_stop, "final Stop is at " + last.current_position + ", not at " + path.back(),
        last.current_position);
  }
  return r;
}

std::string_view to_string(HazardType t) {
  switch (t) {
    case HazardType::narrow_passage: return "narrow_passage";
    case HazardType::missing_door_edge: return "missing_door_edge";
    case HazardType::long_traversal: return "long_traversal";
    case HazardType::dead_end: return "dead_end";
    case HazardType::wall_collision: return "wall_collision";
  }
  return "long_traversal";
}

std::optional<HazardType> parse_hazard_type(std::string_view s) {
  for (auto t : {HazardType::narrow_passage, HazardType::missing_door_edge, HazardType::long_traversal,
                 HazardType::dead_end, HazardType::wall_collision}) {
    if (text::name_key(s) == to_string(t)) return t;
  }
  return std::nullopt;
}

int default_severity(HazardType t) {
  switch (t) {
    case HazardType::narrow_passage: return 4;
    case HazardType::missing_door_edge: return 3;
    case HazardType::long_traversal: return 2;
    case HazardType::dead_end: return 4;
    case HazardType::wall_collision: return 5;
  }
  return 1;
}

std::string describe_hazard(const Hazard& h) {
  return std::string(to_string(h.hazard_type)) + " (severity " + std::to_string(h.severity) + ") at " + h.location +
         ": " + h.mitigation;
}

std::string render_safety_context(const std::vector<Hazard>& hazards) {
  if (hazards.empty()) return "";
  std::string out = "SAFETY WARNINGS (inject into the matching steps):";
  for (const auto& h : hazards) out += "\n- " + describe_hazard(h);
  return out;
}

int max_severity(const std::vector<Hazard>& hazards) {
  int m = 0;
  for (const auto& h : hazards) m = std::max(m, h.severity);
  return m;
}

int steps_for_edge(const RoomNode& a, const RoomNode& b, double step_size_cm, std::optional<double> scale_cm_per_px) {
  const double cm = distance(a.centroid, b.centroid) * scale_cm_per_px.value_or(1.0);
  return std::max(1, static_cast<int>(std::lround(cm / step_size_cm)));
}

namespace {

const std::regex& door_ref() {
  static const std::regex re(R"(Door_D[0-9]+)");
  return re;
}

Hazard make_hazard(HazardType t, std::string location, std::string mitigation, std::string room) {
  return {t, default_severity(t), std::move(location), std::move(mitigation), std::move(room)};
}

std::optional<BBox> door_box(const GraphEdge& e, const DetectionSet& dets) {
  if (e.door_bbox) return e.door_bbox;
  if (e.door_id) {
    if (const Detection* d = dets.find(*e.door_id)) return d->bbox;
  }
  return std::nullopt;
}

}  // namespace

SafetyReport safety_evaluate(const FloorGraph& g, const std::vector<std::string>& path,
                             const std::vector<NavStep>& steps, const DetectionSet& dets,
                             std::optional<double> scale_cm_per_px, double step_size_cm) {
  SafetyReport r;

  // (a) door clearance and (b) undetected doors on passage edges.
  if (!scale_cm_per_px) r.notes.push_back("narrow_passage check skipped: no scale_cm_per_px calibration");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const GraphEdge* e = g.edge_between(path[i], path[i + 1]);
    if (!e) continue;
    const std::string hop = path[i] + " -> " + path[i + 1];
    if (e->is_door()) {
      const auto box = door_box(*e, dets);
      if (scale_cm_per_px && box) {
        const double width_cm = box->short_side() * *scale_cm_per_px;
        if (width_cm < kMinClearanceCm) {
          r.hazards.push_back(make_hazard(HazardType::narrow_passage, *e->door_id + " (" + hop + ")",
                                          "clearance about " + text::format_number(width_cm) +
                                              " cm is under 90 cm; slow down, keep the cane centred and prefer "
                                              "another route if one exists",
                                          path[i + 1]));
        }
      }
      continue;
    }
    const RoomNode& a = g.node(path[i]);
    const RoomNode& b = g.node(path[i + 1]);
    if (a.synthetic_centroid || b.synthetic_centroid) continue;
    const double len = distance(a.centroid, b.centroid);
    if (len <= 0.0) continue;
    const double ux = (b.centroid.x - a.centroid.x) / len;
    const double uy = (b.centroid.y - a.centroid.y) / len;
    for (const Detection* d : dets.doors()) {
      const double px = d->center.x - a.centroid.x;
      const double py = d->center.y - a.centroid.y;
      const double t = (px * ux + py * uy) / len;
      const double perp = std::abs(px * uy - py * ux);
      if (t >= 0.0 && t <= 1.0 && perp <= 0.2 * len) {
        r.hazards.push_back(make_hazard(HazardType::missing_door_edge, d->id + " on passage " + hop,
                                        "a door was detected on this open passage; check whether it is closed "
                                        "before moving through",
                                        path[i + 1]));
        break;
      }
    }
  }

  // (c) landmark spacing, (d) dead ends and overlong Move runs.
  int since_landmark = 0;
  bool reported_segment = false;
  std::string prev_pos = path.empty() ? "" : path.front();
  std::size_t run_start = 0;
  int run_walked = 0;
  std::string run_origin = prev_pos;

  auto path_index = [&](const std::string& room) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (text::names_equal(path[i], room)) return i;
    }
    return std::nullopt;
  };
  auto close_run = [&](std::size_t end, const std::string& last_pos) {
    if (run_walked == 0) return;
    const auto from = path_index(run_origin);
    const auto to = path_index(last_pos);
    if (!from || !to || *to < *from) return;
    std::size_t limit = std::min(*to + 1, path.size() - 1);
    int allowed = 0;
    for (std::size_t i = *from; i < limit; ++i) {
      const RoomNode& a = g.node(path[i]);
      const RoomNode& b = g.node(path[i + 1]);
      if (a.synthetic_centroid || b.synthetic_centroid) return;
      allowed += steps_for_edge(a, b, step_size_cm, scale_cm_per_px);
    }
    if (run_walked > static_cast<int>(std::ceil(allowed * 1.25)) + 1) {
      r.hazards.push_back(make_hazard(
          HazardType::wall_collision,
          "steps " + std::to_string(run_start + 1) + "-" + std::to_string(end) + " (" + run_origin + " -> " +
              last_pos + ")",
          std::to_string(run_walked) + " steps forward where the rooms allow about " + std::to_string(allowed) +
              "; stop and re-confirm position before reaching a wall (approximate check)",
          last_pos));
    }
  };

  for (std::size_t i = 0; i < steps.size(); ++i) {
    const NavStep& s = steps[i];
    const auto action = parse_action(s.action);
    const bool move = action && action->is_move();
    if (move) {
      if (run_walked == 0) {
        run_start = i;
        run_origin = prev_pos;
      }
      run_walked += action->count;
      since_landmark += action->count;
      if (since_landmark > kMaxStepsBetweenLandmarks && !reported_segment) {
        r.hazards.push_back(make_hazard(HazardType::long_traversal,
                                        "step " + std::to_string(i + 1) + " (" + s.current_position + ")",
                                        std::to_string(since_landmark) +
                                            " steps without a door landmark; count steps and trail the wall to "
                                            "stay oriented",
                                        s.current_position));
        reported_segment = true;
      }
      if (const auto idx = g.index_of(s.current_position)) {
        const bool endpoint = !path.empty() && (text::names_equal(s.current_position, path.back()) ||
                                                text::names_equal(s.current_position, path.front()));
        if (g.degree(*idx) == 1 && !endpoint) {
          r.hazards.push_back(make_hazard(HazardType::dead_end,
                                          s.current_position + " (step " + std::to_string(i + 1) + ")",
                                          "this room is a dead end; confirm position before continuing",
                                          s.current_position));
        }
      }
    } else {
      close_run(i, prev_pos);
      run_walked = 0;
    }
    if (std::regex_search(s.confirmation, door_ref())) {
      since_landmark = 0;
      reported_segment = false;
    }
    prev_pos = s.current_position;
  }
  close_run(steps.size(), prev_pos);
  r.notes.push_back("wall_collision is an approximate check based on centroid distances");
  return r;
}

Heading initial_heading(const FloorGraph& g, const std::vector<std::string>& path) {
  if (path.size() < 2) return Heading::N;
  return bearing(g.node(path[0]).centroid, g.node(path[1]).centroid);
}

namespace {

std::string heading_word(Heading h) {
  switch (h) {
    case Heading::N: return "north";
    case Heading::E: return "east";
    case Heading::S: return "south";
    case Heading::W: return "west";
  }
  return "north";
}

Action turn_between(Heading from, Heading to) {
  const int diff = ((degrees(to) - degrees(from)) % 360 + 360) % 360;
  if (diff == 90) return Action::right();
  if (diff == 270) return Action::left();
  return Action::around();
}

}  // namespace

std::vector<NavStep> template_plan(const FloorGraph& g, const std::vector<std::string>& path,
                                   const TemplatePlanOptions& options) {
  std::vector<NavStep> steps;
  auto push = [&](const Action& a, Heading h, std::string feel, std::string room, std::string confirm) {
    steps.push_back({static_cast<int>(steps.size() + 1), to_string(a), h, std::move(feel), std::move(room),
                     std::move(confirm)});
  };
  auto warn = [&](NavStep& s) {
    for (const auto& h : options.warnings) {
      if (text::names_equal(h.room, s.current_position)) {
        s.sensory_feedback += " Caution: " + std::string(to_string(h.hazard_type)) + " at " + h.location + ", " +
                              h.mitigation + ".";
      }
    }
  };

  Heading h = initial_heading(g, path);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const RoomNode& a = g.node(path[i]);
    const RoomNode& b = g.node(path[i + 1]);
    const Heading want = bearing(a.centroid, b.centroid);
    if (want != h) {
      const Action turn = turn_between(h, want);
      h = want;
      push(turn, h, "Turn in place inside " + a.name, a.name, "Now facing " + heading_word(h) + " towards " + b.name);
    }
    const GraphEdge* e = g.edge_between(a.name, b.name);
    const int n = steps_for_edge(a, b, options.step_size_cm, options.scale_cm_per_px);
    if (e && e->is_door()) {
      push(Action::move(n), h, "Door frame of " + *e->door_id + " on both sides", b.name,
           "Pass through " + *e->door_id + " into " + b.name);
    } else {
      push(Action::move(n), h, "Open floor with no door frame", b.name,
           "Open passage into " + b.name + "; the space widens on entry");
    }
    warn(steps.back());
  }
  const std::string dest = path.empty() ? "" : g.node(path.back()).name;
  push(Action::stop(), h, "Destination reached", dest, "You are in " + dest);
  if (path.size() == 1) warn(steps.back());
  return steps;
}

namespace {

/// Planner state for one query; the validation regeneration is shared by the
/// first plan and the reroute.
struct QueryPlanner {
  const KnowledgeBase& kb;
  const NavigateOptions& options;
  NavPlan& plan;
  bool regeneration_left = true;
  std::string graph_json;
  std::string edges_json;

  bool model() const { return options.gateway && options.prompts; }

  void prepare() {
    const NavigationContext ctx =
        assemble_context(kb, plan.start, plan.destination, options.context_docs, options.embedder);
    json gj = graph_to_json(kb.graph);
    gj["shortest_path"] = plan.path;
    gj["retrieved_context"] = ctx.render();
    graph_json = gj.dump();
    json edges = json::array();
    for (std::size_t i = 0; i + 1 < plan.path.size(); ++i) {
      const GraphEdge* e = kb.graph.edge_between(plan.path[i], plan.path[i + 1]);
      json je = {{"from", plan.path[i]}, {"to", plan.path[i + 1]}, {"via", e ? e->via() : "passage"}};
      if (e && e->door_bbox) je["door_bbox"] = bbox_to_json(*e->door_bbox);
      if (e && e->door_id) {
        if (auto it = kb.visual.element_notes.find(*e->door_id); it != kb.visual.element_notes.end()) {
          je["visual_note"] = it->second;
        }
      }
      edges.push_back(std::move(je));
    }
    edges_json = edges.dump();
  }

  std::optional<std::vector<NavStep>> model_steps(const std::string& safety_context) {
    std::optional<std::string> feedback;
    for (;;) {
      llm::CompletionRequest req;
      req.template_id = llm::TemplateId::planner;
      req.bindings = {{"graph_json", graph_json},
                      {"edges_json", edges_json},
                      {"safety_context", safety_context},
                      {"start", plan.start},
                      {"destination", plan.destination},
                      {"step_size", text::format_number(options.step_size_cm)}};
      req.prompt = llm::render_prompt(options.prompts->get(llm::TemplateId::planner), req.bindings);
      if (feedback) {
        req.bindings["feedback"] = *feedback;
        req.prompt += "\n\n" + *feedback;
      }
      ++plan.planner_calls;
      const std::string reply = options.gateway->complete(req);

      std::vector<std::string> problems;
      try {
        auto steps = steps_from_json(llm::extract_structured_payload(reply));
        const ValidationReport v = validate_steps(steps, plan.path, kb.graph);
        if (v.passed) return steps;
        for (const auto& viol : v.violations) problems.push_back(viol.message);
      } catch (const llm::PayloadError& e) {
        problems.push_back(e.what());
      }
      for (const auto& p : problems) plan.notes.push_back("planner output rejected: " + p);
      if (!regeneration_left) return std::nullopt;
      regeneration_left = false;
      ++plan.regenerations;
      std::string fb = "PREVIOUS PLAN REJECTED. Fix these problems and use only rooms on the shortest path:";
      for (const auto& p : problems) fb += "\n- " + p;
      feedback = std::move(fb);
    }
  }

  std::vector<NavStep> steps(const std::vector<Hazard>& warnings) {
    if (model()) {
      if (auto s = model_steps(render_safety_context(warnings))) {
        plan.planner = "model";
        return *s;
      }
      plan.degraded = true;
      plan.notes.push_back("model planner failed validation; using the template planner");
    }
    plan.planner = "template";
    TemplatePlanOptions t;
    t.step_size_cm = options.step_size_cm;
    t.scale_cm_per_px = kb.scale_cm_per_px;
    t.warnings = warnings;
    return template_plan(kb.graph, plan.path, t);
  }
};

NavPlan start_plan(const KnowledgeBase& kb, std::string_view s, std::string_view d, const NavigateOptions& options) {
  if (options.step_size_cm <= 0.0) throw std::invalid_argument("step size must be positive");
  NavPlan plan;
  plan.start = kb.graph.node(s).name;
  plan.destination = kb.graph.node(d).name;
  auto path = bfs_shortest_path(kb.graph, plan.start, plan.destination);
  if (!path) throw NoPathError(plan.start, plan.destination);
  plan.path = std::move(*path);
  return plan;
}

void model_safety_review(const KnowledgeBase& kb, const NavigateOptions& options, NavPlan& plan) {
  json known = json::array();
  for (const auto& h : plan.hazards) known.push_back(hazard_to_json(h));
  json edges = json::array();
  for (std::size_t i = 0; i + 1 < plan.path.size(); ++i) {
    const GraphEdge* e = kb.graph.edge_between(plan.path[i], plan.path[i + 1]);
    edges.push_back({{"from", plan.path[i]}, {"to", plan.path[i + 1]}, {"via", e ? e->via() : "passage"}});
  }
  std::string route;
  for (std::size_t i = 0; i < plan.path.size(); ++i) route += (i ? " -> " : "") + plan.path[i];

  llm::CompletionRequest req;
  req.template_id = llm::TemplateId::safety;
  req.bindings = {{"graph_json", graph_to_json(kb.graph).dump()},
                  {"path", route},
                  {"edges_json", edges.dump()},
                  {"detection_summary", render_detection_context(kb.visual.detections)},
                  {"existing_hazards", known.dump()}};
  req.prompt = llm::render_prompt(options.prompts->get(llm::TemplateId::safety), req.bindings);
  try {
    const json reply = llm::extract_structured_payload(options.gateway->complete(req));
    if (reply.contains("hazards") && reply["hazards"].is_array()) {
      for (const auto& h : reply["hazards"]) {
        if (!h.is_object()) continue;
        const auto type = parse_hazard_type(h.value("hazard_type", ""));
        if (!type) {
          plan.notes.push_back("advisory safety review: unknown hazard type " + h.value("hazard_type", "?"));
          continue;
        }
        Hazard hz;
        hz.hazard_type = *type;
        hz.severity = std::clamp(h.contains("severity") && h["severity"].is_number() ? h["severity"].get<int>()
                                                                                       : default_severity(*type),
                                 1, 5);
        hz.location = h.value("location", "");
        hz.mitigation = h.value("mitigation", "");
        plan.advisory_hazards.push_back(std::move(hz));
      }
    }
    if (reply.contains("recommendation") && reply["recommendation"].is_string()) {
      plan.notes.push_back("advisory safety review: " + reply["recommendation"].get<std::string>());
    }
  } catch (const llm::PayloadError& e) {
    plan.notes.push_back(std::string("advisory safety review unusable: ") + e.what());
  } catch (const llm::GatewayError& e) {
    plan.notes.push_back(std::string("advisory safety review failed: ") + e.what());
  }
}

std::string recommendation_for(const NavPlan& plan) {
  if (plan.hazards.empty()) {
    return plan.rerouted ? "Rerouted with hazard warnings; no hazards remain." : "Route is clear.";
  }
  std::string r = std::to_string(plan.hazards.size()) + " hazard(s), highest severity " +
                  std::to_string(max_severity(plan.hazards)) + ".";
  if (plan.rerouted) r += " Rerouted once with hazard warnings in the instructions; follow them closely.";
  else r += " Follow the mitigations at each hazard.";
  return r;
}

}  // namespace

NavPlan plan_route(const KnowledgeBase& kb, std::string_view s, std::string_view d, const NavigateOptions& options) {
  NavPlan plan = start_plan(kb, s, d, options);
  QueryPlanner planner{kb, options, plan, true, {}, {}};
  if (planner.model()) planner.prepare();
  plan.steps = planner.steps({});
  return plan;
}

NavPlan navigate(const KnowledgeBase& kb, std::string_view s, std::string_view d, const NavigateOptions& options) {
  NavPlan plan = start_plan(kb, s, d, options);
  QueryPlanner planner{kb, options, plan, true, {}, {}};
  if (planner.model()) planner.prepare();
  plan.steps = planner.steps({});

  auto evaluate = [&] {
    SafetyReport sr = safety_evaluate(kb.graph, plan.path, plan.steps, kb.visual.detections, kb.scale_cm_per_px,
                                      options.step_size_cm);
    for (auto& n : sr.notes) {
      if (std::find(plan.notes.begin(), plan.notes.end(), n) == plan.notes.end()) plan.notes.push_back(std::move(n));
    }
    return sr.hazards;
  };
  plan.initial_hazards = evaluate();
  plan.hazards = plan.initial_hazards;
  if (max_severity(plan.initial_hazards) >= kRerouteSeverity) {
    plan.steps = planner.steps(plan.initial_hazards);
    plan.rerouted = true;
    plan.hazards = evaluate();
  }
  plan.safe = max_severity(plan.initial_hazards) < kRerouteSeverity || plan.rerouted;
  if (options.model_safety && planner.model()) model_safety_review(kb, options, plan);
  plan.recommendation = recommendation_for(plan);
  return plan;
}

json hazard_to_json(const Hazard& h) {
  return {{"hazard_type", std::string(to_string(h.hazard_type))},
          {"severity", h.severity},
          {"location", h.location},
          {"mitigation", h.mitigation}};
}

json nav_plan_to_json(const NavPlan& plan) {
  auto hazards = [](const std::vector<Hazard>& hs) {
    json a = json::array();
    for (const auto& h : hs) a.push_back(hazard_to_json(h));
    return a;
  };
  return {{"start", plan.start},
          {"destination", plan.destination},
          {"path", plan.path},
          {"planner", plan.planner},
          {"steps", steps_to_json(plan.steps)},
          {"safety", {{"safe", plan.safe}, {"hazards", hazards(plan.hazards)}, {"recommendation", plan.recommendation}}},
          {"initial_hazards", hazards(plan.initial_hazards)},
          {"advisory_hazards", hazards(plan.advisory_hazards)},
          {"rerouted", plan.rerouted},
          {"degraded", plan.degraded},
          {"reroute_from_checkpoint", plan.reroute_from_checkpoint},
          {"planner_calls", plan.planner_calls},
          {"regenerations", plan.regenerations},
          {"notes", plan.notes}};
}

std::string render_plan_text(const NavPlan& plan) {
  std::ostringstream ss;
  ss << "Route:";
  for (std::size_t i = 0; i < plan.path.size(); ++i) ss << (i ? " -> " : " ") << plan.path[i];
  ss << "\n";
  for (const auto& s : plan.steps) {
    ss << s.step << ". " << s.action << " [" << to_string(s.heading_after_step) << "] @ " << s.current_position
       << ": " << s.confirmation << "\n";
  }
  ss << "Safety: " << (plan.safe ? "safe" : "unsafe") << (plan.rerouted ? " (rerouted)" : "")
     << (plan.degraded ? " (degraded plan)" : "") << "\n";
  for (const auto& h : plan.hazards) ss << "- " << describe_hazard(h) << "\n";
  for (const auto& h : plan.advisory_hazards) ss << "- advisory: " << describe_hazard(h) << "\n";
  ss << "Recommendation: " << plan.recommendation << "\n";
  return ss.str();
}

}  // namespace floornav
