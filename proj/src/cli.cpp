#include "floornav/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "floornav/extraction.hpp"
#include "floornav/ingest.hpp"
#include "floornav/knowledge_base.hpp"
#include "floornav/llm.hpp"
#include "floornav/navigation.hpp"
#include "floornav/text.hpp"
#include "floornav/walkthrough.hpp"

namespace floornav::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string building_id = "building";
  std::string provider = "template-only";
  std::string mock_dir;
  std::string prompts_dir;
  double step_size_cm = 50.0;
  std::optional<double> scale_cm_per_px;
  std::uint64_t seed = 0;

  std::string detections;
  std::vector<std::string> ocr;
  std::string roster;
  std::string image;
  std::string kb_dir;
  std::string report;
  bool model_critic = false;
  bool model_safety = false;

  std::string from;
  std::string to;
  std::string plan_out;

  std::string truth;
  std::string transcript = "walk_transcript.txt";

  std::string suite;
  std::string fault = "none";
  double fault_probability = 0.2;
};

/// Thrown for conditions that map straight to an exit code.
struct Exit {
  int code;
  std::string message;
};

struct Session {
  std::shared_ptr<llm::Gateway> gateway;
  std::optional<llm::PromptLibrary> prompts;
};

Session open_provider(const RunConfig& c) {
  Session s;
  if (c.provider == "template-only") return s;
  s.prompts = c.prompts_dir.empty() ? llm::PromptLibrary::load_default() : llm::PromptLibrary::load(c.prompts_dir);
  if (c.provider == "mock") {
    if (c.mock_dir.empty()) throw Exit{kUsage, "--provider mock needs --mock-dir"};
    s.gateway = std::make_shared<llm::Gateway>(llm::MockProvider::from_directory(c.mock_dir));
  } else {
    auto config = llm::ProviderConfig::from_env();
    s.gateway = std::make_shared<llm::Gateway>(std::make_shared<llm::HttpProvider>(config),
                                               config.max_transport_retries);
  }
  return s;
}

NavigateOptions nav_options(const RunConfig& c, Session& s) {
  NavigateOptions o;
  o.step_size_cm = c.step_size_cm;
  if (s.gateway) {
    o.gateway = s.gateway.get();
    o.prompts = &*s.prompts;
    o.model_safety = c.model_safety;
  }
  return o;
}

KnowledgeBase open_kb(const RunConfig& c) {
  KnowledgeBase kb = load(c.kb_dir);
  if (c.scale_cm_per_px) kb.scale_cm_per_px = c.scale_cm_per_px;
  return kb;
}

/// Canonical room name, or an Exit with the closest known label.
std::string resolve_room(const FloorGraph& g, const std::string& name) {
  if (const auto i = g.index_of(name)) return g.nodes()[*i].name;
  std::string best;
  double best_ratio = -1.0;
  for (const auto& n : g.nodes()) {
    const double r = levenshtein_ratio(name, n.name);
    if (r > best_ratio) {
      best_ratio = r;
      best = n.name;
    }
  }
  std::string msg = "unknown room: " + name;
  if (!best.empty()) msg += " (did you mean \"" + best + "\"?)";
  throw Exit{kUsage, msg};
}

void write_text(const fs::path& p, const std::string& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Exit{kIo, "cannot write " + p.string()};
  f << body;
}

int cmd_extract(const RunConfig& c, std::ostream& out, std::ostream& err) {
  DetectionSet dets = load_detections(c.detections);
  if (!c.image.empty()) dets.image_ref = c.image;
  if (!c.ocr.empty()) {
    std::vector<fs::path> paths(c.ocr.begin(), c.ocr.end());
    const auto tokens = load_ocr_tokens(paths);
    const auto roster = c.roster.empty() ? std::vector<std::string>{} : load_roster(c.roster);
    std::vector<std::string> log;
    dets.labels = resolve_labels(tokens, roster, &log);
    for (const auto& l : log) err << "label: " << l << "\n";
  }

  Session s = open_provider(c);
  ExtractionResult result;
  const fs::path report = c.report.empty() ? fs::path(c.kb_dir).concat(".extraction.json") : fs::path(c.report);
  try {
    if (s.gateway) {
      ExtractionOptions opts;
      opts.model_critic = c.model_critic;
      result = run_extraction(*s.gateway, *s.prompts, dets.image_ref, dets, opts);
    } else {
      result = run_heuristic_extraction(dets);
    }
  } catch (const ExtractionError& e) {
    json history = json::array();
    for (const auto& a : e.attempts()) history.push_back({{"attempt", a.attempt}, {"outcome", a.outcome}, {"issues", a.issues}});
    write_text(report, json{{"error", e.what()}, {"attempts", history}}.dump(2) + "\n");
    err << "extraction failed: " << e.what() << "\n";
    for (const auto& a : e.attempts()) {
      for (const auto& i : a.issues) err << "  attempt " << a.attempt << ": " << i << "\n";
    }
    return kDegraded;
  }

  KnowledgeBaseOptions kopts;
  kopts.building_id = c.building_id;
  kopts.scale_cm_per_px = c.scale_cm_per_px;
  const KnowledgeBase kb = build_knowledge_base(result.graph, dets, kopts);
  persist(kb, c.kb_dir);
  write_text(report, extraction_report_to_json(result).dump(2) + "\n");

  out << "knowledge base written to " << c.kb_dir << ": " << kb.graph.size() << " rooms, " << kb.graph.edges().size()
      << " edges, " << kb.docs.size() << " documents\n";
  if (result.degraded) {
    err << "warning: graph did not pass the self-critic after " << result.attempts.size() << " attempts\n";
    for (const auto& i : result.report.issues) err << "  " << i << "\n";
    return kDegraded;
  }
  return kOk;
}

int cmd_navigate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const KnowledgeBase kb = open_kb(c);
  const std::string from = resolve_room(kb.graph, c.from);
  const std::string to = resolve_room(kb.graph, c.to);
  Session s = open_provider(c);
  const NavPlan plan = navigate(kb, from, to, nav_options(c, s));
  out << render_plan_text(plan);
  if (!c.plan_out.empty()) write_text(c.plan_out, nav_plan_to_json(plan).dump(2) + "\n");
  if (plan.degraded) {
    err << "warning: model plan failed validation; template plan used\n";
    return kDegraded;
  }
  return kOk;
}

int cmd_walk(const RunConfig& c, std::istream& in, std::ostream& out, std::ostream& err) {
  const KnowledgeBase kb = open_kb(c);
  const std::string from = resolve_room(kb.graph, c.from);
  const std::string to = resolve_room(kb.graph, c.to);
  const CheckpointTable table =
      c.truth.empty() ? CheckpointTable::auto_assign(kb.graph) : load_truth_manifest(c.truth).checkpoints;
  Session s = open_provider(c);
  const NavigateOptions opts = nav_options(c, s);

  std::ostringstream transcript;
  auto say = [&](const std::string& line) {
    out << line << "\n";
    transcript << line << "\n";
  };
  auto show_plan = [&](const NavPlan& p) {
    std::string route;
    for (std::size_t i = 0; i < p.path.size(); ++i) route += (i ? " -> " : "") + p.path[i];
    say("Route: " + route);
    for (const auto& h : p.hazards) say("Warning: " + describe_hazard(h));
  };

  WalkSession walk(navigate(kb, from, to, opts), &table, [&](const std::string& a, const std::string& b) {
    return reroute_from(kb, a, b, opts);
  });
  show_plan(walk.plan());
  int code = kOk;
  std::size_t shown = static_cast<std::size_t>(-1);
  const NavPlan* shown_plan = nullptr;
  while (!walk.done()) {
    const NavStep& st = walk.step();
    if (shown != static_cast<std::size_t>(st.step) || shown_plan != &walk.plan()) {
      say("Step " + std::to_string(st.step) + ": " + st.action + " (facing " +
          std::string(to_string(st.heading_after_step)) + "). " + st.sensory_feedback + " " + st.confirmation);
      shown = static_cast<std::size_t>(st.step);
      shown_plan = &walk.plan();
    }
    const Checkpoint* cp = walk.expected_checkpoint();
    if (!cp) {
      walk.complete_step();
      continue;
    }
    say("Scan the marker in " + cp->node + ":");
    std::string line;
    if (!std::getline(in, line)) {
      say("session aborted: end of input before reaching " + to);
      break;
    }
    transcript << "> " << line << "\n";
    int marker = 0;
    try {
      std::size_t used = 0;
      marker = std::stoi(text::trim(line), &used);
      if (used != text::trim(line).size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      say("ALERT: \"" + text::trim(line) + "\" is not a marker id; scan again");
      continue;
    }
    const auto r = walk.scan(marker);
    switch (r.kind) {
      case WalkSession::ScanResult::Kind::confirmed:
        say("Confirmed: " + r.detected_node);
        break;
      case WalkSession::ScanResult::Kind::unknown_marker:
        say("ALERT: " + r.message + "; scan again");
        break;
      case WalkSession::ScanResult::Kind::mismatch:
        say("ALERT: off route, " + r.message);
        if (!walk.done()) {
          say("REROUTE from " + r.detected_node + " to " + to);
          show_plan(walk.plan());
          shown_plan = nullptr;
        }
        break;
    }
  }
  if (walk.arrived()) {
    say("arrived");
  } else if (walk.failure()) {
    say("failed: " + *walk.failure());
    code = kDegraded;
  }
  write_text(c.transcript, transcript.str());
  (void)err;
  return code;
}

int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const KnowledgeBase kb = open_kb(c);
  const TruthManifest truth = load_truth_manifest(c.truth);
  const auto routes = load_route_suite(c.suite);
  FaultModel fault;
  if (c.fault == "seeded") fault = FaultModel::seeded(c.seed, c.fault_probability);
  Session s = open_provider(c);
  const EvalReport report = evaluate_suite(routes, kb, truth, fault, nav_options(c, s));
  out << render_eval_table(report);
  for (const auto& t : report.trials) {
    if (!t.success) err << "failed " << t.route_id << ": " << t.failure_reason.value_or("?") << "\n";
  }
  if (!c.report.empty()) write_text(c.report, eval_report_to_json(report).dump(2) + "\n");
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Floor-plan knowledge extraction and indoor navigation", "floornav"};
  app.require_subcommand(1);
  RunConfig c;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--provider", c.provider, "Model backend")
        ->check(CLI::IsMember({"live", "mock", "template-only"}))
        ->capture_default_str();
    sub->add_option("--mock-dir", c.mock_dir, "Fixture directory for --provider mock");
    sub->add_option("--prompts-dir", c.prompts_dir, "Prompt template directory");
    sub->add_option("--step-size", c.step_size_cm, "Step length in cm")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--scale", c.scale_cm_per_px, "Calibration in cm per pixel")->check(CLI::PositiveNumber);
  };

  auto* extract = app.add_subcommand("extract", "Build a knowledge base from detections and OCR");
  common(extract);
  extract->add_option("--detections", c.detections, "Detection JSON file")->required();
  extract->add_option("--ocr", c.ocr, "OCR token files (repeatable)");
  extract->add_option("--roster", c.roster, "Known room names, one per line");
  extract->add_option("--image", c.image, "Floor-plan image sent to the parser");
  extract->add_option("--kb", c.kb_dir, "Output knowledge base directory")->required();
  extract->add_option("--report", c.report, "Extraction report path (default <kb>.extraction.json)");
  extract->add_option("--building-id", c.building_id, "Building identifier")->capture_default_str();
  extract->add_flag("--model-critic", c.model_critic, "Also run the model self-critic (advisory)");

  auto* nav = app.add_subcommand("navigate", "Plan a route between two rooms");
  common(nav);
  nav->add_option("--kb", c.kb_dir, "Knowledge base directory")->required();
  nav->add_option("from", c.from, "Start room")->required();
  nav->add_option("to", c.to, "Destination room")->required();
  nav->add_option("--out", c.plan_out, "Write the plan as JSON");
  nav->add_flag("--model-safety", c.model_safety, "Also run the model safety review (advisory)");

  auto* walk = app.add_subcommand("walk", "Interactive checkpoint walk; marker ids are read from stdin");
  common(walk);
  walk->add_option("--kb", c.kb_dir, "Knowledge base directory")->required();
  walk->add_option("--truth", c.truth, "Truth manifest with the checkpoint table");
  walk->add_option("from", c.from, "Start room")->required();
  walk->add_option("to", c.to, "Destination room")->required();
  walk->add_option("--transcript", c.transcript, "Session transcript path")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Run a route suite against a truth manifest");
  common(eval);
  eval->add_option("--kb", c.kb_dir, "Knowledge base directory")->required();
  eval->add_option("--truth", c.truth, "Truth manifest")->required();
  eval->add_option("--suite", c.suite, "Route suite JSON")->required();
  eval->add_option("--report", c.report, "Write the report as JSON");
  eval->add_option("--fault", c.fault, "Checkpoint fault model")
      ->check(CLI::IsMember({"none", "seeded"}))
      ->capture_default_str();
  eval->add_option("--seed", c.seed, "Fault model seed")->capture_default_str();
  eval->add_option("--fault-probability", c.fault_probability, "Per-checkpoint fault probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  std::vector<std::string> argv_store{"floornav"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*extract) return cmd_extract(c, out, err);
    if (*nav) return cmd_navigate(c, out, err);
    if (*walk) return cmd_walk(c, in, out, err);
    if (*eval) return cmd_eval(c, out, err);
  } catch (const Exit& e) {
    err << e.message << "\n";
    return e.code;
  } catch (const UnknownRoomError& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const NoPathError& e) {
    err << e.what() << "\n";
    return kDegraded;
  } catch (const EmptySuiteError& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const llm::GatewayError& e) {
    err << "gateway error: " << e.what() << "\n";
    return kGateway;
  } catch (const StoreError& e) {
    err << "knowledge base: " << e.what() << "\n";
    return kIo;
  } catch (const IngestError& e) {
    err << e.what() << "\n";
    for (const auto& d : e.diagnostics()) err << "  " << d << "\n";
    return kIo;
  } catch (const llm::PromptError& e) {
    err << "prompts: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace floornav::cli
