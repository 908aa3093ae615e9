#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace support {

namespace fs = std::filesystem;
using namespace floornav;

fs::path data_dir() { return FLOORNAV_TEST_DATA_DIR; }
fs::path apartment_dir() { return data_dir() / "apartment"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("floornav-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

DetectionSet apartment_detections() {
  DetectionSet dets = load_detections(apartment_dir() / "detections.json");
  dets.labels = resolve_labels(load_ocr_tokens({apartment_dir() / "ocr.json"}), load_roster(apartment_dir() / "roster.txt"));
  return dets;
}

DetectionSet apartment_labels_only() {
  DetectionSet dets = apartment_detections();
  dets.detections.clear();
  return dets;
}

std::string apartment_parser_response() { return read_file(apartment_dir() / "mock" / "parser_ok.txt"); }
std::string apartment_split_response() { return read_file(apartment_dir() / "mock_fail" / "parser_split.txt"); }

Apartment build_apartment(std::optional<double> scale_cm_per_px) {
  Apartment f;
  f.dets = apartment_detections();
  llm::Gateway gateway(llm::MockProvider::from_directory(apartment_dir() / "mock"));
  const auto prompts = llm::PromptLibrary::load_default();
  f.extraction = run_extraction(gateway, prompts, f.dets.image_ref, f.dets);
  KnowledgeBaseOptions opts;
  opts.building_id = "apartment";
  opts.scale_cm_per_px = scale_cm_per_px;
  f.kb = build_knowledge_base(f.extraction.graph, f.dets, opts);
  return f;
}

KnowledgeBase door_width_kb(double scale_cm_per_px) {
  DetectionSet dets;
  dets.image_ref = "door.png";
  Detection door;
  door.id = "Door_D1";
  door.class_name = "door";
  door.confidence = 0.9;
  door.bbox = {80, 120, 120, 180};
  door.center = door.bbox.center();
  dets.detections.push_back(door);
  dets.labels = {{"Kitchen", {100, 100}, 0.9}, {"Pantry", {100, 200}, 0.9}};

  RoomNode a;
  a.name = "Kitchen";
  a.centroid = {100, 100};
  RoomNode b;
  b.name = "Pantry";
  b.centroid = {100, 200};
  GraphEdge e{"Kitchen", "Pantry", std::string("Door_D1"), door.bbox, 1.0};
  KnowledgeBaseOptions opts;
  opts.building_id = "door-width";
  opts.scale_cm_per_px = scale_cm_per_px;
  return build_knowledge_base(FloorGraph({a, b}, {e}), dets, opts);
}

std::string door_width_plan_response() {
  return R"([
  {"step": 1, "action": "Move forward 4", "heading_after_step": "S",
   "sensory_feedback": "Door frame on both sides", "current_position": "Pantry",
   "confirmation": "Pass through Door_D1 into Pantry"},
  {"step": 2, "action": "Stop", "heading_after_step": "S",
   "sensory_feedback": "Shelves ahead", "current_position": "Pantry",
   "confirmation": "You are in Pantry"}
])";
}

Building make_building(const std::string& id, std::size_t rooms, std::uint64_t seed) {
  constexpr std::size_t cols = 4;
  std::mt19937_64 rng(seed);
  Building b;
  b.id = id;
  b.dets.image_ref = id + ".png";

  std::vector<RoomNode> nodes;
  for (std::size_t i = 0; i < rooms; ++i) {
    RoomNode n;
    char name[32];
    std::snprintf(name, sizeof name, "%s Room %02zu", id.c_str(), i + 1);
    n.name = name;
    n.centroid = {100.0 + 200.0 * static_cast<double>(i % cols), 100.0 + 200.0 * static_cast<double>(i / cols)};
    b.dets.labels.push_back({n.name, n.centroid, 0.9});
    nodes.push_back(std::move(n));
  }

  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    if (i % cols > 0) out.push_back(i - 1);
    if (i % cols + 1 < cols && i + 1 < rooms) out.push_back(i + 1);
    if (i >= cols) out.push_back(i - cols);
    if (i + cols < rooms) out.push_back(i + cols);
    return out;
  };

  // Randomized Prim over grid neighbours.
  std::set<std::pair<std::size_t, std::size_t>> links;
  std::vector<bool> in_tree(rooms, false);
  in_tree[0] = true;
  for (std::size_t added = 1; added < rooms; ++added) {
    std::vector<std::pair<std::size_t, std::size_t>> frontier;
    for (std::size_t i = 0; i < rooms; ++i) {
      if (!in_tree[i]) continue;
      for (auto j : neighbours(i)) {
        if (!in_tree[j]) frontier.emplace_back(i, j);
      }
    }
    const auto [i, j] = frontier[rng() % frontier.size()];
    in_tree[j] = true;
    links.insert(std::minmax(i, j));
  }
  for (std::size_t i = 0; i < rooms; ++i) {
    for (auto j : neighbours(i)) {
      if (i < j && !links.count({i, j}) && rng() % 10 < 3) links.insert({i, j});
    }
  }

  std::vector<GraphEdge> edges;
  int k = 1;
  for (const auto& [i, j] : links) {
    const Point m{(nodes[i].centroid.x + nodes[j].centroid.x) / 2, (nodes[i].centroid.y + nodes[j].centroid.y) / 2};
    const bool horizontal = nodes[i].centroid.y == nodes[j].centroid.y;
    Detection d;
    d.id = "Door_D" + std::to_string(k++);
    d.class_name = "door";
    d.confidence = 0.9;
    d.bbox = horizontal ? BBox{m.x - 7, m.y - 22, m.x + 7, m.y + 22} : BBox{m.x - 22, m.y - 7, m.x + 22, m.y + 7};
    d.center = m;
    b.dets.detections.push_back(d);
    edges.push_back({nodes[i].name, nodes[j].name, d.id, d.bbox, 1.0});
  }
  b.truth = FloorGraph(std::move(nodes), std::move(edges));
  return b;
}

FloorGraph random_connected_graph(std::mt19937_64& rng, std::size_t n, double extra_edge_p) {
  std::vector<RoomNode> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    RoomNode r;
    r.name = "N" + std::to_string(i);
    r.centroid = {static_cast<double>(rng() % 1000), static_cast<double>(rng() % 1000)};
    nodes.push_back(std::move(r));
  }
  std::set<std::pair<std::size_t, std::size_t>> links;
  for (std::size_t i = 1; i < n; ++i) links.insert(std::minmax(i, static_cast<std::size_t>(rng() % i)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (u(rng) < extra_edge_p) links.insert({i, j});
    }
  }
  std::vector<GraphEdge> edges;
  for (const auto& [i, j] : links) edges.push_back({nodes[i].name, nodes[j].name, std::nullopt, std::nullopt, 1.0});
  // Shuffle node order so BFS tie-breaking is exercised on arbitrary labelings.
  std::shuffle(nodes.begin(), nodes.end(), rng);
  return FloorGraph(std::move(nodes), std::move(edges));
}

std::pair<RawParse, DetectionSet> random_raw_parse(std::mt19937_64& rng) {
  const std::size_t n = 2 + rng() % 9;
  RawParse raw;
  raw.approach = "random";
  DetectionSet dets;
  for (std::size_t i = 0; i < n; ++i) {
    raw.nodes_elements.push_back("Room " + std::to_string(i));
    raw.node_kinds.emplace_back();
    if (rng() % 4 != 0) {
      dets.labels.push_back({raw.nodes_elements.back(),
                             {static_cast<double>(rng() % 1000), static_cast<double>(rng() % 1000)},
                             std::nullopt});
    }
  }
  raw.adjacency_matrix.assign(n, std::vector<int>(n, 0));
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = rng() % i;
    raw.adjacency_matrix[i][j] = raw.adjacency_matrix[j][i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng() % 5 == 0) raw.adjacency_matrix[i][j] = raw.adjacency_matrix[j][i] = 1;
    }
  }
  int door = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (raw.adjacency_matrix[i][j] && rng() % 2 == 0) {
        RawEdge e;
        e.from = raw.nodes_elements[i];
        e.to = raw.nodes_elements[j];
        if (rng() % 2 == 0) e.via = "Door_D" + std::to_string(door++);
        raw.edges.push_back(std::move(e));
      }
    }
  }
  const std::size_t doors = rng() % 5;
  for (std::size_t k = 0; k < doors; ++k) {
    Detection d;
    d.id = "Door_D" + std::to_string(100 + k);
    d.class_name = "door";
    d.confidence = 0.8;
    const double x = static_cast<double>(rng() % 1000);
    const double y = static_cast<double>(rng() % 1000);
    d.bbox = {x - 10, y - 10, x + 10, y + 10};
    d.center = {x, y};
    dets.detections.push_back(d);
  }
  return {raw, dets};
}

std::shared_ptr<llm::MockProvider> planner_mock(std::vector<std::string> responses) {
  auto mock = std::make_shared<llm::MockProvider>();
  mock->set_sequence(llm::TemplateId::planner, std::move(responses));
  return mock;
}

namespace {

std::vector<std::uint32_t> decode_folded(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::uint32_t cp;
    std::size_t extra;
    if (c < 0x80) {
      cp = c;
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      extra = 2;
    } else {
      cp = c & 0x07;
      extra = 3;
    }
    for (std::size_t k = 1; k <= extra && i + k < s.size(); ++k) cp = (cp << 6) | (s[i + k] & 0x3F);
    i += extra + 1;
    if (cp < 0x80) cp = static_cast<std::uint32_t>(std::tolower(static_cast<int>(cp)));
    else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) cp += 0x20;
    out.push_back(cp);
  }
  return out;
}

}  // namespace

double oracle_levenshtein_ratio(const std::string& a, const std::string& b) {
  const auto x = decode_folded(a);
  const auto y = decode_folded(b);
  const std::size_t m = x.size();
  const std::size_t n = y.size();
  if (m == 0 && n == 0) return 1.0;
  std::vector<std::vector<std::size_t>> d(m + 1, std::vector<std::size_t>(n + 1));
  for (std::size_t i = 0; i <= m; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= n; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (x[i - 1] != y[j - 1])});
    }
  }
  return 1.0 - static_cast<double>(d[m][n]) / static_cast<double>(std::max(m, n));
}

int oracle_min_hops(const AdjacencyMatrix& a, std::size_t s, std::size_t d) {
  if (s == d) return 0;
  int best = -1;
  std::vector<bool> seen(a.size(), false);
  std::function<void(std::size_t, int)> dfs = [&](std::size_t u, int depth) {
    if (u == d) {
      if (best < 0 || depth < best) best = depth;
      return;
    }
    for (std::size_t v = 0; v < a.size(); ++v) {
      if (a[u][v] && !seen[v]) {
        seen[v] = true;
        dfs(v, depth + 1);
        seen[v] = false;
      }
    }
  };
  seen[s] = true;
  dfs(s, 0);
  return best;
}

std::vector<std::vector<std::size_t>> oracle_components(const AdjacencyMatrix& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (std::size_t j = 0; j < n; ++j) reach[i][j] = reach[i][j] || a[i][j] == 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
    }
  }
  std::vector<std::vector<std::size_t>> comps;
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) continue;
    std::vector<std::size_t> c;
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j]) {
        c.push_back(j);
        done[j] = true;
      }
    }
    comps.push_back(std::move(c));
  }
  return comps;
}

int oracle_heading_degrees(int start_degrees, const std::vector<Action>& actions) {
  int quarter_turns = 0;
  for (const auto& a : actions) {
    if (a.kind == Action::Kind::turn_right) quarter_turns += 1;
    if (a.kind == Action::Kind::turn_left) quarter_turns -= 1;
    if (a.kind == Action::Kind::turn_around) quarter_turns += 2;
  }
  return (((start_degrees + 90 * quarter_turns) % 360) + 360) % 360;
}

std::pair<double, double> oracle_mean_sigma(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

}  // namespace support
