#include "floornav/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "floornav/errors.hpp"
#include "floornav/text.hpp"

namespace floornav {

using nlohmann::json;

bool Detection::is_door() const { return text::name_key(class_name) == "door"; }
bool Detection::is_window() const { return text::name_key(class_name) == "window"; }

std::vector<const Detection*> DetectionSet::doors() const {
  std::vector<const Detection*> out;
  for (const auto& d : detections) {
    if (d.is_door()) out.push_back(&d);
  }
  return out;
}

const Detection* DetectionSet::find(std::string_view id) const {
  for (const auto& d : detections) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const ResolvedLabel* DetectionSet::label_for(std::string_view room) const {
  for (const auto& l : labels) {
    if (text::names_equal(l.name, room)) return &l;
  }
  return nullptr;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1-based line of each record object, found by a bracket scan that skips strings.
std::vector<int> record_lines(std::string_view content, int record_depth) {
  std::vector<int> lines;
  int line = 1;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : content) {
    if (c == '\n') ++line;
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      if (c == '{' && depth == record_depth) lines.push_back(line);
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
    }
  }
  return lines;
}

int line_of(std::size_t byte_offset, std::string_view content) {
  const auto end = std::min(byte_offset, content.size());
  return 1 + static_cast<int>(std::count(content.begin(), content.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

json parse_json_document(std::string_view content, std::string_view source) {
  try {
    return json::parse(content);
  } catch (const json::parse_error& e) {
    throw IngestError(std::string(source) + ":" + std::to_string(line_of(e.byte, content)) + ": " + e.what());
  }
}

std::optional<Point> point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) return std::nullopt;
  return Point{j[0].get<double>(), j[1].get<double>()};
}

std::string where(std::string_view source, const std::vector<int>& lines, std::size_t i) {
  std::ostringstream ss;
  ss << source;
  if (i < lines.size()) ss << ":" << lines[i];
  ss << ": record " << i;
  return ss.str();
}

}  // namespace

DetectionSet parse_detections(std::string_view content, std::string_view source) {
  const json doc = parse_json_document(content, source);
  DetectionSet set;
  const json* records = nullptr;
  int depth = 1;
  if (doc.is_array()) {
    records = &doc;
  } else if (doc.is_object() && doc.contains("detections") && doc["detections"].is_array()) {
    records = &doc["detections"];
    set.image_ref = doc.value("image_ref", std::string());
    depth = 2;
  } else {
    throw IngestError(std::string(source) + ": expected an array of detection records");
  }

  const auto lines = record_lines(content, depth);
  std::vector<std::string> diagnostics;
  int door_counter = 0;
  std::map<std::string, int> other_counter;
  for (std::size_t i = 0; i < records->size(); ++i) {
    const json& r = (*records)[i];
    const std::string at = where(source, lines, i);
    if (!r.is_object()) {
      diagnostics.push_back(at + ": not an object");
      continue;
    }
    Detection d;
    std::vector<std::string> problems;
    if (r.contains("class") && r["class"].is_string() && !r["class"].get<std::string>().empty()) {
      d.class_name = r["class"].get<std::string>();
    } else {
      problems.push_back("missing or empty \"class\"");
    }
    if (r.contains("confidence") && r["confidence"].is_number()) {
      d.confidence = r["confidence"].get<double>();
      if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
        problems.push_back("confidence " + text::format_number(d.confidence) + " outside [0,1]");
      }
    } else {
      problems.push_back("missing numeric \"confidence\"");
    }
    const auto bbox = r.contains("bbox") ? bbox_from_json(r["bbox"]) : std::nullopt;
    if (!bbox || !bbox->valid()) {
      problems.push_back("\"bbox\" must be [x1,y1,x2,y2] with x1<x2, y1<y2");
    } else {
      d.bbox = *bbox;
    }
    if (r.contains("center")) {
      if (auto c = point_from_json(r["center"])) {
        d.center = *c;
        if (bbox && bbox->valid() && !bbox->contains(*c)) problems.push_back("center lies outside bbox");
      } else {
        problems.push_back("\"center\" must be [x,y]");
      }
    } else if (bbox) {
      d.center = bbox->center();
    }
    if (r.contains("id") && r["id"].is_string()) d.id = r["id"].get<std::string>();

    if (!problems.empty()) {
      for (const auto& p : problems) diagnostics.push_back(at + ": " + p);
      continue;
    }
    if (d.is_door()) {
      ++door_counter;
      if (d.id.empty()) d.id = "Door_D" + std::to_string(door_counter);
      if (!is_door_id(d.id)) {
        diagnostics.push_back(at + ": door id \"" + d.id + "\" must look like Door_D<n>");
        continue;
      }
    } else if (d.id.empty()) {
      const std::string cls = text::name_key(d.class_name);
      d.id = cls + "_" + std::to_string(++other_counter[cls]);
    }
    set.detections.push_back(std::move(d));
  }

  std::map<std::string, int> ids;
  for (const auto& d : set.detections) {
    if (++ids[d.id] == 2) diagnostics.push_back(std::string(source) + ": duplicate detection id " + d.id);
  }

  if (!diagnostics.empty()) {
    throw IngestError(std::string(source) + ": " + std::to_string(diagnostics.size()) + " malformed record(s)",
                      diagnostics);
  }
  return set;
}

DetectionSet load_detections(const std::filesystem::path& path) {
  DetectionSet set = parse_detections(read_file(path), path.string());
  return set;
}

std::vector<OcrToken> parse_ocr_tokens(std::string_view content, std::string_view source) {
  const json doc = parse_json_document(content, source);
  if (!doc.is_array()) throw IngestError(std::string(source) + ": expected an array of OCR tokens");
  const auto lines = record_lines(content, 1);
  std::vector<OcrToken> tokens;
  std::vector<std::string> diagnostics;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& r = doc[i];
    const std::string at = where(source, lines, i);
    if (!r.is_object() || !r.contains("text") || !r["text"].is_string() ||
        text::trim(r["text"].get<std::string>()).empty()) {
      diagnostics.push_back(at + ": \"text\" must be a non-empty string");
      continue;
    }
    OcrToken t;
    t.text = r["text"].get<std::string>();
    auto p = r.contains("position") ? point_from_json(r["position"]) : std::nullopt;
    if (!p) {
      diagnostics.push_back(at + ": \"position\" must be [x,y]");
      continue;
    }
    t.position = *p;
    if (r.contains("confidence") && !r["confidence"].is_null()) {
      const double c = r["confidence"].get<double>();
      if (!(c >= 0.0 && c <= 1.0)) {
        diagnostics.push_back(at + ": confidence outside [0,1]");
        continue;
      }
      t.confidence = c;
    }
    tokens.push_back(std::move(t));
  }
  if (!diagnostics.empty()) {
    throw IngestError(std::string(source) + ": " + std::to_string(diagnostics.size()) + " malformed token(s)",
                      diagnostics);
  }
  return tokens;
}

std::vector<OcrToken> load_ocr_tokens(const std::vector<std::filesystem::path>& paths) {
  std::vector<OcrToken> all;
  for (const auto& p : paths) {
    auto tokens = parse_ocr_tokens(read_file(p), p.string());
    all.insert(all.end(), tokens.begin(), tokens.end());
  }
  return all;
}

std::vector<std::string> load_roster(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    names.push_back(std::move(t));
  }
  return names;
}

namespace {

char32_t fold(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

std::u32string folded_code_points(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = b;
    if (b >= 0xF0 && b < 0xF8) { len = 4; cp = b & 0x07; }
    else if (b >= 0xE0) { len = 3; cp = b & 0x0F; }
    else if (b >= 0xC0) { len = 2; cp = b & 0x1F; }
    if (len > 1) {
      bool ok = i + static_cast<std::size_t>(len) <= s.size();
      for (int k = 1; ok && k < len; ++k) {
        const auto cb = static_cast<unsigned char>(s[i + k]);
        ok = (cb & 0xC0) == 0x80;
        cp = (cp << 6) | (cb & 0x3F);
      }
      if (!ok) {
        len = 1;
        cp = b;
      }
    }
    out.push_back(fold(cp));
    i += static_cast<std::size_t>(len);
  }
  return out;
}

}  // namespace

double levenshtein_ratio(std::string_view a, std::string_view b) {
  const std::u32string x = folded_code_points(a);
  const std::u32string y = folded_code_points(b);
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;

  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[y.size()]) / static_cast<double>(longest);
}

LabelMatch match_labels(const std::vector<OcrToken>& tokens, const std::vector<std::string>& known,
                        double threshold) {
  LabelMatch out;
  for (const auto& t : tokens) {
    const std::string raw = text::trim(t.text);
    if (known.empty()) {
      out.labels.push_back({raw, t.position, t.confidence});
      continue;
    }
    double best = -1.0;
    const std::string* best_name = nullptr;
    for (const auto& k : known) {
      const double r = levenshtein_ratio(raw, k);
      if (r > best) {
        best = r;
        best_name = &k;
      }
    }
    if (best >= threshold) {
      out.labels.push_back({*best_name, t.position, t.confidence});
    } else {
      out.log.push_back("dropped OCR token \"" + raw + "\": best ratio " + text::format_number(best) +
                        (best_name ? " against \"" + *best_name + "\"" : std::string()) + " below " +
                        text::format_number(threshold));
    }
  }
  return out;
}

std::vector<std::string> number_duplicates(const std::vector<std::string>& names) {
  std::map<std::string, int> total;
  for (const auto& n : names) ++total[text::name_key(n)];
  std::map<std::string, int> seen;
  std::vector<std::string> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    const std::string key = text::name_key(n);
    if (total[key] > 1) {
      out.push_back(text::trim(n) + " " + std::to_string(++seen[key]));
    } else {
      out.push_back(n);
    }
  }
  return out;
}

std::vector<ResolvedLabel> resolve_labels(const std::vector<OcrToken>& tokens,
                                          const std::vector<std::string>& known, std::vector<std::string>* log) {
  LabelMatch m = match_labels(tokens, known);
  if (log) log->insert(log->end(), m.log.begin(), m.log.end());
  std::vector<std::string> names;
  for (const auto& l : m.labels) names.push_back(l.name);
  names = number_duplicates(names);
  for (std::size_t i = 0; i < names.size(); ++i) m.labels[i].name = names[i];
  return m.labels;
}

json detection_to_json(const Detection& d) {
  return {{"id", d.id},
          {"class", d.class_name},
          {"confidence", d.confidence},
          {"bbox", bbox_to_json(d.bbox)},
          {"center", json::array({d.center.x, d.center.y})}};
}

json detection_set_to_json(const DetectionSet& set) {
  json dets = json::array();
  for (const auto& d : set.detections) dets.push_back(detection_to_json(d));
  json labels = json::array();
  for (const auto& l : set.labels) {
    json jl = {{"name", l.name}, {"position", json::array({l.position.x, l.position.y})}};
    if (l.confidence) jl["confidence"] = *l.confidence;
    labels.push_back(std::move(jl));
  }
  return {{"image_ref", set.image_ref}, {"detections", dets}, {"labels", labels}};
}

DetectionSet detection_set_from_json(const json& j) {
  DetectionSet set = parse_detections(json{{"image_ref", j.value("image_ref", std::string())},
                                           {"detections", j.at("detections")}}
                                          .dump());
  for (const auto& jl : j.value("labels", json::array())) {
    ResolvedLabel l;
    l.name = jl.at("name").get<std::string>();
    l.position = {jl.at("position").at(0).get<double>(), jl.at("position").at(1).get<double>()};
    if (jl.contains("confidence")) l.confidence = jl["confidence"].get<double>();
    set.labels.push_back(std::move(l));
  }
  return set;
}

}  // namespace floornav
