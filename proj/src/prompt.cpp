#include <fstream>
#include <regex>
#include <sstream>

#include "floornav/llm.hpp"

#ifndef FLOORNAV_PROMPT_DIR
#define FLOORNAV_PROMPT_DIR "assets/prompts"
#endif

namespace floornav::llm {

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::parser: return "parser";
    case TemplateId::self_critic: return "self_critic";
    case TemplateId::planner: return "planner";
    case TemplateId::safety: return "safety";
  }
  return "parser";
}

std::optional<TemplateId> parse_template_id(std::string_view s) {
  for (TemplateId id : {TemplateId::parser, TemplateId::self_critic, TemplateId::planner, TemplateId::safety}) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

namespace {
const std::regex& placeholder_re() {
  static const std::regex re(R"(\{([a-z_][a-z0-9_]*)\})");
  return re;
}
}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), placeholder_re()); it != std::sregex_iterator();
       ++it) {
    const std::string name = (*it)[1].str();
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
  std::string out;
  auto last = tmpl.body.cbegin();
  for (auto it = std::sregex_iterator(tmpl.body.begin(), tmpl.body.end(), placeholder_re());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::string name = m[1].str();
    const auto found = bindings.find(name);
    if (found == bindings.end()) throw PromptError("missing binding: " + name);
    out.append(last, m[0].first);
    out += found->second;
    last = m[0].second;
  }
  out.append(last, tmpl.body.cend());
  return out;
}

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("FLOORNAV_PROMPT_DIR")) return env;
  return FLOORNAV_PROMPT_DIR;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw PromptError("cannot read prompt asset " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read(dir / "prompts.json"));
  } catch (const nlohmann::json::exception& e) {
    throw PromptError("malformed prompt manifest in " + dir.string() + ": " + e.what());
  }
  PromptLibrary lib;
  for (const auto& [key, entry] : manifest.at("templates").items()) {
    const auto id = parse_template_id(key);
    if (!id) throw PromptError("unknown template id in manifest: " + key);
    PromptTemplate t;
    t.id = *id;
    t.version = entry.value("version", 1);
    t.body = read(dir / entry.at("file").get<std::string>());
    lib.templates_[*id] = std::move(t);
  }
  for (TemplateId id : {TemplateId::parser, TemplateId::self_critic, TemplateId::planner, TemplateId::safety}) {
    if (!lib.templates_.count(id)) {
      throw PromptError("prompt manifest lacks template " + std::string(to_string(id)));
    }
  }
  return lib;
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const { return templates_.at(id); }

}  // namespace floornav::llm
