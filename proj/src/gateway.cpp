#include <cstdlib>
#include <fstream>
#include <sstream>

#include "floornav/llm.hpp"
#include "floornav/text.hpp"

namespace floornav::llm {

using nlohmann::json;

ProviderConfig ProviderConfig::from_env() {
  ProviderConfig c;
  if (const char* v = std::getenv("FLOORNAV_ENDPOINT")) c.endpoint = v;
  if (const char* v = std::getenv("FLOORNAV_MODEL")) c.model_name = v;
  if (const char* v = std::getenv("FLOORNAV_AUTH_ENV")) c.auth_env = v;
  if (const char* v = std::getenv("FLOORNAV_TIMEOUT")) c.timeout_s = std::atof(v);
  return c;
}

void ProviderConfig::validate() const {
  if (endpoint.empty()) throw GatewayError(GatewayError::Kind::config, "provider endpoint is not configured");
  if (model_name.empty()) throw GatewayError(GatewayError::Kind::config, "provider model is not configured");
  if (!(timeout_s > 0.0)) throw GatewayError(GatewayError::Kind::config, "provider timeout must be > 0");
}

std::string fixture_key(TemplateId id, const Bindings& bindings) {
  std::string material(to_string(id));
  material += '\n';
  for (const auto& [k, v] : bindings) {  // std::map iterates sorted by name
    material += k;
    material += '=';
    material += v;
    material += '\0';
  }
  return text::hex64(text::fnv1a64(material));
}

// ---------------------------------------------------------------------------

std::shared_ptr<MockProvider> MockProvider::from_directory(const std::filesystem::path& dir) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw GatewayError(GatewayError::Kind::no_fixture, "cannot read fixture " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  json index;
  try {
    index = json::parse(read(dir / "index.json"));
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::no_fixture, "malformed fixture index in " + dir.string() + ": " + e.what());
  }
  auto mock = std::make_shared<MockProvider>();
  const json entries = index.value("entries", json::array());
  const json sequences = index.value("sequences", json::object());
  for (const auto& e : entries) {
    mock->add_fixture(e.at("key").get<std::string>(), read(dir / e.at("file").get<std::string>()));
  }
  for (const auto& [name, files] : sequences.items()) {
    const auto id = parse_template_id(name);
    if (!id) throw GatewayError(GatewayError::Kind::no_fixture, "unknown template in fixture index: " + name);
    std::vector<std::string> responses;
    for (const auto& f : files) responses.push_back(read(dir / f.get<std::string>()));
    mock->set_sequence(*id, std::move(responses));
  }
  return mock;
}

void MockProvider::add_fixture(TemplateId id, const Bindings& bindings, std::string response) {
  add_fixture(fixture_key(id, bindings), std::move(response));
}

void MockProvider::add_fixture(const std::string& key, std::string response) {
  std::lock_guard lock(mu_);
  by_key_[key] = std::move(response);
}

void MockProvider::set_sequence(TemplateId id, std::vector<std::string> responses) {
  std::lock_guard lock(mu_);
  sequences_[id] = std::move(responses);
  cursor_[id] = 0;
}

std::string MockProvider::complete(const CompletionRequest& request) {
  std::lock_guard lock(mu_);
  if (!request.template_id) {
    throw GatewayError(GatewayError::Kind::no_fixture, "mock provider needs a template id to key fixtures");
  }
  const std::string key = fixture_key(*request.template_id, request.bindings);
  if (auto it = by_key_.find(key); it != by_key_.end()) return it->second;
  if (auto it = sequences_.find(*request.template_id); it != sequences_.end() && !it->second.empty()) {
    std::size_t& cur = cursor_[*request.template_id];
    const std::string& out = it->second[std::min(cur, it->second.size() - 1)];
    ++cur;
    return out;
  }
  throw GatewayError(GatewayError::Kind::no_fixture, "no mock fixture for " +
                                                        std::string(to_string(*request.template_id)) +
                                                        " key " + key);
}

// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, int max_transport_retries)
    : provider_(std::move(provider)), max_transport_retries_(max_transport_retries) {}

std::string Gateway::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw GatewayError(GatewayError::Kind::config, "empty prompt");
  CallRecord record;
  record.template_id = request.template_id;
  record.prompt = request.prompt;
  for (int attempt = 0;; ++attempt) {
    record.transport_attempts = attempt + 1;
    try {
      record.response = provider_->complete(request);
      std::lock_guard lock(mu_);
      calls_.push_back(record);
      return record.response;
    } catch (const GatewayError& e) {
      std::lock_guard lock(mu_);
      if (e.retryable() && attempt < max_transport_retries_) {
        log_.push_back("transport retry " + std::to_string(attempt + 1) + "/" +
                       std::to_string(max_transport_retries_) + ": " + e.what());
        continue;
      }
      record.error = e.what();
      calls_.push_back(record);
      log_.push_back(std::string("completion failed: ") + e.what());
      throw;
    }
  }
}

std::vector<CallRecord> Gateway::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t Gateway::call_count(TemplateId id) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(calls_.begin(), calls_.end(),
                                                [&](const CallRecord& c) { return c.template_id == id; }));
}

std::vector<std::string> Gateway::prompts(TemplateId id) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& c : calls_) {
    if (c.template_id == id) out.push_back(c.prompt);
  }
  return out;
}

std::vector<std::string> Gateway::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

// ---------------------------------------------------------------------------

namespace {

std::string excerpt(std::string_view s, std::size_t max = 160) {
  if (s.size() <= max) return std::string(s);
  return std::string(s.substr(0, max)) + "...";
}

// Index one past the bracket matching s[open], or npos when unbalanced.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      stack.push_back(c == '{' ? '}' : ']');
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::string_view::npos;
      stack.pop_back();
      if (stack.empty()) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string_view strip_fences(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  auto body = text.find('\n', open);
  if (body == std::string_view::npos) return text;
  ++body;
  const auto close = text.find("```", body);
  if (close == std::string_view::npos) return text.substr(body);
  return text.substr(body, close - body);
}

}  // namespace

json extract_structured_payload(std::string_view text) {
  const std::string_view body = strip_fences(text);
  std::optional<std::string> first_error;
  std::string first_candidate;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{' && body[i] != '[') continue;
    const std::size_t end = balanced_end(body, i);
    if (end == std::string_view::npos) continue;
    const std::string_view candidate = body.substr(i, end - i);
    try {
      return json::parse(candidate);
    } catch (const json::parse_error& e) {
      if (!first_error) {
        first_error = e.what();
        first_candidate = excerpt(candidate);
      }
    }
  }
  if (first_error) {
    throw PayloadError(PayloadError::Kind::malformed, "malformed JSON payload: " + *first_error, first_candidate);
  }
  throw PayloadError(PayloadError::Kind::no_payload, "no balanced JSON object or array in model output",
                     excerpt(text));
}

}  // namespace floornav::llm
