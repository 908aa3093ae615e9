#pragma once

// Provider-agnostic chat completion: prompt templates, a call-logging gateway,
// an HTTP provider for OpenAI-compatible endpoints and a deterministic mock.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "floornav/errors.hpp"

namespace floornav::llm {

enum class TemplateId { parser, self_critic, planner, safety };

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view s);

using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
  TemplateId id = TemplateId::parser;
  int version = 1;
  std::string body;

  /// Placeholder names in order of first appearance: `{name}` with name in [a-z_][a-z0-9_]*.
  std::vector<std::string> placeholders() const;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

/// Substitutes every placeholder; throws PromptError("missing binding: <name>").
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

/// Prompt assets loaded from a directory holding prompts.json plus one text file per template.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);
  /// Directory baked in at build time.
  static std::filesystem::path default_dir();
  static PromptLibrary load_default() { return load(default_dir()); }

  const PromptTemplate& get(TemplateId id) const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

struct CompletionRequest {
  std::string prompt;
  std::optional<std::string> image_ref;
  double temperature = 0.0;
  int max_tokens = 4096;
  /// Template and bindings the prompt was rendered from; used for mock keying and logs.
  std::optional<TemplateId> template_id;
  Bindings bindings;
};

struct ProviderConfig {
  std::string endpoint;
  std::string model_name;
  /// Name of the environment variable holding the API key.
  std::string auth_env = "FLOORNAV_API_KEY";
  double timeout_s = 60.0;
  int max_transport_retries = 2;

  /// FLOORNAV_ENDPOINT, FLOORNAV_MODEL, FLOORNAV_AUTH_ENV, FLOORNAV_TIMEOUT.
  static ProviderConfig from_env();
  void validate() const;
};

class GatewayError : public Error {
 public:
  enum class Kind { timeout, auth, transport, no_fixture, config };
  GatewayError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  bool retryable() const { return kind_ == Kind::timeout || kind_ == Kind::transport; }

 private:
  Kind kind_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  /// Single attempt. Throws GatewayError.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// OpenAI-compatible /chat/completions over HTTP(S). Images are sent inline as base64 data URLs.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config);
  std::string name() const override { return "http:" + config_.model_name; }
  std::string complete(const CompletionRequest& request) override;

 private:
  ProviderConfig config_;
};

/// Stable key over (template id, bindings sorted by name).
std::string fixture_key(TemplateId id, const Bindings& bindings);

/// Deterministic provider. Lookup order: exact fixture key, then the
/// per-template scripted sequence (the last element repeats), else a
/// no_fixture GatewayError.
class MockProvider : public Provider {
 public:
  MockProvider() = default;

  /// Directory with index.json: {"entries":[{"key","template","file","note"}],
  /// "sequences":{"parser":["a.json","b.json"]}}; files relative to the directory.
  static std::shared_ptr<MockProvider> from_directory(const std::filesystem::path& dir);

  void add_fixture(TemplateId id, const Bindings& bindings, std::string response);
  void add_fixture(const std::string& key, std::string response);
  void set_sequence(TemplateId id, std::vector<std::string> responses);

  std::string name() const override { return "mock"; }
  std::string complete(const CompletionRequest& request) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::string> by_key_;
  std::map<TemplateId, std::vector<std::string>> sequences_;
  std::map<TemplateId, std::size_t> cursor_;
};

struct CallRecord {
  std::optional<TemplateId> template_id;
  std::string prompt;
  std::string response;
  int transport_attempts = 0;
  std::optional<std::string> error;
};

/// Wraps a provider with bounded transport retries and an append-only call log.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, int max_transport_retries = 2);

  std::string complete(const CompletionRequest& request);

  std::vector<CallRecord> calls() const;
  std::size_t call_count(TemplateId id) const;
  std::vector<std::string> prompts(TemplateId id) const;
  /// Retry and failure notes.
  std::vector<std::string> log() const;
  const Provider& provider() const { return *provider_; }

 private:
  std::shared_ptr<Provider> provider_;
  int max_transport_retries_;
  mutable std::mutex mu_;
  std::vector<CallRecord> calls_;
  std::vector<std::string> log_;
};

class PayloadError : public Error {
 public:
  enum class Kind { no_payload, malformed };
  PayloadError(Kind kind, const std::string& what, std::string excerpt)
      : Error(what), kind_(kind), excerpt_(std::move(excerpt)) {}
  Kind kind() const { return kind_; }
  const std::string& excerpt() const { return excerpt_; }

 private:
  Kind kind_;
  std::string excerpt_;
};

/// Strips code fences and prose, then parses the first balanced top-level
/// JSON object or array that is valid JSON.
nlohmann::json extract_structured_payload(std::string_view text);

}  // namespace floornav::llm
