#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "floornav/knowledge_base.hpp"
#include "floornav/llm.hpp"

namespace floornav::llm {

using nlohmann::json;

namespace {

std::string base64(std::string_view data) {
  static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(data[i]) << 16) | (static_cast<unsigned char>(data[i + 1]) << 8) |
                       static_cast<unsigned char>(data[i + 2]);
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
  }
  if (i < data.size()) {
    unsigned v = static_cast<unsigned char>(data[i]) << 16;
    if (i + 1 < data.size()) v |= static_cast<unsigned char>(data[i + 1]) << 8;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += i + 1 < data.size() ? table[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string mime_for(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  return "image/png";
}

struct Url {
  std::string scheme_host_port;
  std::string path;
};

Url split_url(const std::string& endpoint, std::string_view resource) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint, m, re)) {
    throw GatewayError(GatewayError::Kind::config, "endpoint is not an http(s) URL: " + endpoint);
  }
  std::string path = m[2].matched ? m[2].str() : "/v1";
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {m[1].str(), path + std::string(resource)};
}

json post_json(const ProviderConfig& config, const Url& url, const json& body) {
  httplib::Client client(url.scheme_host_port);
  const auto secs = static_cast<time_t>(config.timeout_s);
  const auto usecs = static_cast<time_t>((config.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (const char* key = std::getenv(config.auth_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = "request to " + config.endpoint + " failed: " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw GatewayError(GatewayError::Kind::timeout, what);
    }
    throw GatewayError(GatewayError::Kind::transport, what);
  }
  if (res->status == 401 || res->status == 403) {
    throw GatewayError(GatewayError::Kind::auth, "authentication rejected (HTTP " + std::to_string(res->status) +
                                                     "); check $" + config.auth_env);
  }
  if (res->status == 408 || res->status == 504) {
    throw GatewayError(GatewayError::Kind::timeout, "provider timed out (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw GatewayError(GatewayError::Kind::transport,
                       "provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::transport, std::string("provider response is not JSON: ") + e.what());
  }
}

}  // namespace

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) { config_.validate(); }

std::string HttpProvider::complete(const CompletionRequest& request) {
  const Url url = split_url(config_.endpoint, "/chat/completions");

  json content = json::array({{{"type", "text"}, {"text", request.prompt}}});
  if (request.image_ref) {
    std::ifstream in(*request.image_ref, std::ios::binary);
    if (!in) throw GatewayError(GatewayError::Kind::config, "cannot read image " + *request.image_ref);
    std::ostringstream ss;
    ss << in.rdbuf();
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + mime_for(*request.image_ref) + ";base64," + base64(ss.str())}}}});
  }
  const json body = {{"model", config_.model_name},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_tokens},
                     {"messages", json::array({{{"role", "user"}, {"content", content}}})}};

  const json reply = post_json(config_, url, body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::transport, std::string("unexpected provider response: ") + e.what());
  }
}

}  // namespace floornav::llm

namespace floornav {

HttpEmbedder::HttpEmbedder(llm::ProviderConfig config, std::size_t dimension)
    : config_(std::move(config)), dimension_(dimension) {
  config_.validate();
}

Vector HttpEmbedder::embed(std::string_view text) const {
  const llm::Url url = llm::split_url(config_.endpoint, "/embeddings");
  const nlohmann::json reply =
      llm::post_json(config_, url, {{"model", config_.model_name}, {"input", std::string(text)}});
  Vector v;
  try {
    v = reply.at("data").at(0).at("embedding").get<Vector>();
  } catch (const nlohmann::json::exception& e) {
    throw llm::GatewayError(llm::GatewayError::Kind::transport, std::string("unexpected embedding response: ") + e.what());
  }
  if (v.size() != dimension_) {
    throw llm::GatewayError(llm::GatewayError::Kind::transport,
                            "embedding has dimension " + std::to_string(v.size()) + ", expected " +
                                std::to_string(dimension_));
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

}  // namespace floornav
