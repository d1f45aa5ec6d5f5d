#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "elate/llm.hpp"

namespace elate::llm {

namespace {

using nlohmann::json;

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') throw LlmError("environment variable " + options_.api_key_env + " is not set");
  api_key_ = key;

  const auto scheme_end = options_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw LlmError("endpoint is not a URL: " + options_.endpoint);
  const std::string scheme = options_.endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw LlmError("unsupported endpoint scheme: " + scheme);
  const auto path_start = options_.endpoint.find('/', scheme_end + 3);
  origin_ = options_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);
  if (origin_.size() <= scheme_end + 3) throw LlmError("endpoint has no host: " + options_.endpoint);
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpBackend::request_body(const LlmRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", request.model},
               {"messages", std::move(messages)},
               {"n", request.sample_count},
               {"temperature", request.temperature}};
  return body.dump();
}

LlmResponse HttpBackend::parse_response(const std::string& body) {
  LlmResponse out;
  try {
    const json doc = json::parse(body);
    const auto& choices = doc.at("choices");
    if (!choices.is_array()) throw LlmError("response 'choices' is not an array");
    for (const auto& choice : choices) {
      const auto& content = choice.at("message").at("content");
      out.texts.push_back(content.is_null() ? std::string() : content.get<std::string>());
    }
    if (const auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
      out.usage.prompt = usage->value("prompt_tokens", std::size_t{0});
      out.usage.completion = usage->value("completion_tokens", std::size_t{0});
    }
  } catch (const json::exception& e) {
    throw LlmError(std::string("malformed chat-completions response: ") + e.what());
  }
  return out;
}

LlmResponse HttpBackend::draw_samples(const std::string& prompt, std::size_t sample_count) {
  LlmRequest request;
  request.messages = history_.messages();
  request.messages.push_back({"user", prompt});
  request.sample_count = sample_count;
  request.temperature = options_.temperature;
  request.model = options_.model;
  const std::string body = request_body(request);

  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout);
  client.set_connection_timeout(0, timeout.count());
  client.set_read_timeout(0, timeout.count());
  client.set_write_timeout(0, timeout.count());
  const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

  std::string last_error;
  auto delay = options_.base_delay;
  for (std::size_t attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      options_.sleep(delay);
      delay *= 2;
    }
    const auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      LlmResponse out = parse_response(res->body);
      history_.record(prompt, out.texts);
      return out;
    }
    last_error = "HTTP status " + std::to_string(res->status);
    if (!retryable(res->status)) throw LlmError("request rejected: " + last_error);
  }
  throw LlmError("endpoint unreachable after retries: " + last_error);
}

}  // namespace elate::llm
