#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace elate::llm {

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
  friend bool operator==(const Message&, const Message&) = default;
};

struct LlmRequest {
  std::vector<Message> messages;
  std::size_t sample_count = 4;
  double temperature = 1.0;
  std::string model;
};

struct TokenUsage {
  std::size_t prompt = 0;
  std::size_t completion = 0;
};

struct LlmResponse {
  std::vector<std::string> texts;
  TokenUsage usage;
};

/// Something that turns a prompt into candidate programs. Backends keep a
/// per-generation conversation; draw_samples prepends it to the request.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Sends `prompt` as a user message after the stored history.
  virtual LlmResponse draw_samples(const std::string& prompt, std::size_t sample_count) = 0;
  virtual void clear_history() = 0;
  [[nodiscard]] virtual const std::vector<Message>& history() const = 0;
};

/// Conversation kept between prompts of one generation: each prompt and the
/// first reply to it, capped at `max_messages` (oldest dropped first).
class History {
 public:
  explicit History(std::size_t max_messages = 20) : max_(max_messages) {}
  void record(const std::string& prompt, const std::vector<std::string>& replies);
  void clear() { messages_.clear(); }
  [[nodiscard]] const std::vector<Message>& messages() const { return messages_; }

 private:
  std::size_t max_;
  std::vector<Message> messages_;
};

/// Replays canned responses in order. Script files hold the responses
/// separated by lines containing only `---`.
class MockBackend : public LlmBackend {
 public:
  explicit MockBackend(std::vector<std::string> responses);
  static MockBackend from_script(std::string_view script);
  static MockBackend from_file(const std::filesystem::path& path);

  /// The next `sample_count` responses; fewer (possibly none) once exhausted.
  LlmResponse draw_samples(const std::string& prompt, std::size_t sample_count) override;
  void clear_history() override { history_.clear(); }
  [[nodiscard]] const std::vector<Message>& history() const override { return history_.messages(); }

  [[nodiscard]] std::size_t remaining() const { return queue_.size(); }
  [[nodiscard]] bool exhausted() const { return queue_.empty(); }
  /// Every prompt received, in order.
  [[nodiscard]] const std::vector<std::string>& prompts() const { return prompts_; }

 private:
  std::deque<std::string> queue_;
  std::vector<std::string> prompts_;
  History history_;
};

/// Splits a mock script into responses. Leading and trailing blank lines of
/// each response are removed; empty responses are kept as empty strings.
std::vector<std::string> split_script(std::string_view script);

struct HttpOptions {
  std::string endpoint;  // full URL of the chat-completions resource
  std::string model;
  double temperature = 1.0;
  std::chrono::milliseconds timeout{60000};
  std::size_t retries = 3;                      // after the first attempt
  std::chrono::milliseconds base_delay{1000};  // doubles before each further retry
  std::string api_key_env = "ELATE_API_KEY";
  /// Replaced in tests to avoid real waits.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Chat-completions client. The API key comes from the environment only.
class HttpBackend : public LlmBackend {
 public:
  /// Throws LlmError if the credential variable is unset or empty, or the
  /// endpoint URL is malformed.
  explicit HttpBackend(HttpOptions options);

  LlmResponse draw_samples(const std::string& prompt, std::size_t sample_count) override;
  void clear_history() override { history_.clear(); }
  [[nodiscard]] const std::vector<Message>& history() const override { return history_.messages(); }

  /// JSON body for a request (exposed for the contract test).
  [[nodiscard]] static std::string request_body(const LlmRequest& request);
  /// Parses a chat-completions response body; throws LlmError when malformed.
  [[nodiscard]] static LlmResponse parse_response(const std::string& body);

 private:
  HttpOptions options_;
  std::string api_key_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  History history_;
};

/// First fenced code block of `raw` (any info string after the opening fence
/// is dropped); the whole trimmed text when there is no fence.
std::string extract_code(std::string_view raw);

}  // namespace elate::llm
