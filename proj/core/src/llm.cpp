#include <fstream>
#include <sstream>

#include "elate/llm.hpp"

namespace elate::llm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string strip_blank_edges(const std::vector<std::string_view>& lines) {
  std::size_t begin = 0;
  std::size_t end = lines.size();
  while (begin < end && trim(lines[begin]).empty()) ++begin;
  while (end > begin && trim(lines[end - 1]).empty()) --end;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    out += lines[i];
    if (i + 1 < end) out += '\n';
  }
  return out;
}

}  // namespace

void History::record(const std::string& prompt, const std::vector<std::string>& replies) {
  messages_.push_back({"user", prompt});
  if (!replies.empty()) messages_.push_back({"assistant", replies.front()});
  while (messages_.size() > max_) messages_.erase(messages_.begin());
  // Keep the conversation starting with a user turn.
  while (!messages_.empty() && messages_.front().role != "user") messages_.erase(messages_.begin());
}

std::vector<std::string> split_script(std::string_view script) {
  std::vector<std::string> out;
  std::vector<std::string_view> current;
  std::size_t pos = 0;
  while (pos <= script.size()) {
    auto nl = script.find('\n', pos);
    if (nl == std::string_view::npos) nl = script.size();
    std::string_view line = script.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "---") {
      out.push_back(strip_blank_edges(current));
      current.clear();
    } else {
      current.push_back(line);
    }
    if (nl == script.size()) break;
    pos = nl + 1;
  }
  // A trailing separator does not open another (empty) response.
  std::string last = strip_blank_edges(current);
  if (!last.empty()) out.push_back(std::move(last));
  return out;
}

MockBackend::MockBackend(std::vector<std::string> responses) : queue_(responses.begin(), responses.end()) {}

MockBackend MockBackend::from_script(std::string_view script) { return MockBackend(split_script(script)); }

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LlmError("cannot read mock script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_script(ss.str());
}

LlmResponse MockBackend::draw_samples(const std::string& prompt, std::size_t sample_count) {
  prompts_.push_back(prompt);
  LlmResponse r;
  while (r.texts.size() < sample_count && !queue_.empty()) {
    r.texts.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
  history_.record(prompt, r.texts);
  return r;
}

std::string extract_code(std::string_view raw) {
  const auto open = raw.find("```");
  if (open == std::string_view::npos) return std::string(trim(raw));
  auto body_start = raw.find('\n', open);
  if (body_start == std::string_view::npos) return {};
  ++body_start;
  auto close = raw.find("```", body_start);
  if (close == std::string_view::npos) close = raw.size();
  std::string_view body = raw.substr(body_start, close - body_start);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' ' || body.back() == '\t'))
    body.remove_suffix(1);
  while (!body.empty() && (body.front() == '\n' || body.front() == '\r')) body.remove_prefix(1);
  return std::string(body);
}

}  // namespace elate::llm
