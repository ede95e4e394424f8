#pragma once

#include "varireal/auto_filter.hpp"
#include "varireal/llm.hpp"

#include <string>

namespace varireal {

// Splits "http://host:port/path" into the client base and the request path.
struct HttpEndpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with '/'

  static HttpEndpoint parse(const std::string& url);
};

// POSTs {"messages": [{"role", "content"}...]} and reads {"reply": "..."} or
// a chat-completions style {"choices": [{"message": {"content": "..."}}]}.
class HttpLlm : public LlmBackend {
 public:
  explicit HttpLlm(const std::string& url, int timeout_seconds = 120);
  std::string send(const Conversation& conversation) override;

 private:
  HttpEndpoint endpoint_;
  int timeout_;
};

// POSTs multipart fields "question", "choices" (JSON array) and "image" (PNG),
// and reads {"answer": "..."}.
class HttpVqa : public VqaBackend {
 public:
  explicit HttpVqa(const std::string& url, int timeout_seconds = 120);
  std::string ask(const Image& image, const std::string& question, const std::vector<std::string>& choices) override;

 private:
  HttpEndpoint endpoint_;
  int timeout_;
};

}  // namespace varireal
