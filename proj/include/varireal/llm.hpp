#pragma once

#include "varireal/types.hpp"

#include <deque>
#include <mutex>
#include <string>
#include <vector>

namespace varireal {

struct Message {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  bool operator==(const Message&) const = default;
};

using Conversation = std::vector<Message>;

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Throws Errc::backend_unavailable when the model cannot be reached.
  virtual std::string send(const Conversation& conversation) = 0;
};

// Replays a fixed queue of replies and records every conversation it saw.
class ScriptedLlm final : public LlmBackend {
 public:
  explicit ScriptedLlm(std::vector<std::string> replies);

  std::string send(const Conversation& conversation) override;

  const std::vector<Conversation>& calls() const { return calls_; }

 private:
  std::deque<std::string> replies_;
  std::vector<Conversation> calls_;
  std::mutex mutex_;
};

// Offline stand-in that answers generation and self-check requests from a
// built-in vocabulary. Replies depend only on the request text, so runs are
// reproducible. `drop_every` > 0 makes the self-check drop every n-th answer.
class CannedLlm final : public LlmBackend {
 public:
  explicit CannedLlm(int drop_every = 0);

  std::string send(const Conversation& conversation) override;

 private:
  int drop_every_;
};

}  // namespace varireal
