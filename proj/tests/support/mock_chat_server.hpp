#pragma once

// In-process OpenAI-style chat completions server for live-backend tests.

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace mock {

struct Reply {
  std::string content;
  int chunks = 1;                   // content is split into this many pieces
  std::chrono::milliseconds delay{0};  // before each piece
  std::optional<std::pair<long, long>> usage;  // prompt, completion
  int status = 200;
};

struct Request {
  std::string model;
  std::string prompt;
  std::string authorization;
};

class ChatServer {
 public:
  using Script = std::function<Reply(const Request&)>;

  explicit ChatServer(Script script);
  ~ChatServer();

  std::string url() const;
  /// "<model>|<prompt>" for every stream the client dropped early.
  std::vector<std::string> aborts() const;
  std::vector<Request> requests() const;

 private:
  Script script_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::vector<std::string> aborts_;
  std::vector<Request> requests_;
};

/// The value after "step: " in a rendered prompt, or 0.
int step_of(const std::string& prompt);

}  // namespace mock
