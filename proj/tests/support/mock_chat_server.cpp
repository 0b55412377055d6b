#include "mock_chat_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace mock {

ChatServer::ChatServer(Script script) : script_(std::move(script)), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    Request r{body.at("model").get<std::string>(), body.at("messages").at(0).at("content").get<std::string>(),
              req.get_header_value("Authorization")};
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(r);
    }
    const Reply reply = script_(r);
    if (reply.status != 200) {
      res.status = reply.status;
      res.set_content(R"({"error":{"message":"rejected"}})", "application/json");
      return;
    }
    res.set_chunked_content_provider(
        "text/event-stream", [this, r, reply, sent = 0](std::size_t, httplib::DataSink& sink) mutable {
          auto abort = [&] {
            std::lock_guard lock(mutex_);
            aborts_.push_back(r.model + "|" + r.prompt);
            return false;
          };
          if (sent < reply.chunks) {
            std::this_thread::sleep_for(reply.delay);
            if (!sink.is_writable()) return abort();
            const std::size_t n = reply.content.size();
            const std::size_t lo = n * static_cast<std::size_t>(sent) / static_cast<std::size_t>(reply.chunks);
            const std::size_t hi = n * static_cast<std::size_t>(sent + 1) / static_cast<std::size_t>(reply.chunks);
            const nlohmann::json chunk = {{"choices", {{{"index", 0}, {"delta", {{"content", reply.content.substr(lo, hi - lo)}}}}}}};
            const std::string line = "data: " + chunk.dump() + "\n\n";
            if (!sink.write(line.data(), line.size())) return abort();
            ++sent;
            return true;
          }
          std::string tail;
          if (reply.usage) {
            const nlohmann::json u = {{"choices", nlohmann::json::array()},
                                      {"usage", {{"prompt_tokens", reply.usage->first},
                                                 {"completion_tokens", reply.usage->second},
                                                 {"total_tokens", reply.usage->first + reply.usage->second}}}};
            tail += "data: " + u.dump() + "\n\n";
          }
          tail += "data: [DONE]\n\n";
          sink.write(tail.data(), tail.size());
          sink.done();
          return true;
        });
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

ChatServer::~ChatServer() {
  server_->stop();
  thread_.join();
}

std::string ChatServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::vector<std::string> ChatServer::aborts() const {
  std::lock_guard lock(mutex_);
  return aborts_;
}

std::vector<Request> ChatServer::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

int step_of(const std::string& prompt) {
  const auto at = prompt.find("step: ");
  if (at == std::string::npos) return 0;
  return std::atoi(prompt.c_str() + at + 6);
}

}  // namespace mock
