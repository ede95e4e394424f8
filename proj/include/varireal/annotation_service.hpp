#pragma once

#include "varireal/annotation.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace varireal {

// HTTP front of an annotation session.
//   GET  /items/next?annotator=ID  -> {"done": false, "item": {...}, "progress": {...}} or {"done": true, ...}
//   POST /ratings                  -> 200 {"ok": true}; 422 bad rating; 404 unknown item; 400 bad JSON
//   GET  /export                   -> tab-separated ratings
//   GET  /aggregate                -> per-group correctness and naturalness
//   GET  /images/ID                -> PNG of a session item
//   GET  /progress?annotator=ID
// Every response carries permissive CORS headers for a browser client.
class AnnotationServer {
 public:
  AnnotationServer(const AnnotationSession& session, RatingStore& store, std::filesystem::path workspace_root);
  ~AnnotationServer();

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  void serve();  // blocks until stop()
  void start();  // serve() on a background thread
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  const AnnotationSession& session_;
  RatingStore& store_;
  std::filesystem::path root_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace varireal
