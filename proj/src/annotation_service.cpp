#include "varireal/annotation_service.hpp"

#include "varireal/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <sstream>

namespace varireal {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json progress_json(const Progress& p) { return {{"rated", p.rated}, {"total", p.total}}; }

}  // namespace

AnnotationServer::AnnotationServer(const AnnotationSession& session, RatingStore& store,
                                   std::filesystem::path workspace_root)
    : session_(session), store_(store), root_(std::move(workspace_root)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::install_routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                         {"Access-Control-Allow-Headers", "Content-Type, Authorization"}});
  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Get("/items/next", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "annotator parameter required");
    const auto item = session_.next(annotator, store_);
    json body{{"progress", progress_json(session_.progress(annotator, store_))}};
    if (!item) {
      body["done"] = true;
    } else {
      body["done"] = false;
      body["item"] = to_json(*item);
      body["item"]["image_url"] = "/images/" + item->image_id;
    }
    send_json(res, 200, body);
  });

  s.Get("/progress", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "annotator parameter required");
    send_json(res, 200, progress_json(session_.progress(annotator, store_)));
  });

  s.Post("/ratings", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_error(res, 400, "body is not JSON");
    }
    try {
      Rating r = rating_from_json(body);
      r.timestamp.clear();  // server clock is authoritative
      session_.rate(std::move(r), store_);
      send_json(res, 200, {{"ok", true}});
    } catch (const Error& e) {
      if (e.code() == Errc::not_found) return send_error(res, 404, e.what());
      if (e.code() == Errc::invalid_argument) return send_error(res, 422, e.what());
      spdlog::error("rating failed: {}", e.what());
      send_error(res, 500, e.what());
    }
  });

  s.Get("/export", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(export_ratings_tsv(store_.all(), session_.items()), "text/tab-separated-values");
  });

  s.Get("/aggregate", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, to_json(aggregate_ratings(store_.all(), session_.items())));
  });

  s.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const AnnotationItem* item = session_.find(req.matches[1]);
    if (!item) return send_error(res, 404, "unknown item");
    std::ifstream in(root_ / item->path, std::ios::binary);
    if (!in) return send_error(res, 404, "image file missing");
    std::ostringstream bytes;
    bytes << in.rdbuf();
    res.set_content(bytes.str(), "image/png");
  });
}

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void AnnotationServer::serve() {
  if (port_ < 0) throw Error(Errc::precondition, "bind before serving");
  server_->listen_after_bind();
}

void AnnotationServer::start() {
  thread_ = std::thread([this] { serve(); });
  server_->wait_until_ready();
}

void AnnotationServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace varireal
