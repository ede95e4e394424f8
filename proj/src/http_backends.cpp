#include "varireal/http_backends.hpp"

#include "varireal/error.hpp"
#include "varireal/image_io.hpp"

#include <httplib.h>
#include <json.hpp>

namespace varireal {

using nlohmann::json;

HttpEndpoint HttpEndpoint::parse(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0)
    throw Error(Errc::config_error, "expected an http:// url, got '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  HttpEndpoint e;
  e.base = url.substr(0, slash);
  e.path = slash == std::string::npos ? "/" : url.substr(slash);
  if (e.base.size() <= scheme + 3) throw Error(Errc::config_error, "url has no host: '" + url + "'");
  return e;
}

namespace {

json post_checked(const HttpEndpoint& ep, int timeout, const std::function<httplib::Result(httplib::Client&)>& call) {
  httplib::Client client(ep.base);
  client.set_connection_timeout(10);
  client.set_read_timeout(timeout);
  auto res = call(client);
  if (!res) throw Error(Errc::backend_unavailable, ep.base + ep.path + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(Errc::backend_failure, ep.base + ep.path + " returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw Error(Errc::malformed_reply, ep.base + ep.path + " did not return JSON");
  }
}

}  // namespace

HttpLlm::HttpLlm(const std::string& url, int timeout_seconds)
    : endpoint_(HttpEndpoint::parse(url)), timeout_(timeout_seconds) {}

std::string HttpLlm::send(const Conversation& conversation) {
  json messages = json::array();
  for (const auto& m : conversation) messages.push_back({{"role", m.role}, {"content", m.content}});
  const std::string body = json{{"messages", messages}}.dump();
  const json reply = post_checked(endpoint_, timeout_, [&](httplib::Client& c) {
    return c.Post(endpoint_.path, body, "application/json");
  });
  if (reply.contains("reply") && reply["reply"].is_string()) return reply["reply"].get<std::string>();
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(Errc::malformed_reply, "llm reply has neither 'reply' nor 'choices'");
  }
}

HttpVqa::HttpVqa(const std::string& url, int timeout_seconds)
    : endpoint_(HttpEndpoint::parse(url)), timeout_(timeout_seconds) {}

std::string HttpVqa::ask(const Image& image, const std::string& question, const std::vector<std::string>& choices) {
  const httplib::MultipartFormDataItems items{
      {"question", question, "", ""},
      {"choices", json(choices).dump(), "", "application/json"},
      {"image", encode_png(image), "image.png", "image/png"},
  };
  const json reply =
      post_checked(endpoint_, timeout_, [&](httplib::Client& c) { return c.Post(endpoint_.path, items); });
  if (!reply.contains("answer") || !reply["answer"].is_string())
    throw Error(Errc::malformed_reply, "vqa reply has no 'answer'");
  return reply["answer"].get<std::string>();
}

}  // namespace varireal
