#include <httplib.h>

#include "drafter/service.hpp"

namespace drafter {

struct HttpServer::Impl {
  explicit Impl(const ApiRouter& r) : router(r) {}

  const ApiRouter& router;
  httplib::Server server;
};

HttpServer::HttpServer(const ApiRouter& router) : impl_(std::make_unique<Impl>(router)) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = impl_->router.handle(req.method, req.path, req.body, req.get_header_value("Authorization"));
    res.status = reply.status;
    res.set_content(reply.body, "application/json; charset=utf-8");
  };
  auto& s = impl_->server;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Get(".*", forward);
  s.Post(".*", forward);
  s.Patch(".*", forward);
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace drafter
