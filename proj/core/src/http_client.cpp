#include "http_client.hpp"

#include <chrono>

#include <httplib.h>

namespace drafter::detail {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  ParsedUrl out;
  const auto scheme_end = url.find("://");
  const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) {
    out.origin = url;
    out.path = "/";
  } else {
    out.origin = url.substr(0, path_begin);
    out.path = url.substr(path_begin);
  }
  return out;
}

}  // namespace

HttpResult http_post_json(const std::string& url, const std::string& body, const HeaderList& headers,
                          int timeout_ms) {
  HttpResult result;
  const auto parsed = split_url(url);
  const auto start = std::chrono::steady_clock::now();

  httplib::Client client(parsed.origin);
  if (!client.is_valid()) {
    result.transport_failed = true;
    result.error = "unsupported URL " + url;
    return result;
  }
  const auto seconds = timeout_ms / 1000;
  const auto micros = (timeout_ms % 1000) * 1000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  auto res = client.Post(parsed.path, hdrs, body, "application/json");
  result.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    result.transport_failed = true;
    const auto err = res.error();
    result.error = httplib::to_string(err);
    result.timed_out = err == httplib::Error::ConnectionTimeout ||
                       (err == httplib::Error::Read && result.elapsed_ms >= timeout_ms * 0.9);
    return result;
  }
  result.status = res->status;
  result.body = res->body;
  return result;
}

}  // namespace drafter::detail
