#pragma once

#include <string>
#include <utility>
#include <vector>

namespace drafter::detail {

struct HttpResult {
  int status = 0;
  std::string body;
  /// Set when no HTTP response arrived at all.
  bool transport_failed = false;
  bool timed_out = false;
  std::string error;
  double elapsed_ms = 0.0;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// POST `body` as application/json to an absolute http(s) URL.
HttpResult http_post_json(const std::string& url, const std::string& body, const HeaderList& headers,
                          int timeout_ms);

}  // namespace drafter::detail
