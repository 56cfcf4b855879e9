#include "drafter/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "drafter/text.hpp"
#include "http_client.hpp"

namespace drafter {

using json = nlohmann::json;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string ChatRequest::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out.push_back('\n');
    out += messages[i].content;
  }
  return out;
}

void validate_request(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(Errc::InvalidRequest, "request has no messages");
  if (request.messages.back().role != Role::User) {
    throw Error(Errc::InvalidRequest, "last message must come from the user");
  }
  if (!(request.temperature >= 0.0)) throw Error(Errc::InvalidRequest, "temperature must be >= 0");
  if (request.max_tokens <= 0) throw Error(Errc::InvalidRequest, "max_tokens must be positive");
}

ChatRequest make_user_request(std::string prompt, std::string tag) {
  ChatRequest req;
  req.messages.push_back({Role::User, std::move(prompt)});
  req.tag = std::move(tag);
  return req;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string line_value(std::string_view prompt, std::string_view key) {
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    auto end = prompt.find('\n', pos);
    if (end == std::string_view::npos) end = prompt.size();
    const auto line = prompt.substr(pos, end - pos);
    if (line.size() > key.size() && line.substr(0, key.size()) == key && line[key.size()] == ':') {
      return text::trim(line.substr(key.size() + 1));
    }
    pos = end + 1;
  }
  return {};
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string run_mock_script(const MockScript& script, const ChatRequest& request) {
  const auto prompt = request.prompt_text();
  const std::string* chosen = &script.default_template;
  for (const auto& rule : script.rules) {
    if (prompt.find(rule.pattern) != std::string::npos) {
      chosen = &rule.response_template;
      break;
    }
  }

  const std::string_view tmpl = *chosen;
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const auto name = tmpl.substr(open + 2, close - open - 2);
    if (name == "seed") {
      out += std::to_string(request.seed);
    } else if (name == "hash") {
      out += hex16(text::fnv1a64(prompt, request.seed));
    } else if (name.substr(0, 5) == "line:") {
      out += line_value(prompt, name.substr(5));
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    i = close + 2;
  }
  return out;
}

ChatResponse MockProvider::send(const ChatRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  ChatResponse resp;
  resp.text = run_mock_script(script_, request);
  resp.provider_id = id_;
  resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return resp;
}

// ---------------------------------------------------------------------------
// Remote

RemoteChatProvider::RemoteChatProvider(ProviderConfig config) : config_(std::move(config)) {
  validate_provider_config(config_);
}

ChatResponse RemoteChatProvider::send(const ChatRequest& request) {
  json body;
  body["model"] = config_.model_name;
  body["messages"] = json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  body["max_tokens"] = request.max_tokens;
  body["temperature"] = request.temperature;
  body["seed"] = request.seed;

  detail::HeaderList headers;
  if (!config_.api_key_env_var_name.empty()) {
    if (const char* key = std::getenv(config_.api_key_env_var_name.c_str()); key && *key) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }

  const auto result = detail::http_post_json(config_.endpoint_url, body.dump(), headers, config_.timeout_ms);
  if (result.transport_failed) {
    if (result.timed_out) {
      throw ProviderFailure(Errc::Timeout, 0, true,
                            "no response within " + std::to_string(config_.timeout_ms) + " ms");
    }
    throw ProviderFailure(Errc::ProviderError, 0, true, "transport failure: " + result.error);
  }
  if (result.status < 200 || result.status >= 300) {
    const bool transient = result.status == 429 || result.status >= 500;
    throw ProviderFailure(Errc::ProviderError, result.status, transient,
                          "HTTP " + std::to_string(result.status) + ": " + result.body.substr(0, 200));
  }

  ChatResponse resp;
  resp.provider_id = config_.id;
  resp.latency_ms = result.elapsed_ms;
  try {
    const auto reply = json::parse(result.body);
    const auto& choice = reply.at("choices").at(0);
    resp.text = choice.at("message").at("content").get<std::string>();
    if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) {
      resp.truncated = it->get<std::string>() == "length";
    }
  } catch (const json::exception& e) {
    throw ProviderFailure(Errc::ProviderError, result.status, false,
                          std::string("unexpected response body: ") + e.what());
  }
  return resp;
}

// ---------------------------------------------------------------------------
// Config

void validate_provider_config(const ProviderConfig& config) {
  if (config.kind == ProviderKind::RemoteChat) {
    if (config.endpoint_url.empty()) throw Error(Errc::InvalidConfig, "remote_chat requires endpoint_url");
    if (config.model_name.empty()) throw Error(Errc::InvalidConfig, "remote_chat requires model_name");
  }
  if (config.max_retries < 0) throw Error(Errc::InvalidConfig, "max_retries must be >= 0");
  if (config.timeout_ms <= 0) throw Error(Errc::InvalidConfig, "timeout_ms must be positive");
  if (config.max_concurrency == 0) throw Error(Errc::InvalidConfig, "max_concurrency must be positive");
}

ProviderConfig parse_provider_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("provider config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "provider config must be an object");
  if (j.contains("api_key")) {
    throw Error(Errc::InvalidConfig, "API keys must come from the environment; use api_key_env_var_name");
  }

  ProviderConfig cfg;
  try {
    const auto kind = j.value("kind", std::string("mock"));
    if (kind == "mock") {
      cfg.kind = ProviderKind::Mock;
    } else if (kind == "remote_chat") {
      cfg.kind = ProviderKind::RemoteChat;
    } else {
      throw Error(Errc::InvalidConfig, "unknown provider kind '" + kind + "'");
    }
    cfg.id = j.value("id", cfg.kind == ProviderKind::Mock ? std::string("mock") : j.value("model_name", std::string()));
    cfg.endpoint_url = j.value("endpoint_url", std::string());
    cfg.model_name = j.value("model_name", std::string());
    cfg.api_key_env_var_name = j.value("api_key_env_var_name", std::string());
    cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.backoff_base_ms = j.value("backoff_base_ms", cfg.backoff_base_ms);
    cfg.backoff_factor = j.value("backoff_factor", cfg.backoff_factor);
    cfg.backoff_cap_ms = j.value("backoff_cap_ms", cfg.backoff_cap_ms);
    cfg.max_concurrency = j.value("max_concurrency", cfg.max_concurrency);
    if (auto it = j.find("mock"); it != j.end()) {
      for (const auto& r : it->value("rules", json::array())) {
        cfg.mock.rules.push_back({r.at("pattern").get<std::string>(), r.at("template").get<std::string>()});
      }
      cfg.mock.default_template = it->value("default_template", std::string());
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("provider config: ") + e.what());
  }
  validate_provider_config(cfg);
  return cfg;
}

ProviderConfig load_provider_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read provider config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_provider_config(ss.str());
}

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config) {
  validate_provider_config(config);
  if (config.kind == ProviderKind::Mock) return std::make_shared<MockProvider>(config.mock, config.id);
  return std::make_shared<RemoteChatProvider>(config);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, RetryPolicy policy, std::size_t max_concurrency)
    : provider_(std::move(provider)), policy_(std::move(policy)), max_concurrency_(std::max<std::size_t>(1, max_concurrency)) {
  if (!provider_) throw Error(Errc::InvalidConfig, "gateway needs a provider");
}

std::shared_ptr<Gateway> Gateway::from_config(const ProviderConfig& config) {
  RetryPolicy policy;
  policy.max_retries = config.max_retries;
  policy.base_ms = config.backoff_base_ms;
  policy.factor = config.backoff_factor;
  policy.cap_ms = config.backoff_cap_ms;
  return std::make_shared<Gateway>(make_provider(config), std::move(policy), config.max_concurrency);
}

int Gateway::backoff_ms(int retry_number) {
  double delay = policy_.base_ms;
  for (int i = 1; i < retry_number; ++i) delay *= policy_.factor;
  delay = std::min<double>(delay, policy_.cap_ms);
  // Equal jitter: half fixed, half uniform.
  std::uint64_t x;
  {
    std::lock_guard lock(mutex_);
    jitter_state_ ^= jitter_state_ << 13;
    jitter_state_ ^= jitter_state_ >> 7;
    jitter_state_ ^= jitter_state_ << 17;
    x = jitter_state_;
  }
  const double u = static_cast<double>(x >> 11) / static_cast<double>(1ULL << 53);
  return static_cast<int>(delay / 2 + u * delay / 2);
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  validate_request(request);

  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [&] { return in_flight_ < max_concurrency_; });
    ++in_flight_;
    peak_in_flight_ = std::max(peak_in_flight_, in_flight_);
    ++stats_.calls;
  }
  struct SlotRelease {
    Gateway* self;
    ~SlotRelease() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};

  std::string last_error;
  for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
    if (attempt > 0) {
      const int wait = backoff_ms(attempt);
      {
        std::lock_guard lock(mutex_);
        ++stats_.retries;
      }
      if (policy_.sleeper) {
        policy_.sleeper(wait);
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(wait));
      }
    }
    {
      std::lock_guard lock(mutex_);
      ++stats_.attempts;
    }
    try {
      auto resp = provider_->send(request);
      Observer obs;
      {
        std::lock_guard lock(mutex_);
        obs = observer_;
      }
      if (obs) obs(request, resp);
      return resp;
    } catch (const ProviderFailure& f) {
      {
        std::lock_guard lock(mutex_);
        ++stats_.failures;
      }
      if (!f.transient()) throw;
      last_error = f.what();
    }
  }
  throw Error(Errc::ExhaustedRetries, std::to_string(policy_.max_retries + 1) + " attempts failed; last: " + last_error);
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t Gateway::peak_in_flight() const {
  std::lock_guard lock(mutex_);
  return peak_in_flight_;
}

void Gateway::set_observer(Observer observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

ChatResponse complete(const ChatRequest& request, const ProviderConfig& provider) {
  return Gateway::from_config(provider)->complete(request);
}

// ---------------------------------------------------------------------------
// Templates

namespace {

bool placeholder_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Finds the next well-formed {{name}} at or after `from`.
bool next_placeholder(std::string_view t, std::size_t from, std::size_t& open, std::size_t& close) {
  while (true) {
    open = t.find("{{", from);
    if (open == std::string_view::npos) return false;
    std::size_t k = open + 2;
    while (k < t.size() && placeholder_char(t[k])) ++k;
    if (k > open + 2 && k + 1 < t.size() && t[k] == '}' && t[k + 1] == '}') {
      close = k;
      return true;
    }
    from = open + 1;
  }
}

}  // namespace

std::string render(std::string_view t, const Bindings& bindings) {
  std::string out;
  out.reserve(t.size());
  std::size_t i = 0;
  std::size_t open = 0;
  std::size_t close = 0;
  while (next_placeholder(t, i, open, close)) {
    out.append(t.substr(i, open - i));
    const auto name = t.substr(open + 2, close - open - 2);
    const auto it = bindings.find(name);
    if (it == bindings.end()) throw Error(Errc::MissingBinding, std::string(name));
    out.append(it->second);
    i = close + 2;
  }
  out.append(t.substr(i));
  return out;
}

std::vector<std::string> placeholders(std::string_view t) {
  std::vector<std::string> names;
  std::size_t i = 0;
  std::size_t open = 0;
  std::size_t close = 0;
  while (next_placeholder(t, i, open, close)) {
    std::string name(t.substr(open + 2, close - open - 2));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
    i = close + 2;
  }
  return names;
}

std::string render_template(std::string_view template_id, const Bindings& bindings) {
  return render(prompt_template(template_id).text, bindings);
}

}  // namespace drafter
