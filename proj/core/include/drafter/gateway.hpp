#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "drafter/error.hpp"

namespace drafter {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  int max_tokens = 2048;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  /// Template id the prompt was rendered from; only used for tracing.
  std::string tag;

  /// All message contents joined by newlines, in order.
  std::string prompt_text() const;
};

/// Throws Error(InvalidRequest) unless messages are non-empty, the last one
/// is from the user and temperature is non-negative.
void validate_request(const ChatRequest& request);

ChatRequest make_user_request(std::string prompt, std::string tag = {});

struct ChatResponse {
  std::string text;
  std::string provider_id;
  double latency_ms = 0.0;
  bool truncated = false;
};

struct MockRule {
  std::string pattern;
  std::string response_template;
};

/// Scripted responses. The first rule whose pattern occurs in the prompt
/// wins; its template is expanded once, left to right. Placeholders:
///   {{seed}}       request seed in decimal
///   {{hash}}       16 hex digits of a hash over (prompt, seed)
///   {{line:KEY}}   trimmed text after "KEY:" on the first prompt line that
///                  starts with "KEY:" (empty when absent)
struct MockScript {
  std::vector<MockRule> rules;
  std::string default_template;
};

std::string run_mock_script(const MockScript& script, const ChatRequest& request);

enum class ProviderKind { RemoteChat, Mock };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Mock;
  std::string id = "mock";
  std::string endpoint_url;
  std::string model_name;
  /// Name of the environment variable holding the API key. Keys never live
  /// in config files.
  std::string api_key_env_var_name;
  int timeout_ms = 60000;
  int max_retries = 3;
  int backoff_base_ms = 500;
  double backoff_factor = 2.0;
  int backoff_cap_ms = 30000;
  std::size_t max_concurrency = 4;
  MockScript mock;
};

/// Throws Error(InvalidConfig) when a remote provider lacks endpoint or model.
void validate_provider_config(const ProviderConfig& config);
ProviderConfig parse_provider_config(std::string_view json_text);
ProviderConfig load_provider_config(const std::string& path);

/// Failure of a single provider attempt. `transient` marks failures worth
/// retrying (timeouts, connection errors, 429 and 5xx).
class ProviderFailure : public Error {
 public:
  ProviderFailure(Errc code, int status, bool transient, const std::string& message)
      : Error(code, message), status_(status), transient_(transient) {}

  int status() const noexcept { return status_; }
  bool transient() const noexcept { return transient_; }

 private:
  int status_;
  bool transient_;
};

/// One attempt against one backend. Implementations must be thread-safe.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

class MockProvider final : public ChatProvider {
 public:
  explicit MockProvider(MockScript script, std::string id = "mock")
      : script_(std::move(script)), id_(std::move(id)) {}

  ChatResponse send(const ChatRequest& request) override;
  std::string id() const override { return id_; }

 private:
  MockScript script_;
  std::string id_;
};

/// Role-tagged chat-completions wire: POST {model, messages, max_tokens,
/// temperature, seed}; the reply's first choice message content is returned.
class RemoteChatProvider final : public ChatProvider {
 public:
  explicit RemoteChatProvider(ProviderConfig config);

  ChatResponse send(const ChatRequest& request) override;
  std::string id() const override { return config_.id; }

 private:
  ProviderConfig config_;
};

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config);

struct RetryPolicy {
  int max_retries = 3;
  int base_ms = 500;
  double factor = 2.0;
  int cap_ms = 30000;
  /// Replaces std::this_thread::sleep_for; tests pass a recorder.
  std::function<void(int ms)> sleeper;
};

struct GatewayStats {
  std::uint64_t calls = 0;
  std::uint64_t attempts = 0;
  std::uint64_t failures = 0;
  std::uint64_t retries = 0;
};

/// Front door for every model call: enforces the per-provider concurrency
/// cap and retries transient failures with capped exponential backoff.
class Gateway {
 public:
  using Observer = std::function<void(const ChatRequest&, const ChatResponse&)>;

  Gateway(std::shared_ptr<ChatProvider> provider, RetryPolicy policy, std::size_t max_concurrency = 4);

  static std::shared_ptr<Gateway> from_config(const ProviderConfig& config);

  ChatResponse complete(const ChatRequest& request);

  GatewayStats stats() const;
  std::size_t max_concurrency() const noexcept { return max_concurrency_; }
  std::size_t peak_in_flight() const;
  std::string provider_id() const { return provider_->id(); }

  /// Called after every successful completion, under no lock.
  void set_observer(Observer observer);

 private:
  int backoff_ms(int retry_number);

  std::shared_ptr<ChatProvider> provider_;
  RetryPolicy policy_;
  std::size_t max_concurrency_;

  mutable std::mutex mutex_;
  std::condition_variable slot_free_;
  std::size_t in_flight_ = 0;
  std::size_t peak_in_flight_ = 0;
  GatewayStats stats_;
  Observer observer_;
  std::uint64_t jitter_state_ = 0x2545F4914F6CDD1DULL;
};

/// One-shot convenience: builds a gateway for `provider` and completes.
ChatResponse complete(const ChatRequest& request, const ProviderConfig& provider);

// ---------------------------------------------------------------------------
// Prompt templates

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Single-pass `{{name}}` substitution. Bound values are inserted verbatim
/// and never re-scanned. Throws Error(MissingBinding) naming the first
/// unbound placeholder.
std::string render(std::string_view template_text, const Bindings& bindings);

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view template_text);

struct PromptTemplate {
  std::string id;
  int version = 1;
  std::string text;
};

/// Built-in templates: plan, plan_strict, section, summarize, long_prompt,
/// chunk, polish, judge. Throws Error(UnknownTemplate).
const PromptTemplate& prompt_template(std::string_view id);
std::vector<std::string> prompt_template_ids();

std::string render_template(std::string_view template_id, const Bindings& bindings);

}  // namespace drafter
