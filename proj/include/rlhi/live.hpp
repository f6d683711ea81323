#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "rlhi/model_io.hpp"

namespace rlhi {

/// Raw HTTP outcome. Negative status marks a failure below HTTP.
struct HttpResponse {
  static constexpr int kTimeout = -1;
  static constexpr int kConnectionError = -2;

  int status = 0;
  std::string body;
};

/// POSTs a JSON body to a path relative to some base URL.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body) = 0;
};

/// cpp-httplib backed transport. `base_url` is "scheme://host[:port][/prefix]".
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120));
  HttpResponse post(const std::string& path, const std::string& body) override;

 private:
  std::string origin_;
  std::string prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

/// Retries 429, 5xx, timeouts and connection errors with exponential backoff,
/// then converts the last failure into an Error.
class RetryingTransport final : public Transport {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RetryingTransport(std::shared_ptr<Transport> inner, int max_attempts = 5,
                    std::chrono::milliseconds base_delay = std::chrono::milliseconds(500), Sleeper sleeper = {});
  HttpResponse post(const std::string& path, const std::string& body) override;

 private:
  std::shared_ptr<Transport> inner_;
  int max_attempts_;
  std::chrono::milliseconds base_delay_;
  Sleeper sleeper_;
};

enum class CassetteMode { Record, Replay };

/// Record/replay layer. Each exchange is one JSONL line keyed by
/// sha256(path + "\n" + body). Replay never touches `inner` (which may be null).
class CassetteTransport final : public Transport {
 public:
  CassetteTransport(std::string path, CassetteMode mode, std::shared_ptr<Transport> inner = nullptr);
  HttpResponse post(const std::string& path, const std::string& body) override;

  static std::string key(const std::string& path, const std::string& body);

 private:
  std::string file_;
  CassetteMode mode_;
  std::shared_ptr<Transport> inner_;
  std::mutex mu_;
  std::map<std::string, HttpResponse> recorded_;
};

/// OpenAI-compatible chat completions client.
class LiveChatClient final : public ChatClient {
 public:
  LiveChatClient(std::shared_ptr<Transport> transport, std::string model, int max_in_flight = 8);
  std::vector<std::string> generate(const ChatRequest& request) override;
  std::string id() const override { return "live:" + model_; }

  /// Request body sent for `request` asking for `n` completions.
  json request_body(const ChatRequest& request, int n) const;

 private:
  std::shared_ptr<Transport> transport_;
  std::string model_;
  ConcurrencyLimiter limiter_;
};

/// Scalar reward endpoint: POST /score {context, system, response} -> {"score": x}.
/// The persona travels as the persona-guided system prompt.
class EndpointScorer final : public Scorer {
 public:
  EndpointScorer(std::shared_ptr<Transport> transport, std::string model, int max_in_flight = 8);
  RewardScore score(const std::vector<Turn>& context, const Persona* persona, std::string_view response) override;
  std::string id() const override { return "endpoint:" + model_; }

 private:
  std::shared_ptr<Transport> transport_;
  std::string model_;
  ConcurrencyLimiter limiter_;
};

/// Reward model reachable only as a chat model: asks for a "[[score]]" rating.
class ChatRatingScorer final : public Scorer {
 public:
  explicit ChatRatingScorer(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
  RewardScore score(const std::vector<Turn>& context, const Persona* persona, std::string_view response) override;
  std::string id() const override { return "rating:" + client_->id(); }

 private:
  std::shared_ptr<ChatClient> client_;
};

/// Extracts the last "[[number]]" from a completion.
std::optional<double> parse_rating(std::string_view completion);

/// OpenAI-compatible embeddings: POST /embeddings {model, input}.
class LiveEmbedder final : public Embedder {
 public:
  LiveEmbedder(std::shared_ptr<Transport> transport, std::string model, std::size_t dimension,
               int max_in_flight = 8);
  std::vector<double> embed(std::string_view text) override;
  std::size_t dimension() const override { return dimension_; }

 private:
  std::shared_ptr<Transport> transport_;
  std::string model_;
  std::size_t dimension_;
  ConcurrencyLimiter limiter_;
};

/// Endpoint settings read from MODEL_ENDPOINT, MODEL_API_KEY, REWARD_ENDPOINT,
/// EMBED_ENDPOINT and MODEL_NAME.
struct LiveSettings {
  std::string model_endpoint;
  std::string api_key;
  std::string reward_endpoint;
  std::string embed_endpoint;
  std::string model_name = "default";

  static LiveSettings from_env();
};

/// Full stack for one endpoint: HTTP, retries, then an optional cassette on top.
std::shared_ptr<Transport> make_transport(const std::string& base_url, const std::string& api_key,
                                          const std::string& cassette_path = "",
                                          CassetteMode mode = CassetteMode::Record);

}  // namespace rlhi
