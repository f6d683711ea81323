#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "rlhi/error.hpp"
#include "rlhi/serialize.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

struct GenParams {
  double temperature = 0.6;
  double top_p = 0.9;
  int n = 1;
  std::optional<int> max_tokens;
  std::optional<std::uint64_t> seed;  // honoured by the scripted mock only

  std::vector<std::string> validate() const;
  bool operator==(const GenParams&) const = default;
};

void to_json(json& j, const GenParams& p);
void from_json(const json& j, GenParams& p);

struct ChatMessage {
  Role role = Role::User;
  std::string text;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::optional<std::string> system;
  std::vector<ChatMessage> messages;
  GenParams params;

  std::vector<std::string> validate() const;

  /// Canonical JSON form; the basis of content hashes.
  json to_json() const;

  /// SHA-256 of the canonical form. Identical requests share a key.
  std::string content_key() const;

  static ChatRequest from_turns(const std::vector<Turn>& turns, GenParams params = {});
};

/// Any generative model reachable through chat completions.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::vector<std::string> generate(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Validates the request and guarantees exactly `params.n` completions.
std::vector<std::string> chat_generate(ChatClient& client, const ChatRequest& request);

/// Scores a response given its context and (optionally) the user's persona.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual RewardScore score(const std::vector<Turn>& context, const Persona* persona,
                            std::string_view response) = 0;
  virtual std::string id() const = 0;
};

/// Checks preconditions (non-empty response) and the finiteness of the result.
RewardScore reward_score(Scorer& scorer, const std::vector<Turn>& context, const std::optional<Persona>& persona,
                         std::string_view response);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
};

std::vector<double> embed(Embedder& embedder, std::string_view text);

/// Sends `request`, parses the single completion with `parse`; on failure re-asks once
/// with a reminder appended to the dialogue. Throws `failure` after the second miss.
template <typename T>
T ask_with_reprompt(ChatClient& client, ChatRequest request,
                    const std::function<std::optional<T>(std::string_view)>& parse, ErrorCode failure,
                    std::string_view reminder);

/// Caps in-flight requests; shared by every call made through one client.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int max_in_flight = 8);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimiter& owner) : owner_(&owner) { owner_->sem_.acquire(); }
    ~Permit() {
      if (owner_) owner_->sem_.release();
    }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ConcurrencyLimiter* owner_;
  };

  Permit acquire() { return Permit(*this); }
  int capacity() const { return capacity_; }

 private:
  std::counting_semaphore<1024> sem_;
  int capacity_;
};


template <typename T>
T ask_with_reprompt(ChatClient& client, ChatRequest request,
                    const std::function<std::optional<T>(std::string_view)>& parse, ErrorCode failure,
                    std::string_view reminder) {
  request.params.n = 1;
  std::string last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto replies = chat_generate(client, request);
    last = replies.front();
    if (auto parsed = parse(last)) return *parsed;
    request.messages.push_back({Role::Assistant, last.empty() ? std::string("(empty)") : last});
    request.messages.push_back({Role::User, std::string(reminder)});
  }
  throw Error(failure, "could not parse reply after one reprompt: \"" + last.substr(0, 200) + "\"");
}

}  // namespace rlhi
