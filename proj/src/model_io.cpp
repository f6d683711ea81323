#include "rlhi/model_io.hpp"

#include <cmath>

#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::vector<std::string> GenParams::validate() const {
  std::vector<std::string> errors;
  if (!(temperature >= 0.0)) errors.push_back("temperature >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) errors.push_back("0 < top_p <= 1");
  if (n < 1) errors.push_back("n >= 1");
  if (max_tokens && *max_tokens < 1) errors.push_back("max_tokens >= 1");
  return errors;
}

void to_json(json& j, const GenParams& p) {
  j = json{{"temperature", p.temperature}, {"top_p", p.top_p}, {"n", p.n}};
  j["max_tokens"] = p.max_tokens ? json(*p.max_tokens) : json(nullptr);
  j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
}

void from_json(const json& j, GenParams& p) {
  GenParams d;
  p.temperature = j.value("temperature", d.temperature);
  p.top_p = j.value("top_p", d.top_p);
  p.n = j.value("n", d.n);
  p.max_tokens = j.contains("max_tokens") && !j.at("max_tokens").is_null()
                     ? std::optional<int>(j.at("max_tokens").get<int>())
                     : std::nullopt;
  p.seed = j.contains("seed") && !j.at("seed").is_null()
               ? std::optional<std::uint64_t>(j.at("seed").get<std::uint64_t>())
               : std::nullopt;
}

std::vector<std::string> ChatRequest::validate() const {
  auto errors = params.validate();
  if (messages.empty()) {
    errors.push_back("messages non-empty");
  } else if (messages.back().role != Role::User) {
    errors.push_back("last message role = user");
  }
  return errors;
}

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json{{"role", rlhi::to_string(m.role)}, {"content", m.text}});
  return json{{"system", system ? json(*system) : json(nullptr)}, {"messages", msgs}, {"params", params}};
}

std::string ChatRequest::content_key() const { return sha256_hex(to_json().dump()); }

ChatRequest ChatRequest::from_turns(const std::vector<Turn>& turns, GenParams params) {
  ChatRequest req;
  for (const auto& t : turns) req.messages.push_back({t.role, t.text});
  req.params = params;
  return req;
}

std::vector<std::string> chat_generate(ChatClient& client, const ChatRequest& request) {
  if (auto errors = request.validate(); !errors.empty()) {
    throw Error(ErrorCode::InvalidArgument, "chat request: " + errors.front());
  }
  auto out = client.generate(request);
  if (static_cast<int>(out.size()) != request.params.n) {
    throw Error(ErrorCode::MalformedResponse, client.id() + " returned " + std::to_string(out.size()) +
                                                  " completions, expected " + std::to_string(request.params.n));
  }
  return out;
}

RewardScore reward_score(Scorer& scorer, const std::vector<Turn>& context, const std::optional<Persona>& persona,
                         std::string_view response) {
  if (text::trim(response).empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot score an empty response");
  }
  auto score = scorer.score(context, persona ? &*persona : nullptr, response);
  if (!std::isfinite(score.value)) {
    throw Error(ErrorCode::MalformedResponse, scorer.id() + " returned a non-finite score");
  }
  return score;
}

std::vector<double> embed(Embedder& embedder, std::string_view text) {
  if (text::trim(text).empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
  auto v = embedder.embed(text);
  if (v.size() != embedder.dimension()) {
    throw Error(ErrorCode::MalformedResponse, "embedding has dimension " + std::to_string(v.size()) +
                                                  ", expected " + std::to_string(embedder.dimension()));
  }
  return v;
}

ConcurrencyLimiter::ConcurrencyLimiter(int max_in_flight)
    : sem_(std::max(1, std::min(max_in_flight, 1024))), capacity_(std::max(1, std::min(max_in_flight, 1024))) {}

}  // namespace rlhi
