#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "rlhi/live.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <thread>

#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/log.hpp"
#include "rlhi/prompts.hpp"

namespace rlhi {

namespace {

json parse_body(const HttpResponse& r, std::string_view what) {
  try {
    return json::parse(r.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string(what) + ": body is not JSON: " + e.what());
  }
}

json turns_json(const std::vector<Turn>& turns) {
  json out = json::array();
  for (const auto& t : turns) out.push_back({{"role", to_string(t.role)}, {"content", t.text}});
  return out;
}

}  // namespace

HttpTransport::HttpTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  const auto scheme = base_url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::Config, "endpoint URL lacks a scheme: " + base_url);
  const auto slash = base_url.find('/', scheme + 3);
  origin_ = base_url.substr(0, slash);
  prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
}

HttpResponse HttpTransport::post(const std::string& path, const std::string& body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(prefix_ + path, headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timeout = err == httplib::Error::Read || err == httplib::Error::Write ||
                         err == httplib::Error::ConnectionTimeout;
    return {timeout ? HttpResponse::kTimeout : HttpResponse::kConnectionError, httplib::to_string(err)};
  }
  return {res->status, res->body};
}

RetryingTransport::RetryingTransport(std::shared_ptr<Transport> inner, int max_attempts,
                                     std::chrono::milliseconds base_delay, Sleeper sleeper)
    : inner_(std::move(inner)), max_attempts_(std::max(1, max_attempts)), base_delay_(base_delay),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      })) {}

HttpResponse RetryingTransport::post(const std::string& path, const std::string& body) {
  HttpResponse last;
  for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
    last = inner_->post(path, body);
    const bool transient = last.status < 0 || last.status == 429 || last.status >= 500;
    if (!transient) break;
    if (attempt == max_attempts_) break;
    log::warn("model-io", path, "transient failure (status " + std::to_string(last.status) + "), retry " +
                                    std::to_string(attempt));
    sleeper_(base_delay_ * (1LL << (attempt - 1)));
  }
  if (last.status >= 200 && last.status < 300) return last;
  const auto detail = path + " after " + std::to_string(max_attempts_) + " attempts: " + last.body.substr(0, 200);
  if (last.status == HttpResponse::kTimeout) throw Error(ErrorCode::Timeout, detail);
  if (last.status == 429) throw Error(ErrorCode::RateLimited, detail);
  throw Error(ErrorCode::Transport, "status " + std::to_string(last.status) + " on " + detail);
}

CassetteTransport::CassetteTransport(std::string path, CassetteMode mode, std::shared_ptr<Transport> inner)
    : file_(std::move(path)), mode_(mode), inner_(std::move(inner)) {
  if (mode_ == CassetteMode::Record && !inner_) {
    throw Error(ErrorCode::InvalidArgument, "recording cassette needs an inner transport");
  }
  if (!std::filesystem::exists(file_)) {
    if (mode_ == CassetteMode::Replay) throw Error(ErrorCode::FileNotFound, "cassette " + file_);
    return;
  }
  read_jsonl(file_, [&](const json& j, std::size_t) {
    recorded_[j.at("key").get<std::string>()] = {j.at("status").get<int>(), j.at("response").get<std::string>()};
  });
}

std::string CassetteTransport::key(const std::string& path, const std::string& body) {
  return sha256_hex(path + "\n" + body);
}

HttpResponse CassetteTransport::post(const std::string& path, const std::string& body) {
  const auto k = key(path, body);
  {
    std::lock_guard lock(mu_);
    if (auto it = recorded_.find(k); it != recorded_.end()) return it->second;
  }
  if (mode_ == CassetteMode::Replay) throw Error(ErrorCode::CassetteMiss, "no recorded exchange for " + path);
  auto response = inner_->post(path, body);
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    request = body;
  }
  const json line = {{"key", k}, {"path", path}, {"request", request}, {"status", response.status},
                     {"response", response.body}};
  std::lock_guard lock(mu_);
  if (recorded_.emplace(k, response).second) {
    if (auto parent = std::filesystem::path(file_).parent_path(); !parent.empty()) {
      std::filesystem::create_directories(parent);
    }
    std::ofstream out(file_, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
  }
  return response;
}

LiveChatClient::LiveChatClient(std::shared_ptr<Transport> transport, std::string model, int max_in_flight)
    : transport_(std::move(transport)), model_(std::move(model)), limiter_(max_in_flight) {}

json LiveChatClient::request_body(const ChatRequest& request, int n) const {
  json messages = json::array();
  if (request.system) messages.push_back({{"role", "system"}, {"content", *request.system}});
  for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
  json body = {{"model", model_},
               {"messages", messages},
               {"temperature", request.params.temperature},
               {"top_p", request.params.top_p},
               {"n", n}};
  if (request.params.max_tokens) body["max_tokens"] = *request.params.max_tokens;
  return body;
}

std::vector<std::string> LiveChatClient::generate(const ChatRequest& request) {
  std::vector<std::string> out;
  // Some gateways cap or ignore n; ask again for whatever is missing.
  for (int round = 0; round < request.params.n && static_cast<int>(out.size()) < request.params.n; ++round) {
    const int want = request.params.n - static_cast<int>(out.size());
    HttpResponse res;
    {
      auto permit = limiter_.acquire();
      res = transport_->post("/chat/completions", request_body(request, want).dump());
    }
    if (res.status < 200 || res.status >= 300) {
      throw Error(ErrorCode::Transport, "chat completions returned status " + std::to_string(res.status));
    }
    const auto j = parse_body(res, "chat completions");
    if (!j.contains("choices") || !j.at("choices").is_array() || j.at("choices").empty()) {
      throw Error(ErrorCode::MalformedResponse, "chat completions: no choices");
    }
    for (const auto& c : j.at("choices")) {
      const auto* content = c.contains("message") ? &c.at("message") : nullptr;
      if (!content || !content->contains("content") || !content->at("content").is_string()) {
        throw Error(ErrorCode::MalformedResponse, "chat completions: choice without message content");
      }
      if (static_cast<int>(out.size()) < request.params.n) out.push_back(content->at("content").get<std::string>());
    }
  }
  return out;
}

EndpointScorer::EndpointScorer(std::shared_ptr<Transport> transport, std::string model, int max_in_flight)
    : transport_(std::move(transport)), model_(std::move(model)), limiter_(max_in_flight) {}

RewardScore EndpointScorer::score(const std::vector<Turn>& context, const Persona* persona,
                                  std::string_view response) {
  json body = {{"model", model_},
               {"system", persona ? json(prompts::persona_system(*persona)) : json(nullptr)},
               {"context", turns_json(context)},
               {"response", std::string(response)}};
  HttpResponse res;
  {
    auto permit = limiter_.acquire();
    res = transport_->post("/score", body.dump());
  }
  const auto j = parse_body(res, "score");
  if (!j.contains("score") || !j.at("score").is_number()) {
    throw Error(ErrorCode::MalformedResponse, "score endpoint: missing numeric 'score'");
  }
  return {j.at("score").get<double>(), id()};
}

std::optional<double> parse_rating(std::string_view completion) {
  static const std::regex kRating(R"(\[\[\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\]\])");
  std::optional<double> last;
  const std::string s(completion);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kRating); it != std::sregex_iterator(); ++it) {
    const double v = std::strtod((*it)[1].str().c_str(), nullptr);
    if (std::isfinite(v)) last = v;
  }
  return last;
}

RewardScore ChatRatingScorer::score(const std::vector<Turn>& context, const Persona* persona,
                                    std::string_view response) {
  ChatRequest req;
  if (persona) req.system = prompts::persona_system(*persona);
  req.messages.push_back({Role::User, prompts::reward_rating(prompts::render_history(context), response)});
  req.params.temperature = 0.0;
  const double v = ask_with_reprompt<double>(
      *client_, req, [](std::string_view c) { return parse_rating(c); }, ErrorCode::MalformedResponse,
      "Your previous reply did not contain a score. Reply again with only the score in the format \"[[score]]\".");
  return {v, id()};
}

LiveEmbedder::LiveEmbedder(std::shared_ptr<Transport> transport, std::string model, std::size_t dimension,
                           int max_in_flight)
    : transport_(std::move(transport)), model_(std::move(model)), dimension_(dimension), limiter_(max_in_flight) {}

std::vector<double> LiveEmbedder::embed(std::string_view text) {
  const json body = {{"model", model_}, {"input", std::string(text)}};
  HttpResponse res;
  {
    auto permit = limiter_.acquire();
    res = transport_->post("/embeddings", body.dump());
  }
  const auto j = parse_body(res, "embeddings");
  try {
    return j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("embeddings: ") + e.what());
  }
}

LiveSettings LiveSettings::from_env() {
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  LiveSettings s;
  s.model_endpoint = get("MODEL_ENDPOINT");
  s.api_key = get("MODEL_API_KEY");
  s.reward_endpoint = get("REWARD_ENDPOINT");
  s.embed_endpoint = get("EMBED_ENDPOINT");
  if (auto name = get("MODEL_NAME"); !name.empty()) s.model_name = name;
  return s;
}

std::shared_ptr<Transport> make_transport(const std::string& base_url, const std::string& api_key,
                                          const std::string& cassette_path, CassetteMode mode) {
  std::shared_ptr<Transport> t;
  if (!(mode == CassetteMode::Replay && !cassette_path.empty())) {
    t = std::make_shared<RetryingTransport>(std::make_shared<HttpTransport>(base_url, api_key));
  }
  if (!cassette_path.empty()) t = std::make_shared<CassetteTransport>(cassette_path, mode, t);
  return t;
}

}  // namespace rlhi
