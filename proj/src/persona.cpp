#include "rlhi/persona.hpp"

#include <algorithm>

#include "rlhi/error.hpp"
#include "rlhi/log.hpp"
#include "rlhi/serialize.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

namespace {

std::vector<const Conversation*> chronological(const std::vector<Conversation>& history) {
  std::vector<const Conversation*> out;
  for (const auto& c : history) out.push_back(&c);
  std::stable_sort(out.begin(), out.end(),
                   [](const Conversation* a, const Conversation* b) { return a->timestamp < b->timestamp; });
  return out;
}

std::string user_block(const Conversation& c) { return text::join(user_messages(c), "\n\n"); }

}  // namespace

std::string persona_history_text(const std::vector<Conversation>& history, std::size_t char_budget,
                                 std::vector<const Conversation*>* used) {
  auto convs = chronological(history);
  std::vector<std::string> blocks;
  for (const auto* c : convs) blocks.push_back(user_block(*c));

  const std::size_t sep = text::char_count(kHistorySeparator);
  std::size_t total = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) total += text::char_count(blocks[i]) + (i ? sep : 0);
  std::size_t first = 0;
  while (total > char_budget && blocks.size() - first > 1) {
    total -= text::char_count(blocks[first]) + sep;
    ++first;
  }
  std::vector<std::string> kept(blocks.begin() + static_cast<std::ptrdiff_t>(first), blocks.end());
  if (used) used->assign(convs.begin() + static_cast<std::ptrdiff_t>(first), convs.end());
  auto out = text::join(kept, kHistorySeparator);
  if (text::char_count(out) > char_budget) out = text::utf8_tail(out, char_budget);
  return out;
}

std::vector<std::string> parse_persona_bullets(std::string_view completion) {
  std::vector<std::string> out;
  for (const auto& raw : text::split_lines(completion)) {
    std::string_view line = text::trim(raw);
    if (line.rfind("•", 0) == 0) {
      line.remove_prefix(std::string_view("•").size());
    } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
      line.remove_prefix(1);
    } else {
      std::size_t d = 0;
      while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
      if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')')) line.remove_prefix(d + 1);
    }
    line = text::trim(line);
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

Persona infer_persona(const std::vector<Conversation>& history, ChatClient& client, const PersonaConfig& cfg) {
  if (history.empty()) throw Error(ErrorCode::InvalidArgument, "infer_persona needs a non-empty history");
  const auto& user_id = history.front().user_id;
  for (const auto& c : history) {
    if (c.user_id != user_id) {
      throw Error(ErrorCode::InvalidArgument, "history mixes users " + user_id + " and " + c.user_id);
    }
  }
  std::vector<const Conversation*> used;
  const auto history_text = persona_history_text(history, cfg.history_char_budget, &used);

  ChatRequest req;
  req.messages.push_back({Role::User, prompts::infer_persona(history_text)});
  const auto completion = chat_generate(client, req).front();
  auto bullets = parse_persona_bullets(completion);
  if (bullets.empty()) throw Error(ErrorCode::EmptyPersona, "no bullets for user " + user_id);
  if (bullets.size() > 5) {
    log::warn("persona", user_id, "model returned " + std::to_string(bullets.size()) + " bullets, kept 5");
    bullets.resize(5);
  }
  Persona p;
  p.user_id = user_id;
  p.bullets = std::move(bullets);
  for (const auto* c : used) {
    p.source_conv_ids.push_back(c->conv_id);
    p.derived_at = std::max(p.derived_at, c->timestamp);
  }
  return p;
}

bool needs_refresh(const Persona& persona, const std::vector<Conversation>& history, const PersonaConfig& cfg) {
  const auto fresh = std::count_if(history.begin(), history.end(),
                                   [&](const Conversation& c) { return c.timestamp > persona.derived_at; });
  return fresh >= cfg.refresh_after_new_conversations;
}

std::string_view to_string(DimensionChoice c) {
  switch (c) {
    case DimensionChoice::Pref1: return "pref1";
    case DimensionChoice::Pref2: return "pref2";
    case DimensionChoice::NoneClear: return "none";
  }
  return "none";
}

DimensionChoice parse_dimension_choice(std::string_view name) {
  if (name == "pref1") return DimensionChoice::Pref1;
  if (name == "pref2") return DimensionChoice::Pref2;
  if (name == "none") return DimensionChoice::NoneClear;
  throw Error(ErrorCode::InvalidArgument, "unknown dimension choice '" + std::string(name) + "'");
}

std::optional<DimensionChoice> parse_dimension_verdict(std::string_view completion) {
  const auto tokens = text::bracketed_tokens(completion);
  if (tokens.empty()) return std::nullopt;
  const auto t = text::normalize_label(tokens.back());
  if (t == "1") return DimensionChoice::Pref1;
  if (t == "2") return DimensionChoice::Pref2;
  if (t == "none") return DimensionChoice::NoneClear;
  return std::nullopt;
}

std::vector<DimensionVerdict> classify_dimensions(const Persona& persona, ChatClient& client) {
  if (persona.bullets.empty()) throw Error(ErrorCode::InvalidArgument, "persona has no bullets");
  std::vector<DimensionVerdict> out;
  for (auto d : prompts::kAllDimensions) {
    ChatRequest req;
    req.messages.push_back({Role::User, prompts::dimension_judge(d, persona)});
    req.params.temperature = 0.0;
    out.push_back({d, ask_with_reprompt<DimensionChoice>(client, req, parse_dimension_verdict,
                                                         ErrorCode::UnparseableVerdict, prompts::kVerdictReminder)});
  }
  return out;
}

void write_dimension_verdicts(const std::string& path, const std::vector<UserDimensionVerdict>& rows) {
  std::vector<json> lines;
  for (const auto& r : rows) {
    lines.push_back({{"user_id", r.user_id},
                     {"dimension", prompts::dimension_spec(r.verdict.dimension).name},
                     {"choice", to_string(r.verdict.choice)}});
  }
  write_jsonl(path, lines);
}

std::vector<UserDimensionVerdict> read_dimension_verdicts(const std::string& path) {
  std::vector<UserDimensionVerdict> out;
  auto result = read_jsonl(path, [&](const json& j, std::size_t) {
    const auto name = j.at("dimension").get<std::string>();
    auto it = std::find_if(prompts::kAllDimensions.begin(), prompts::kAllDimensions.end(),
                           [&](auto d) { return prompts::dimension_spec(d).name == name; });
    if (it == prompts::kAllDimensions.end()) throw Error(ErrorCode::InvalidArgument, "unknown dimension " + name);
    out.push_back({j.at("user_id").get<std::string>(), {*it, parse_dimension_choice(j.at("choice").get<std::string>())}});
  });
  if (!result.errors.empty()) throw_bad_line(path, result.errors.front());
  return out;
}

std::vector<DimensionRow> dimension_stats(const std::vector<DimensionVerdict>& verdicts) {
  if (verdicts.empty()) throw Error(ErrorCode::EmptyInput, "dimension_stats needs at least one verdict");
  std::vector<DimensionRow> rows;
  for (auto d : prompts::kAllDimensions) {
    DimensionRow row{d, {}, {}};
    std::size_t total = 0;
    for (const auto& v : verdicts) {
      if (v.dimension != d) continue;
      ++row.counts[static_cast<std::size_t>(v.choice)];
      ++total;
    }
    if (total == 0) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      row.percent[k] = 100.0 * static_cast<double>(row.counts[k]) / static_cast<double>(total);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rlhi
