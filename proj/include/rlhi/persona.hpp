#pragma once

#include <array>
#include <string>
#include <vector>

#include "rlhi/model_io.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

struct PersonaConfig {
  std::size_t history_char_budget = 32000;
  int refresh_after_new_conversations = 3;
};

inline constexpr std::string_view kHistorySeparator = "\n\n-----\n\n";

/// User messages only, conversations in timestamp order joined by kHistorySeparator.
/// Oldest conversations are dropped until the text fits the budget; a lone conversation
/// over budget keeps its tail. `used` receives the conversations that made it in.
std::string persona_history_text(const std::vector<Conversation>& history, std::size_t char_budget,
                                 std::vector<const Conversation*>* used = nullptr);

/// Splits a completion into bullet texts, stripping "-", "*", "•", "1." and "1)" markers.
std::vector<std::string> parse_persona_bullets(std::string_view completion);

/// Summarises a single user's history into at most five bullets.
Persona infer_persona(const std::vector<Conversation>& history, ChatClient& client, const PersonaConfig& cfg = {});

/// True when at least `refresh_after_new_conversations` conversations are newer than derived_at.
bool needs_refresh(const Persona& persona, const std::vector<Conversation>& history, const PersonaConfig& cfg = {});

enum class DimensionChoice { Pref1, Pref2, NoneClear };

std::string_view to_string(DimensionChoice c);
DimensionChoice parse_dimension_choice(std::string_view name);

struct DimensionVerdict {
  prompts::Dimension dimension = prompts::Dimension::Expertise;
  DimensionChoice choice = DimensionChoice::NoneClear;

  bool operator==(const DimensionVerdict&) const = default;
};

std::optional<DimensionChoice> parse_dimension_verdict(std::string_view completion);

/// One verdict per dimension, in kAllDimensions order.
std::vector<DimensionVerdict> classify_dimensions(const Persona& persona, ChatClient& client);

struct UserDimensionVerdict {
  std::string user_id;
  DimensionVerdict verdict;
};

/// Record file with one {user_id, dimension, choice} line per verdict.
void write_dimension_verdicts(const std::string& path, const std::vector<UserDimensionVerdict>& rows);
std::vector<UserDimensionVerdict> read_dimension_verdicts(const std::string& path);

struct DimensionRow {
  prompts::Dimension dimension = prompts::Dimension::Expertise;
  std::array<std::size_t, 3> counts{};   // Pref1, Pref2, NoneClear
  std::array<double, 3> percent{};
};

/// Per-dimension percentages over a flat collection of verdicts; dimensions without
/// any verdict are omitted. Throws EmptyInput on an empty collection.
std::vector<DimensionRow> dimension_stats(const std::vector<DimensionVerdict>& verdicts);

/// Published per-dimension shares {Pref1, Pref2, None} in kAllDimensions order; for comparison only.
inline constexpr std::array<std::array<double, 3>, 4> kReferenceDimensionPercent = {{
    {24.1, 59.8, 16.1},
    {36.0, 49.9, 14.1},
    {4.9, 84.5, 10.6},
    {77.1, 9.1, 13.8},
}};

}  // namespace rlhi
