#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlhi/types.hpp"

namespace rlhi {

using json = nlohmann::json;

void to_json(json& j, const Turn& t);
void from_json(const json& j, Turn& t);
void to_json(json& j, const Conversation& c);
void from_json(const json& j, Conversation& c);
void to_json(json& j, const LabeledConversation& l);
void from_json(const json& j, LabeledConversation& l);
void to_json(json& j, const Persona& p);
void from_json(const json& j, Persona& p);
void to_json(json& j, const PreferencePair& p);
void from_json(const json& j, PreferencePair& p);
void to_json(json& j, const RewardScore& r);
void from_json(const json& j, RewardScore& r);

/// A line of a record file that could not be decoded.
struct LineError {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

struct JsonlReadResult {
  std::size_t records = 0;  // non-blank lines seen
  std::vector<LineError> errors;
};

/// Reads a JSONL file, calling `on_record` for each non-blank line. Lines that are
/// not valid JSON, or for which `on_record` throws, are collected as LineErrors.
/// Throws Error(FileNotFound) when the file cannot be opened.
JsonlReadResult read_jsonl(const std::string& path,
                                  const std::function<void(const json&, std::size_t)>& on_record);

[[noreturn]] void throw_bad_line(const std::string& path, const LineError& err);

/// Strict variant: any bad line aborts with Error(InvalidArgument).
template <typename T>
std::vector<T> read_records(const std::string& path) {
  std::vector<T> out;
  auto result = read_jsonl(path, [&](const json& j, std::size_t) { out.push_back(j.get<T>()); });
  if (!result.errors.empty()) {
    throw_bad_line(path, result.errors.front());
  }
  return out;
}

/// Writes one compact JSON document per line. Creates parent directories.
void write_jsonl(const std::string& path, const std::vector<json>& records);

template <typename T>
void write_records(const std::string& path, const std::vector<T>& items) {
  std::vector<json> lines;
  lines.reserve(items.size());
  for (const auto& item : items) lines.emplace_back(item);
  write_jsonl(path, lines);
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace rlhi
