#include "rlhi/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlhi/error.hpp"

namespace rlhi {

void to_json(json& j, const Turn& t) {
  j = json{{"role", to_string(t.role)}, {"text", t.text}, {"index", t.index}};
}

void from_json(const json& j, Turn& t) {
  t.role = parse_role(j.at("role").get<std::string>());
  t.text = j.at("text").get<std::string>();
  t.index = j.value("index", -1);
}

namespace {

std::vector<Turn> turns_from_json(const json& arr) {
  std::vector<Turn> turns;
  if (!arr.is_array()) throw Error(ErrorCode::InvalidArgument, "turns must be an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto t = arr[i].get<Turn>();
    if (t.index < 0) t.index = static_cast<int>(i);
    turns.push_back(std::move(t));
  }
  return turns;
}

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const Conversation& c) {
  j = json{{"conv_id", c.conv_id},   {"user_id", c.user_id},     {"turns", c.turns},
           {"language", c.language}, {"timestamp", c.timestamp}};
}

void from_json(const json& j, Conversation& c) {
  c.conv_id = j.at("conv_id").get<std::string>();
  c.user_id = j.at("user_id").get<std::string>();
  c.turns = turns_from_json(j.at("turns"));
  c.language = j.value("language", std::string("und"));
  c.timestamp = j.value("timestamp", std::int64_t{0});
}

void to_json(json& j, const LabeledConversation& l) {
  json labels = json::array();
  for (const auto& e : l.labels) {
    labels.push_back(json{{"turn_index", e.turn_index}, {"label", to_string(e.label)}});
  }
  j = json{{"conv_id", l.conv_id}, {"labels", std::move(labels)}};
}

void from_json(const json& j, LabeledConversation& l) {
  l.conv_id = j.at("conv_id").get<std::string>();
  l.labels.clear();
  for (const auto& e : j.at("labels")) {
    l.labels.push_back({e.at("turn_index").get<int>(), parse_turn_label(e.at("label").get<std::string>())});
  }
}

void to_json(json& j, const Persona& p) {
  j = json{{"user_id", p.user_id},
           {"bullets", p.bullets},
           {"source_conv_ids", p.source_conv_ids},
           {"derived_at", p.derived_at}};
}

void from_json(const json& j, Persona& p) {
  p.user_id = j.at("user_id").get<std::string>();
  p.bullets = j.at("bullets").get<std::vector<std::string>>();
  p.source_conv_ids = j.value("source_conv_ids", std::vector<std::string>{});
  p.derived_at = j.value("derived_at", std::int64_t{0});
}

void to_json(json& j, const PreferencePair& p) {
  j = json{{"pair_id", p.pair_id},
           {"user_id", p.user_id},
           {"persona", optional_to_json(p.persona)},
           {"context", p.context},
           {"chosen", p.chosen},
           {"rejected", p.rejected},
           {"chosen_reward", optional_to_json(p.chosen_reward)},
           {"rejected_reward", optional_to_json(p.rejected_reward)},
           {"provenance", to_string(p.provenance)}};
}

void from_json(const json& j, PreferencePair& p) {
  p.pair_id = j.at("pair_id").get<std::string>();
  p.user_id = j.at("user_id").get<std::string>();
  p.persona = optional_from_json<Persona>(j, "persona");
  p.context = turns_from_json(j.at("context"));
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.chosen_reward = optional_from_json<double>(j, "chosen_reward");
  p.rejected_reward = optional_from_json<double>(j, "rejected_reward");
  p.provenance = parse_provenance(j.at("provenance").get<std::string>());
}

void to_json(json& j, const RewardScore& r) {
  j = json{{"value", r.value}, {"scorer_id", r.scorer_id}};
}

void from_json(const json& j, RewardScore& r) {
  r.value = j.at("value").get<double>();
  r.scorer_id = j.value("scorer_id", std::string());
}

JsonlReadResult read_jsonl(const std::string& path,
                           const std::function<void(const json&, std::size_t)>& on_record) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path);
  JsonlReadResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.records;
    try {
      on_record(json::parse(line), line_number);
    } catch (const std::exception& e) {
      result.errors.push_back({line_number, e.what()});
    }
  }
  return result;
}

void throw_bad_line(const std::string& path, const LineError& err) {
  throw Error(ErrorCode::InvalidArgument,
              path + ":" + std::to_string(err.line_number) + ": " + err.message);
}

namespace {

void ensure_parent(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path);
  out << contents;
}

}  // namespace rlhi
