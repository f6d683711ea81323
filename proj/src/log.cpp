#include "rlhi/log.hpp"

#include <iostream>
#include <mutex>

#include <nlohmann/json.hpp>

namespace rlhi::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = stderr_sink(Level::Warn);
  return sink;
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
  }
  return "info";
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  auto previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

void emit(Level level, std::string_view stage, std::string_view entity, std::string_view message) {
  Record record{level, std::string(stage), std::string(entity), std::string(message)};
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(record);
}

std::string render(const Record& record) {
  nlohmann::json j{{"level", level_name(record.level)},
                   {"stage", record.stage},
                   {"entity", record.entity},
                   {"msg", record.message}};
  return j.dump();
}

Sink stderr_sink(Level min_level) {
  return [min_level](const Record& record) {
    if (record.level < min_level) return;
    std::cerr << render(record) << '\n';
  };
}

}  // namespace rlhi::log
