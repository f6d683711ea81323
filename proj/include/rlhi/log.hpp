#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace rlhi::log {

enum class Level { Debug, Info, Warn, Error };

/// One structured log record. Rendered as a single JSON line.
struct Record {
  Level level = Level::Info;
  std::string stage;
  std::string entity;
  std::string message;
};

using Sink = std::function<void(const Record&)>;

/// Replaces the process-wide sink (default: JSON lines on stderr at Warn and above).
/// Returns the previous sink so tests can restore it.
Sink set_sink(Sink sink);

void emit(Level level, std::string_view stage, std::string_view entity, std::string_view message);

inline void info(std::string_view stage, std::string_view entity, std::string_view message) {
  emit(Level::Info, stage, entity, message);
}
inline void warn(std::string_view stage, std::string_view entity, std::string_view message) {
  emit(Level::Warn, stage, entity, message);
}
inline void error(std::string_view stage, std::string_view entity, std::string_view message) {
  emit(Level::Error, stage, entity, message);
}

std::string render(const Record& record);

/// Default stderr sink with a minimum level.
Sink stderr_sink(Level min_level);

}  // namespace rlhi::log
