#include "rlhi/text.hpp"

#include <cctype>

#include "rlhi/error.hpp"

namespace rlhi::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_label(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::size_t char_count(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) {
    if (!is_continuation(c)) ++n;
  }
  return n;
}

std::string utf8_tail(std::string_view utf8, std::size_t max_chars) {
  std::size_t count = 0;
  std::size_t pos = utf8.size();
  while (pos > 0) {
    std::size_t start = pos - 1;
    while (start > 0 && is_continuation(static_cast<unsigned char>(utf8[start]))) --start;
    if (count == max_chars) break;
    ++count;
    pos = start;
  }
  return std::string(utf8.substr(pos));
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
    start = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& slots) {
  std::vector<bool> used(slots.size(), false);
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto name = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (std::size_t k = 0; k < slots.size(); ++k) {
          if (slots[k].first == name) {
            out += slots[k].second;
            used[k] = true;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!used[k]) {
      throw Error(ErrorCode::InvalidArgument, "template has no slot {" + slots[k].first + "}");
    }
  }
  return out;
}

std::vector<std::string> bracketed_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = s.find("[[", pos)) != std::string_view::npos) {
    auto close = s.find("]]", pos + 2);
    if (close == std::string_view::npos) break;
    out.emplace_back(s.substr(pos + 2, close - pos - 2));
    pos = close + 2;
  }
  return out;
}

}  // namespace rlhi::text
