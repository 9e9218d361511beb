#pragma once

// Extraction of magnet settings from free-form model output.
//
// Candidates come from fenced code blocks if the response has any fence
// markers, otherwise from brace groups that stand on their own lines.
// A candidate must be a strict JSON object (no trailing commas, no
// comments) with exactly the keys Q1, Q2, CV, Q3, CH and numeric values.
// Exactly one candidate parses; none or several is a failure.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "beamtune/task.hpp"

namespace beamtune::prompts {

enum class FailureReason { no_json, invalid_json, ambiguous_multiple, missing_keys, non_numeric, extra_keys_disallowed };

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::no_json: return "no_json";
    case FailureReason::invalid_json: return "invalid_json";
    case FailureReason::ambiguous_multiple: return "ambiguous_multiple";
    case FailureReason::missing_keys: return "missing_keys";
    case FailureReason::non_numeric: return "non_numeric";
    case FailureReason::extra_keys_disallowed: return "extra_keys_disallowed";
  }
  return "?";
}

struct ParsedSettings {
  MagnetSettings values;  // SI, not clamped
  std::string raw_block;
  ClampFlags clamped{};
};

inline constexpr std::size_t kMaxExcerpt = 500;

struct ParseFailure {
  FailureReason reason = FailureReason::no_json;
  std::string excerpt;
};

using ParseResult = std::variant<ParsedSettings, ParseFailure>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string excerpt(std::string_view s) {
  s = trim(s);
  return std::string(s.substr(0, kMaxExcerpt));
}

/// Contents of fenced blocks. A fence followed directly by a language tag
/// always opens a block (closing any block still open); a bare fence closes
/// the open block or opens a new one. An unterminated final block counts.
inline std::vector<std::string_view> fenced_blocks(std::string_view text, bool& saw_fence) {
  std::vector<std::string_view> blocks;
  saw_fence = false;
  std::size_t open_at = std::string_view::npos;
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    saw_fence = true;
    std::size_t after = pos + 3;
    while (after < text.size() && text[after] == '`') ++after;
    std::size_t tag_end = after;
    while (tag_end < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[tag_end])) || text[tag_end] == '_' || text[tag_end] == '-' ||
            text[tag_end] == '+'))
      ++tag_end;
    const bool tagged = tag_end > after;
    if (open_at != std::string_view::npos) {
      blocks.push_back(text.substr(open_at, pos - open_at));
      open_at = tagged ? tag_end : std::string_view::npos;
    } else {
      open_at = tag_end;
    }
    pos = tag_end;
  }
  if (open_at != std::string_view::npos) blocks.push_back(text.substr(open_at));
  return blocks;
}

/// Balanced, non-nested brace groups that occupy their own lines: nothing
/// but whitespace precedes the opening brace on its line or follows the
/// closing brace on its line. Inline objects inside prose do not count.
inline std::vector<std::string_view> standalone_brace_groups(std::string_view text) {
  std::vector<std::string_view> groups;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (c == '\\') ++j;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) break;
    }
    if (j >= text.size()) break;  // unbalanced tail

    auto only_space = [](std::string_view s) {
      return std::ranges::all_of(s, [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
    };
    const std::size_t line_start = text.rfind('\n', i) == std::string_view::npos ? 0 : text.rfind('\n', i) + 1;
    std::size_t line_end = text.find('\n', j);
    if (line_end == std::string_view::npos) line_end = text.size();
    if (only_space(text.substr(line_start, i - line_start)) && only_space(text.substr(j + 1, line_end - j - 1)))
      groups.push_back(text.substr(i, j - i + 1));
    i = j + 1;
  }
  return groups;
}

inline int specificity(FailureReason r) {
  switch (r) {
    case FailureReason::no_json: return 0;
    case FailureReason::invalid_json: return 1;
    case FailureReason::missing_keys: return 2;
    case FailureReason::extra_keys_disallowed: return 3;
    case FailureReason::non_numeric: return 4;
    case FailureReason::ambiguous_multiple: return 5;
  }
  return 0;
}

/// Either the five values in prompt units, or why the chunk is not one.
inline std::variant<std::array<double, kNumActuators>, FailureReason> classify(std::string_view chunk) {
  chunk = trim(chunk);
  if (chunk.find('{') == std::string_view::npos) return FailureReason::no_json;
  const auto j = nlohmann::json::parse(chunk, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/false);
  if (j.is_discarded()) return FailureReason::invalid_json;
  if (!j.is_object()) return FailureReason::no_json;
  std::array<double, kNumActuators> v{};
  bool non_numeric = false;
  for (std::size_t i = 0; i < kNumActuators; ++i) {
    const auto it = j.find(kActuatorNames[i]);
    if (it == j.end()) return FailureReason::missing_keys;
    if (!it->is_number() || !std::isfinite(it->get<double>())) {
      non_numeric = true;
      continue;
    }
    v[i] = it->get<double>();
  }
  if (j.size() != kNumActuators) return FailureReason::extra_keys_disallowed;
  if (non_numeric) return FailureReason::non_numeric;
  return v;
}

}  // namespace detail

/// Never throws on any input text. `limits` are the absolute actuator
/// limits in SI; out-of-range values are kept and flagged.
inline ParseResult parse(std::string_view response, const std::array<double, kNumActuators>& limits) {
  bool saw_fence = false;
  auto chunks = detail::fenced_blocks(response, saw_fence);
  if (!saw_fence) chunks = detail::standalone_brace_groups(response);

  std::vector<ParsedSettings> found;
  ParseFailure best{FailureReason::no_json, detail::excerpt(response)};
  for (auto chunk : chunks) {
    auto c = detail::classify(chunk);
    if (auto* values = std::get_if<std::array<double, kNumActuators>>(&c)) {
      ParsedSettings p;
      p.values = MagnetSettings::from_display_units(*values);
      p.raw_block = std::string(detail::trim(chunk));
      const auto si = p.values.as_array();
      for (std::size_t i = 0; i < kNumActuators; ++i) p.clamped[i] = !(std::abs(si[i]) <= limits[i]);
      found.push_back(std::move(p));
    } else {
      const auto reason = std::get<FailureReason>(c);
      if (detail::specificity(reason) > detail::specificity(best.reason)) best = {reason, detail::excerpt(chunk)};
    }
  }
  if (found.size() == 1) return std::move(found.front());
  if (found.size() > 1) return ParseFailure{FailureReason::ambiguous_multiple, detail::excerpt(found[1].raw_block)};
  return best;
}

inline ParseResult parse(std::string_view response) { return parse(response, actuator_limits()); }

/// Settings formatted in the response schema, for round-trip checks and
/// scripted backends.
inline std::string format_response(const MagnetSettings& s) {
  const auto v = s.display_units();
  std::string out = "```json\n{\n";
  for (std::size_t i = 0; i < kNumActuators; ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "    \"%s\": %.2f%s\n", kActuatorNames[i], v[i], i + 1 < kNumActuators ? "," : "");
    out += buf;
  }
  out += "}\n```";
  return out;
}

}  // namespace beamtune::prompts
