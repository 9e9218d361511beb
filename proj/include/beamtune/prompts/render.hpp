#pragma once

#include <algorithm>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "beamtune/prompts/templates.hpp"
#include "beamtune/task.hpp"

namespace beamtune::prompts {

enum class PromptKind { tuning, explained, chain_of_thought, optimisation };

inline std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::tuning: return "tuning";
    case PromptKind::explained: return "explained";
    case PromptKind::chain_of_thought: return "cot";
    case PromptKind::optimisation: return "optimisation";
  }
  return "?";
}

inline PromptKind prompt_kind_from_string(std::string_view s) {
  if (s == "tuning") return PromptKind::tuning;
  if (s == "explained") return PromptKind::explained;
  if (s == "cot" || s == "chain_of_thought" || s == "chain-of-thought") return PromptKind::chain_of_thought;
  if (s == "optimisation" || s == "optimization") return PromptKind::optimisation;
  throw std::invalid_argument("unknown prompt kind: " + std::string(s));
}

struct RenderOptions {
  /// Most recent (or, for the optimisation prompt, best) samples kept.
  std::size_t window = 50;
};

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

namespace detail {

struct Field {
  std::string_view key;
  double value;
};

inline std::string json_block(std::initializer_list<Field> fields) {
  std::string out = "```json\n{\n";
  std::size_t i = 0;
  for (const auto& f : fields) {
    out += "    \"";
    out += f.key;
    out += "\": ";
    out += format_value(f.value);
    if (++i < fields.size()) out += ',';
    out += '\n';
  }
  out += "}\n```";
  return out;
}

inline void replace_once(std::string& s, std::string_view key, std::string_view value) {
  const auto pos = s.find(key);
  if (pos == std::string::npos) throw std::logic_error("template placeholder missing: " + std::string(key));
  s.replace(pos, key.size(), value);
}

}  // namespace detail

/// Settings block in display units (k1 in m^-2, angles in mrad).
inline std::string settings_block(const MagnetSettings& s) {
  const auto v = s.display_units();
  return detail::json_block({{"Q1", v[0]}, {"Q2", v[1]}, {"CV", v[2]}, {"Q3", v[3]}, {"CH", v[4]}});
}

inline std::string beam_block(const BeamParameters& p) {
  return detail::json_block(
      {{"mu_x", p.mu_x}, {"sigma_x", p.sigma_x}, {"mu_y", p.mu_y}, {"sigma_y", p.sigma_y}});
}

/// Samples shown to the model: the last `window` in chronological order,
/// or for the optimisation prompt the `window` best, worst first.
inline std::vector<Sample> select_samples(PromptKind kind, std::span<const Sample> history, std::size_t window) {
  std::vector<Sample> out(history.begin(), history.end());
  if (kind == PromptKind::optimisation) {
    // Stable: equal objectives keep chronological order.
    std::ranges::stable_sort(out, [](const Sample& a, const Sample& b) { return a.objective > b.objective; });
    if (window > 0 && out.size() > window) out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(window));
  } else if (window > 0 && out.size() > window) {
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(window));
  }
  return out;
}

inline std::string render(PromptKind kind, const BeamParameters& target, std::span<const Sample> history,
                          const RenderOptions& options = {}) {
  if (history.empty()) throw std::invalid_argument("render needs at least one sample");
  const auto samples = select_samples(kind, history, options.window);

  std::string body;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) body += "\n\n";
    const auto& s = samples[i];
    switch (kind) {
      case PromptKind::tuning:
        body += "Magnet settings:\n" + settings_block(s.settings) + "\n\nBeam parameters:\n" + beam_block(s.parameters);
        break;
      case PromptKind::explained:
      case PromptKind::chain_of_thought:
        body += "Magnet settings:\n" + settings_block(s.settings) + "\nBeam parameters:\n" + beam_block(s.parameters);
        break;
      case PromptKind::optimisation:
        body += "Inputs:\n" + settings_block(s.settings) + "\nObjective value = " + format_value(s.objective);
        break;
    }
  }

  std::string out;
  switch (kind) {
    case PromptKind::tuning: out = kTuningTemplate; break;
    case PromptKind::explained:
    case PromptKind::chain_of_thought: out = kExplainedTemplate; break;
    case PromptKind::optimisation: out = kOptimisationTemplate; break;
  }
  if (kind != PromptKind::optimisation) detail::replace_once(out, "{target}", beam_block(target));
  if (kind == PromptKind::explained) detail::replace_once(out, "{reasoning_request}", "");
  if (kind == PromptKind::chain_of_thought) detail::replace_once(out, "{reasoning_request}", kReasoningRequest);
  detail::replace_once(out, "{samples}", body);
  return out;
}

}  // namespace beamtune::prompts
