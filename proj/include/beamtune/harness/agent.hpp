#pragma once

// Proposal sources driven by the episode loop: classical optimizers and the
// LLM loop (render, chat, parse, one retry on a parse failure).

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "beamtune/llm/chat.hpp"
#include "beamtune/optimizers/optimizer.hpp"
#include "beamtune/prompts/parse.hpp"
#include "beamtune/prompts/render.hpp"
#include "beamtune/task.hpp"

namespace beamtune::harness {

enum class Termination { budget_exhausted, double_parse_failure, transport_failure };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::budget_exhausted: return "budget_exhausted";
    case Termination::double_parse_failure: return "double_parse_failure";
    case Termination::transport_failure: return "transport_failure";
  }
  return "?";
}

inline Termination termination_from_string(std::string_view s) {
  if (s == "budget_exhausted") return Termination::budget_exhausted;
  if (s == "double_parse_failure") return Termination::double_parse_failure;
  if (s == "transport_failure") return Termination::transport_failure;
  throw std::invalid_argument("unknown termination: " + std::string(s));
}

/// One model call.
struct TranscriptEntry {
  int step = 0;     // 1-based iteration
  int attempt = 1;  // 2 for the second chance
  std::optional<std::string> system_prompt;
  std::string prompt;
  std::string response;  // empty when the call failed
  std::string outcome;   // "ok", a parse failure reason, or "transport:<kind>"
  std::string error;     // parse excerpt or transport message
  double latency_s = 0.0;
  double temperature = 0.0;
  std::optional<llm::Usage> usage;
};

struct StepOutcome {
  std::optional<MagnetSettings> settings;  // empty: the run ends here
  Termination termination = Termination::budget_exhausted;
  std::string detail;
  std::vector<TranscriptEntry> calls;
  int second_attempts = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string id() const = 0;
  virtual bool is_llm() const = 0;
  virtual StepOutcome next(std::span<const Sample> history, const BeamParameters& target, int step) = 0;
};

class OptimizerAgent final : public Agent {
 public:
  explicit OptimizerAgent(std::unique_ptr<Optimizer> optimizer) : optimizer_(std::move(optimizer)) {
    if (!optimizer_) throw std::invalid_argument("OptimizerAgent needs an optimizer");
  }

  std::string id() const override { return optimizer_->id(); }
  bool is_llm() const override { return false; }

  StepOutcome next(std::span<const Sample> history, const BeamParameters& target, int) override {
    StepOutcome out;
    out.settings = optimizer_->propose(history, target);
    return out;
  }

 private:
  std::unique_ptr<Optimizer> optimizer_;
};

struct LlmAgentConfig {
  std::string model;
  prompts::PromptKind prompt = prompts::PromptKind::tuning;
  std::optional<std::string> system_prompt;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  double timeout_s = 120.0;
  std::size_t window = 50;
  bool second_chance_feedback = false;
};

/// Text appended to the prompt of a second attempt in feedback mode.
inline std::string feedback_suffix(const prompts::ParseFailure& f) {
  return "\n\nYour previous answer could not be used (" + std::string(prompts::to_string(f.reason)) +
         "). Reply with exactly one JSON object containing the keys Q1, Q2, CV, Q3 and CH.";
}

class LlmAgent final : public Agent {
 public:
  LlmAgent(std::shared_ptr<llm::Backend> backend, LlmAgentConfig cfg) : backend_(std::move(backend)), cfg_(std::move(cfg)) {
    if (!backend_) throw std::invalid_argument("LlmAgent needs a backend");
  }

  std::string id() const override { return "llm:" + cfg_.model + ":" + std::string(prompts::to_string(cfg_.prompt)); }
  bool is_llm() const override { return true; }

  StepOutcome next(std::span<const Sample> history, const BeamParameters& target, int step) override {
    StepOutcome out;
    const std::string prompt = prompts::render(cfg_.prompt, target, history, {cfg_.window});
    std::optional<prompts::ParseFailure> first_failure;
    for (int attempt = 1; attempt <= 2; ++attempt) {
      if (attempt == 2) out.second_attempts = 1;
      std::string message = prompt;
      if (attempt == 2 && cfg_.second_chance_feedback) message += feedback_suffix(*first_failure);

      TranscriptEntry entry;
      entry.step = step;
      entry.attempt = attempt;
      entry.system_prompt = cfg_.system_prompt;
      entry.prompt = message;

      llm::ChatRequest request{cfg_.model, cfg_.system_prompt, message, cfg_.temperature, cfg_.max_tokens, cfg_.timeout_s};
      llm::ChatResponse response;
      try {
        response = backend_->chat(request);
      } catch (const llm::TransportError& e) {
        entry.outcome = std::string("transport:") + e.kind();
        entry.error = e.what();
        out.calls.push_back(std::move(entry));
        out.termination = Termination::transport_failure;
        out.detail = out.calls.back().error;
        return out;
      } catch (const std::exception& e) {
        entry.outcome = "transport:request";
        entry.error = e.what();
        out.calls.push_back(std::move(entry));
        out.termination = Termination::transport_failure;
        out.detail = out.calls.back().error;
        return out;
      }
      entry.response = response.text;
      entry.latency_s = response.latency_s;
      entry.temperature = response.temperature;
      entry.usage = response.usage;

      auto parsed = prompts::parse(response.text);
      if (auto* ok = std::get_if<prompts::ParsedSettings>(&parsed)) {
        entry.outcome = "ok";
        out.calls.push_back(std::move(entry));
        out.settings = ok->values;
        return out;
      }
      const auto& failure = std::get<prompts::ParseFailure>(parsed);
      entry.outcome = std::string(prompts::to_string(failure.reason));
      entry.error = failure.excerpt;
      out.calls.push_back(std::move(entry));
      first_failure = failure;
    }
    out.termination = Termination::double_parse_failure;
    out.detail = "step " + std::to_string(step) + ": " + out.calls.back().outcome;
    return out;
  }

  const LlmAgentConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<llm::Backend> backend_;
  LlmAgentConfig cfg_;
};

}  // namespace beamtune::harness
