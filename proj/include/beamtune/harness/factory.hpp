#pragma once

// Agent factories built from a loaded configuration.

#include <memory>
#include <stdexcept>
#include <string>

#include "beamtune/config.hpp"
#include "beamtune/harness/evaluate.hpp"
#include "beamtune/llm/http_backend.hpp"
#include "beamtune/optimizers.hpp"

namespace beamtune::harness {

inline AgentFactory baseline_factory(const std::string& kind, const Config& cfg) {
  make_optimizer(kind, 0, cfg.bo, cfg.es);  // reject unknown kinds up front
  return [kind, bo = cfg.bo, es = cfg.es](const RunContext& ctx) -> std::unique_ptr<Agent> {
    return std::make_unique<OptimizerAgent>(make_optimizer(kind, ctx.optimizer_seed, bo, es));
  };
}

inline llm::HttpBackendConfig http_config(const BackendConfig& b) {
  llm::HttpBackendConfig h;
  h.dialect = llm::dialect_from_string(b.kind);
  h.base_url = b.base_url;
  h.requests_per_minute = b.requests_per_minute;
  h.retry = b.retry;
  return h;
}

/// HTTP backends are shared by all runs so rate limits apply across them;
/// scripted backends are created per run so every run replays the script.
inline AgentFactory llm_factory(const Config& cfg, const std::string& model, prompts::PromptKind prompt) {
  if (model.empty()) throw std::invalid_argument("the llm optimizer needs --model");
  const ModelProfile profile = model_profile(cfg.llm, model);
  const auto it = cfg.llm.backends.find(profile.backend);
  if (it == cfg.llm.backends.end()) throw std::invalid_argument("no backend named '" + profile.backend + "'");
  const BackendConfig backend = it->second;

  LlmAgentConfig agent;
  agent.model = model;
  agent.prompt = prompt;
  agent.system_prompt = profile.system_prompt;
  agent.temperature = profile.temperature;
  agent.max_tokens = cfg.llm.max_tokens;
  agent.timeout_s = cfg.llm.timeout_s;
  agent.window = cfg.llm.window;
  agent.second_chance_feedback = cfg.llm.second_chance_feedback;

  if (backend.kind == "scripted") {
    return [agent, backend](const RunContext&) -> std::unique_ptr<Agent> {
      auto b = std::make_shared<llm::ScriptedBackend>(backend.responses, backend.on_exhaust);
      return std::make_unique<LlmAgent>(std::move(b), agent);
    };
  }
  auto shared = std::make_shared<llm::HttpBackend>(http_config(backend));
  return [agent, shared](const RunContext&) -> std::unique_ptr<Agent> {
    return std::make_unique<LlmAgent>(shared, agent);
  };
}

}  // namespace beamtune::harness
