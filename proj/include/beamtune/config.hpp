#pragma once

// Harness configuration: one JSON document covering lattice geometry, the
// trial generator, noise, optimizer hyperparameters, chat backends and the
// evaluation protocol. Every section and key is optional; missing values
// fall back to the defaults below. Credentials are never read from here.

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtune/llm/chat.hpp"
#include "beamtune/llm/http_backend.hpp"
#include "beamtune/optics.hpp"
#include "beamtune/optimizers/bayesian.hpp"
#include "beamtune/optimizers/extremum_seeking.hpp"
#include "beamtune/prompts/templates.hpp"
#include "beamtune/task.hpp"

namespace beamtune {

inline constexpr const char* kConfigSchema = "beamtune.config/1";

struct BackendConfig {
  std::string kind = "ollama";  // openai | ollama | scripted
  std::string base_url = "http://localhost:11434";
  double requests_per_minute = 0.0;
  llm::RetryPolicy retry;
  std::vector<std::string> responses;  // scripted only
  llm::OnExhaust on_exhaust = llm::OnExhaust::repeat_last;
};

struct ModelProfile {
  std::string backend;
  std::optional<std::string> system_prompt;
  std::optional<double> temperature;
};

struct LlmConfig {
  std::size_t window = 50;
  bool second_chance_feedback = false;
  double timeout_s = 120.0;
  std::optional<int> max_tokens;
  std::string default_backend = "ollama";
  std::map<std::string, BackendConfig> backends;
  std::map<std::string, ModelProfile> models;
};

struct HarnessConfig {
  int budget = 50;
  int seeds = 3;
  int workers = 1;
};

struct Config {
  Lattice lattice = Lattice::default_section();
  NoiseConfig noise;
  TrialGeneratorConfig trial_generator;
  BoConfig bo;
  EsConfig es;
  LlmConfig llm;
  HarnessConfig harness;

  static Config defaults() {
    Config c;
    c.llm.backends["openai"] = {"openai", "https://api.openai.com", 0.0, {}, {}, llm::OnExhaust::repeat_last};
    c.llm.backends["ollama"] = {"ollama", "http://localhost:11434", 0.0, {}, {}, llm::OnExhaust::repeat_last};
    return c;
  }
};

/// Published default system prompt for a model name, if its family has one.
inline std::optional<std::string> default_system_prompt(const std::string& model) {
  std::string lower = model;
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower.find("orca") != std::string::npos) return std::string(prompts::kOrcaSystemPrompt);
  if (lower.find("vicuna") != std::string::npos) return std::string(prompts::kVicunaSystemPrompt);
  return std::nullopt;
}

namespace detail {

inline Range range_from_json(const nlohmann::json& j, Range fallback) {
  if (j.is_null()) return fallback;
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("ranges are [lo, hi] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::string resolve_system_prompt(const std::string& s) {
  if (s == "orca") return std::string(prompts::kOrcaSystemPrompt);
  if (s == "vicuna") return std::string(prompts::kVicunaSystemPrompt);
  return s;
}

}  // namespace detail

inline Lattice lattice_from_json(const nlohmann::json& j) {
  std::vector<LatticeElement> elements;
  for (const auto& e : j.at("elements")) {
    LatticeElement el;
    el.name = e.value("name", std::string{});
    el.kind = element_kind_from_string(e.at("kind").get<std::string>());
    el.length = e.value("length", 0.0);
    elements.push_back(std::move(el));
  }
  return Lattice(std::move(elements));
}

inline nlohmann::json lattice_to_json(const Lattice& l) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : l.elements())
    arr.push_back({{"name", e.name}, {"kind", std::string(to_string(e.kind))}, {"length", e.length}});
  return {{"elements", arr}};
}

inline Config config_from_json(const nlohmann::json& j) {
  if (j.contains("schema") && j["schema"].get<std::string>() != kConfigSchema)
    throw std::invalid_argument(std::string("config schema must be ") + kConfigSchema);
  Config c = Config::defaults();

  if (j.contains("lattice")) c.lattice = lattice_from_json(j["lattice"]);

  if (j.contains("noise")) {
    const auto& n = j["noise"];
    const std::string mode = n.value("mode", std::string("off"));
    if (mode == "off") c.noise = {};
    else if (mode == "realistic") c.noise = NoiseConfig::realistic();
    else if (mode == "custom") c.noise = {n.at("position_sigma_m").get<double>()};
    else throw std::invalid_argument("noise mode must be off, realistic or custom");
  }

  if (j.contains("trial_generator")) {
    const auto& g = j["trial_generator"];
    auto& t = c.trial_generator;
    auto get = [&](const char* key, Range fallback) { return detail::range_from_json(g.value(key, nlohmann::json()), fallback); };
    t.target_position = get("target_position_m", t.target_position);
    t.target_size = get("target_size_m", t.target_size);
    t.misalignment = get("misalignment_m", t.misalignment);
    t.incoming_position = get("incoming_position_m", t.incoming_position);
    t.incoming_slope = get("incoming_slope_rad", t.incoming_slope);
    t.incoming_size = get("incoming_size_m", t.incoming_size);
    t.incoming_divergence = get("incoming_divergence_rad", t.incoming_divergence);
    t.validate();
  }

  if (j.contains("optimizers")) {
    const auto& o = j["optimizers"];
    if (o.contains("bo")) {
      const auto& b = o["bo"];
      auto& bo = c.bo;
      bo.n_init = b.value("n_init", bo.n_init);
      bo.candidates = b.value("candidates", bo.candidates);
      bo.refine_starts = b.value("refine_starts", bo.refine_starts);
      bo.refine_evaluations = b.value("refine_evaluations", bo.refine_evaluations);
      bo.log_objective = b.value("log_objective", bo.log_objective);
      bo.return_best_at_step = b.value("return_best_at_step", bo.return_best_at_step);
      bo.gp.iterations = b.value("gp_iterations", bo.gp.iterations);
      bo.gp.min_lengthscale = b.value("min_lengthscale", bo.gp.min_lengthscale);
      bo.gp.max_lengthscale = b.value("max_lengthscale", bo.gp.max_lengthscale);
      bo.gp.min_noise_var = b.value("min_noise_var", bo.gp.min_noise_var);
      bo.gp.max_noise_var = b.value("max_noise_var", bo.gp.max_noise_var);
    }
    if (o.contains("es")) {
      const auto& e = o["es"];
      auto& es = c.es;
      if (e.contains("omega")) {
        const auto w = e["omega"].get<std::vector<double>>();
        if (w.size() != kNumActuators) throw std::invalid_argument("es.omega needs five frequencies");
        std::copy(w.begin(), w.end(), es.omega.begin());
      }
      es.dt = e.value("dt", es.dt);
      es.amplitude = e.value("amplitude", es.amplitude);
      es.gain = e.value("gain", es.gain);
      es.validate();
    }
  }

  if (j.contains("llm")) {
    const auto& l = j["llm"];
    auto& llm = c.llm;
    llm.window = l.value("window", llm.window);
    llm.second_chance_feedback = l.value("second_chance_feedback", llm.second_chance_feedback);
    llm.timeout_s = l.value("timeout_s", llm.timeout_s);
    if (l.contains("max_tokens") && !l["max_tokens"].is_null()) llm.max_tokens = l["max_tokens"].get<int>();
    llm.default_backend = l.value("default_backend", llm.default_backend);
    if (l.contains("backends")) {
      for (const auto& [name, b] : l["backends"].items()) {
        BackendConfig bc;
        bc.kind = b.value("kind", bc.kind);
        bc.base_url = b.value("base_url", bc.kind == "openai" ? std::string("https://api.openai.com") : bc.base_url);
        bc.requests_per_minute = b.value("requests_per_minute", 0.0);
        bc.retry.max_retries = b.value("max_retries", bc.retry.max_retries);
        bc.retry.initial_backoff_s = b.value("initial_backoff_s", bc.retry.initial_backoff_s);
        if (b.contains("responses")) bc.responses = b["responses"].get<std::vector<std::string>>();
        if (b.value("on_exhaust", std::string("repeat_last")) == "error") bc.on_exhaust = llm::OnExhaust::error;
        if (b.contains("api_key")) throw std::invalid_argument("credentials belong in LLM_API_KEY, not the config file");
        if (bc.kind != "openai" && bc.kind != "ollama" && bc.kind != "scripted")
          throw std::invalid_argument("backend kind must be openai, ollama or scripted");
        if (bc.kind == "scripted" && bc.responses.empty())
          throw std::invalid_argument("scripted backend '" + name + "' needs responses");
        llm.backends[name] = std::move(bc);
      }
    }
    if (l.contains("models")) {
      for (const auto& [name, m] : l["models"].items()) {
        ModelProfile p;
        p.backend = m.value("backend", llm.default_backend);
        if (m.contains("system_prompt") && !m["system_prompt"].is_null())
          p.system_prompt = detail::resolve_system_prompt(m["system_prompt"].get<std::string>());
        if (m.contains("temperature")) p.temperature = m["temperature"].get<double>();
        llm.models[name] = std::move(p);
      }
    }
  }

  if (j.contains("harness")) {
    const auto& h = j["harness"];
    c.harness.budget = h.value("budget", c.harness.budget);
    c.harness.seeds = h.value("seeds", c.harness.seeds);
    c.harness.workers = h.value("workers", c.harness.workers);
    if (c.harness.budget < 1 || c.harness.seeds < 1 || c.harness.workers < 1)
      throw std::invalid_argument("harness budget, seeds and workers must be positive");
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return config_from_json(nlohmann::json::parse(in));
}

/// Profile for a model: configured entry, else default backend plus the
/// family system prompt where one is published.
inline ModelProfile model_profile(const LlmConfig& cfg, const std::string& model) {
  if (auto it = cfg.models.find(model); it != cfg.models.end()) return it->second;
  return {cfg.default_backend, default_system_prompt(model), std::nullopt};
}

}  // namespace beamtune
