#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "beamtune/beamtune.hpp"

namespace {

std::string default_config_path() { return std::string(BEAMTUNE_DATA_DIR) + "/default_config.json"; }
std::string default_fixture_path() { return std::string(BEAMTUNE_DATA_DIR) + "/trials/canonical_trials.json"; }

struct RunOptions {
  std::string config = default_config_path();
  std::string optimizer;
  std::string prompt = "tuning";
  std::string model;
  std::string fixture = default_fixture_path();
  int seeds = 0;
  int budget = 0;
  int workers = 0;
  std::string noise;
  std::string out;
};

int run_command(const RunOptions& o) {
  using namespace beamtune;
  Config cfg = load_config(o.config);
  if (!o.noise.empty()) {
    if (o.noise == "off") cfg.noise = {};
    else if (o.noise == "realistic") cfg.noise = NoiseConfig::realistic();
    else throw std::invalid_argument("--noise must be off or realistic");
  }

  harness::EvaluationConfig eval;
  eval.seeds = o.seeds > 0 ? o.seeds : cfg.harness.seeds;
  eval.budget = o.budget > 0 ? o.budget : cfg.harness.budget;
  eval.workers = o.workers > 0 ? o.workers : cfg.harness.workers;
  eval.lattice = cfg.lattice;
  eval.noise = cfg.noise;

  harness::AgentFactory factory =
      o.optimizer == "llm" ? harness::llm_factory(cfg, o.model, prompts::prompt_kind_from_string(o.prompt))
                           : harness::baseline_factory(o.optimizer, cfg);

  const auto trials = load_trials(o.fixture);
  const auto result = harness::evaluate(trials, factory, eval);
  harness::write_report(o.out, result.records, result.summary);
  std::cout << harness::summary_csv({result.summary});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam tuning benchmark: simulator, optimizers and LLM evaluation harness"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Evaluate one optimizer on a trial suite");
  run_cmd->add_option("--config", run.config, "Configuration file")->check(CLI::ExistingFile);
  run_cmd->add_option("--optimizer", run.optimizer, "Optimizer")
      ->required()
      ->check(CLI::IsMember({"bo", "es", "random", "do-nothing", "llm"}));
  run_cmd->add_option("--prompt", run.prompt, "Prompt for the llm optimizer")
      ->check(CLI::IsMember({"tuning", "explained", "cot", "optimisation"}));
  run_cmd->add_option("--model", run.model, "Model name for the llm optimizer");
  run_cmd->add_option("--trials-fixture", run.fixture, "Trial fixture file")->check(CLI::ExistingFile);
  run_cmd->add_option("--seeds", run.seeds, "Runs per trial (default from config)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--budget", run.budget, "Iterations per run (default from config)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--workers", run.workers, "Parallel runs (default from config)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--noise", run.noise, "Override the noise mode")->check(CLI::IsMember({"off", "realistic"}));
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Recompute summary files from stored runs");
  report_cmd->add_option("--in", report_dir, "Directory written by run")->required()->check(CLI::ExistingDirectory);

  auto* trials_cmd = app.add_subcommand("trials", "Trial fixtures");
  trials_cmd->require_subcommand(1);
  std::vector<std::uint64_t> trial_seeds;
  int first_id = 1;
  std::string trials_config = default_config_path();
  std::string trials_out;
  auto* gen_cmd = trials_cmd->add_subcommand("generate", "Generate trials from seeds");
  gen_cmd->add_option("--seed", trial_seeds, "Seed(s); one trial each")->required();
  gen_cmd->add_option("--first-id", first_id, "Trial id of the first trial");
  gen_cmd->add_option("--config", trials_config, "Configuration with the generator ranges")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", trials_out, "Write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_command(run);
    if (*report_cmd) {
      const auto summary = beamtune::harness::report(report_dir);
      std::cout << beamtune::harness::summary_csv({summary});
      return 0;
    }
    if (*gen_cmd) {
      const auto cfg = beamtune::load_config(trials_config);
      std::vector<beamtune::Trial> trials;
      int id = first_id;
      for (auto seed : trial_seeds) trials.push_back(beamtune::make_trial(seed, cfg.trial_generator, id++));
      const std::string text = beamtune::trials_to_json(trials).dump(2) + "\n";
      if (trials_out.empty()) {
        std::cout << text;
      } else {
        beamtune::harness::detail::write_file(trials_out, text);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
