#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>

#include "beamtune/beamtune.hpp"

using namespace beamtune;
using namespace beamtune::harness;

namespace {

const std::string kValid = "```json\n{\"Q1\": 10.0, \"Q2\": -12.0, \"CV\": 0.5, \"Q3\": 8.0, \"CH\": -0.25}\n```";
const std::string kInvalid = "I would rather not say.";

std::shared_ptr<llm::ScriptedBackend> scripted(std::vector<std::string> responses,
                                               llm::OnExhaust on_exhaust = llm::OnExhaust::error) {
  return std::make_shared<llm::ScriptedBackend>(std::move(responses), on_exhaust);
}

LlmAgentConfig agent_config() {
  LlmAgentConfig c;
  c.model = "scripted-model";
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("beamtune_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(p);
  return p;
}

Sample sample_with_mae(int step, double mae) {
  Sample s;
  s.step_index = step;
  s.mae = mae;
  s.objective = 4.0 * mae;
  return s;
}

RunRecord record_with_maes(const std::vector<double>& maes, int budget) {
  RunRecord r;
  r.budget = budget;
  for (std::size_t i = 0; i < maes.size(); ++i) r.samples.push_back(sample_with_mae(static_cast<int>(i), maes[i]));
  return r;
}

AgentFactory scripted_factory(std::vector<std::string> responses) {
  return [responses](const RunContext&) -> std::unique_ptr<Agent> {
    return std::make_unique<LlmAgent>(scripted(responses, llm::OnExhaust::repeat_last), agent_config());
  };
}

}  // namespace

TEST(Episode, DoNothingRepeatsInitialMeasurement) {
  const auto trial = make_trial(5);
  OptimizerAgent agent(std::make_unique<DoNothing>());
  Environment env;
  const auto rec = run_episode(trial, agent, env);
  ASSERT_EQ(rec.steps_taken(), 50);
  for (const auto& s : rec.samples) {
    EXPECT_EQ(s.settings, trial.initial_settings);
    EXPECT_EQ(s.mae, rec.samples.front().mae);
  }
  EXPECT_EQ(rec.termination, Termination::budget_exhausted);
  EXPECT_EQ(rec.model_calls(), 0);
  const auto m = compute_metrics(rec);
  EXPECT_EQ(*m.normalized_improvement_pct, 0.0);
  EXPECT_EQ(*m.normalized_integrated_mae_pct, 100.0);
  EXPECT_FALSE(m.run_success);
}

TEST(Episode, LlmStepAppliesParsedSettings) {
  const auto trial = make_trial(5);
  auto backend = scripted({kValid}, llm::OnExhaust::repeat_last);
  LlmAgent agent(backend, agent_config());
  Environment env;
  const auto rec = run_episode(trial, agent, env, 3);
  ASSERT_EQ(rec.steps_taken(), 3);
  EXPECT_EQ(rec.samples[1].settings, (MagnetSettings{10.0, -12.0, 0.5e-3, 8.0, -0.25e-3}));
  const auto requests = backend->requests();
  ASSERT_EQ(requests.size(), 3u);
  // The prompt at step t carries the t samples measured so far.
  const std::vector<Sample> first(rec.samples.begin(), rec.samples.begin() + 2);
  EXPECT_EQ(requests[1].user_message, prompts::render(prompts::PromptKind::tuning, trial.target, first));
  EXPECT_EQ(rec.transcripts[1].prompt, requests[1].user_message);
  EXPECT_EQ(rec.transcripts[1].outcome, "ok");
  EXPECT_TRUE(rec.is_llm);
  EXPECT_EQ(rec.optimizer_id, "llm:scripted-model:tuning");
}

TEST(Episode, SecondChanceUsesIdenticalPrompt) {
  std::vector<std::string> script;
  for (int i = 0; i < 50; ++i) {
    script.push_back(kInvalid);
    script.push_back(kValid);
  }
  auto backend = scripted(script);
  LlmAgent agent(backend, agent_config());
  Environment env;
  const auto rec = run_episode(make_trial(5), agent, env);
  EXPECT_EQ(rec.steps_taken(), 50);
  EXPECT_EQ(rec.model_calls(), 100);
  EXPECT_EQ(rec.second_attempts, 50);
  EXPECT_EQ(rec.termination, Termination::budget_exhausted);
  EXPECT_EQ(rec.model_calls(), rec.iterations_started + rec.second_attempts);
  const auto requests = backend->requests();
  for (std::size_t i = 0; i < requests.size(); i += 2) EXPECT_EQ(requests[i].user_message, requests[i + 1].user_message);
  EXPECT_EQ(rec.transcripts[0].outcome, "no_json");
  EXPECT_EQ(rec.transcripts[0].attempt, 1);
  EXPECT_EQ(rec.transcripts[1].attempt, 2);
}

TEST(Episode, FeedbackModeAppendsReason) {
  auto cfg = agent_config();
  cfg.second_chance_feedback = true;
  auto backend = scripted({kInvalid, kValid});
  LlmAgent agent(backend, cfg);
  Environment env;
  run_episode(make_trial(5), agent, env, 1);
  const auto requests = backend->requests();
  ASSERT_EQ(requests.size(), 2u);
  EXPECT_EQ(requests[1].user_message,
            requests[0].user_message + feedback_suffix({prompts::FailureReason::no_json, ""}));
}

TEST(Episode, DoubleParseFailureEndsRun) {
  std::vector<std::string> script(6, kValid);
  script.push_back(kInvalid);
  script.push_back("```json\n{\"Q1\": 1,}\n```");
  LlmAgent agent(scripted(script), agent_config());
  Environment env;
  const auto rec = run_episode(make_trial(5), agent, env);
  EXPECT_EQ(rec.termination, Termination::double_parse_failure);
  EXPECT_EQ(rec.successful_steps(), 6);
  EXPECT_EQ(rec.iterations_started, 7);
  EXPECT_EQ(rec.model_calls(), 8);
  EXPECT_EQ(rec.model_calls(), rec.iterations_started + rec.second_attempts);
  EXPECT_EQ(rec.transcripts.back().outcome, "invalid_json");
  const auto m = compute_metrics(rec);
  EXPECT_TRUE(m.fill_applied);
  EXPECT_EQ(m.mae_final_mm, rec.samples[6].mae);
}

TEST(Episode, TransportFailureIsRecorded) {
  LlmAgent agent(scripted({kValid, kValid, kValid}), agent_config());
  Environment env;
  const auto rec = run_episode(make_trial(5), agent, env);
  EXPECT_EQ(rec.termination, Termination::transport_failure);
  EXPECT_EQ(rec.steps_taken(), 3);
  EXPECT_EQ(rec.model_calls(), 4);
  EXPECT_EQ(rec.transcripts.back().outcome, "transport:script_exhausted");
  EXPECT_FALSE(rec.termination_detail.empty());
}

TEST(Episode, ClampsAreCounted) {
  const std::string far = "```json\n{\"Q1\": 45, \"Q2\": 0, \"CV\": 0, \"Q3\": 0, \"CH\": -9}\n```";
  LlmAgent agent(scripted({far}, llm::OnExhaust::repeat_last), agent_config());
  Environment env;
  const auto rec = run_episode(make_trial(5), agent, env, 4);
  EXPECT_EQ(rec.clamp_counts[0], 4);
  EXPECT_EQ(rec.clamp_counts[1], 0);
  EXPECT_EQ(rec.clamp_counts[4], 4);
  EXPECT_EQ(rec.samples.back().settings.q1, 30.0);
}

TEST(Metrics, HalvingIsMinusFiftyPercent) {
  const auto m = compute_metrics(record_with_maes({2.0, 1.5, 1.0}, 2));
  EXPECT_DOUBLE_EQ(*m.normalized_improvement_pct, -50.0);
  EXPECT_DOUBLE_EQ(m.final_beam_difference_um, 1000.0);
  EXPECT_DOUBLE_EQ(*m.normalized_integrated_mae_pct, 100.0 * (1.5 + 1.0) / (2 * 2.0));
  EXPECT_TRUE(m.run_success);
  EXPECT_FALSE(m.fill_applied);
}

TEST(Metrics, EarlyTerminationHoldsLastValue) {
  // Two applied steps of a four-step budget: 1 + 0.5 + 0.5 + 0.5.
  const auto m = compute_metrics(record_with_maes({2.0, 1.0, 0.5}, 4));
  EXPECT_DOUBLE_EQ(*m.normalized_integrated_mae_pct, 100.0 * 2.5 / 8.0);
  EXPECT_DOUBLE_EQ(*m.normalized_improvement_pct, -75.0);
  EXPECT_TRUE(m.fill_applied);
  EXPECT_EQ(m.successful_steps, 2);
}

TEST(Metrics, ZeroInitialErrorIsUndefined) {
  const auto m = compute_metrics(record_with_maes({0.0, 0.1}, 1));
  EXPECT_FALSE(m.normalized_improvement_pct);
  EXPECT_FALSE(m.normalized_integrated_mae_pct);
  EXPECT_DOUBLE_EQ(m.final_beam_difference_um, 100.0);
}

TEST(Metrics, SuccessThreshold) {
  EXPECT_TRUE(is_run_success(1.0, 0.96));
  EXPECT_FALSE(is_run_success(1.0, 0.961));
  EXPECT_FALSE(is_run_success(1.0, 1.2));
}

TEST(Metrics, Tiers) {
  auto outcomes = [](std::vector<int> success) {
    std::vector<RunOutcome> v;
    for (std::size_t i = 0; i < success.size(); ++i) v.push_back({static_cast<int>(i / 3) + 1, success[i] != 0});
    return v;
  };
  auto t = classify_tiers(outcomes({1, 1, 1, 0, 0, 0, 1, 1, 0}));
  EXPECT_FALSE(t.outright);
  EXPECT_FALSE(t.partial);  // 5 of 9
  EXPECT_TRUE(t.single_trial);
  t = classify_tiers(outcomes({1, 1, 1, 1, 0, 1, 1, 1, 0}));
  EXPECT_FALSE(t.outright);
  EXPECT_TRUE(t.partial);  // 7 of 9
  EXPECT_TRUE(t.single_trial);
  t = classify_tiers(outcomes({1, 1, 0, 1, 0, 1, 1, 1, 0}));
  EXPECT_TRUE(t.partial);  // 6 of 9
  EXPECT_FALSE(t.single_trial);
  t = classify_tiers(outcomes({1, 1, 1, 1, 1, 1, 1, 1, 1}));
  EXPECT_TRUE(t.outright && t.partial && t.single_trial);
  t = classify_tiers(outcomes({0, 0, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_FALSE(t.outright || t.partial || t.single_trial);
}

TEST(Metrics, PopulationStandardDeviation) {
  const std::vector<double> v{1.0, 3.0};
  const auto s = mean_sd(v);
  EXPECT_EQ(s->mean, 2.0);
  EXPECT_EQ(s->sd, 1.0);
  EXPECT_FALSE(mean_sd(std::vector<double>{}));
}

TEST(Metrics, SummaryRejectsMixedOptimizers) {
  std::vector<RunRecord> recs{record_with_maes({1.0, 1.0}, 1), record_with_maes({1.0, 1.0}, 1)};
  recs[1].optimizer_id = "other";
  EXPECT_THROW(summarize(recs), std::invalid_argument);
}

TEST(Evaluate, SeedsAreDerivedFromTrialAndRun) {
  const auto t = make_trial(9);
  EXPECT_EQ(optimizer_seed(t, 1), derive_seed({t.seed, 1}));
  EXPECT_NE(optimizer_seed(t, 0), optimizer_seed(t, 1));
  EXPECT_NE(noise_seed(t, 0), optimizer_seed(t, 0));
}

TEST(Evaluate, WorkerCountDoesNotChangeResults) {
  const auto trials = canonical_trials();
  const Config cfg = Config::defaults();
  EvaluationConfig ec;
  ec.budget = 20;
  ec.noise = NoiseConfig::realistic();
  ec.workers = 1;
  const auto serial = evaluate(trials, baseline_factory("es", cfg), ec);
  ec.workers = 3;
  const auto parallel = evaluate(trials, baseline_factory("es", cfg), ec);
  ASSERT_EQ(serial.records.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(to_json(serial.records[i], false), to_json(parallel.records[i], false));
    EXPECT_EQ(serial.records[i].trial_id, trials[i / 3].trial_id);
    EXPECT_EQ(serial.records[i].seed, i % 3);
  }
  EXPECT_EQ(to_json(serial.summary), to_json(parallel.summary));
}

TEST(Evaluate, ScriptedLlmSuite) {
  const auto result = evaluate(canonical_trials(), scripted_factory({kInvalid, kValid}), {});
  ASSERT_EQ(result.records.size(), 9u);
  for (const auto& r : result.records) {
    EXPECT_EQ(r.steps_taken(), 50);
    EXPECT_EQ(r.model_calls(), 51);
  }
  ASSERT_TRUE(result.summary.successful_steps);
  EXPECT_EQ(result.summary.successful_steps->mean, 50.0);
  EXPECT_TRUE(result.summary.is_llm);
}

TEST(Evaluate, BaselineSummaryHasNoStepColumn) {
  EvaluationConfig ec;
  ec.budget = 2;
  const auto result = evaluate(canonical_trials(), baseline_factory("do-nothing", Config::defaults()), ec);
  EXPECT_FALSE(result.summary.successful_steps);
  EXPECT_NE(summary_csv({result.summary}).find(",-,-,"), std::string::npos);
}

TEST(Evaluate, FactoryErrorsPropagate) {
  AgentFactory bad = [](const RunContext&) -> std::unique_ptr<Agent> { throw std::runtime_error("boom"); };
  EvaluationConfig ec;
  ec.workers = 4;
  EXPECT_THROW(evaluate(canonical_trials(), bad, ec), std::runtime_error);
  EXPECT_THROW(baseline_factory("simplex", Config::defaults()), std::invalid_argument);
}

TEST(Report, CsvHeaderCoversAllMetrics) {
  const std::string header = kSummaryCsvHeader;
  for (const char* col : {"final_beam_difference_um_mean", "normalised_beam_improvement_pct_mean",
                          "normalised_integrated_mae_pct_mean", "successful_steps_mean", "outright", "partial",
                          "single_trial"})
    EXPECT_NE(header.find(col), std::string::npos) << col;
}

TEST(Report, WriteLoadAndRecompute) {
  const auto dir = temp_dir("report");
  EvaluationConfig ec;
  ec.budget = 5;
  const auto result = evaluate(canonical_trials(), scripted_factory({kInvalid, kValid, kValid}), ec);
  write_report(dir, result.records, result.summary);

  const auto csv = harness::detail::read_file(dir / "summary.csv");
  const auto json = harness::detail::read_file(dir / "summary.json");
  const auto again = report(dir);
  EXPECT_EQ(harness::detail::read_file(dir / "summary.csv"), csv);
  EXPECT_EQ(harness::detail::read_file(dir / "summary.json"), json);
  EXPECT_EQ(to_json(again), to_json(result.summary));

  const auto loaded = load_records(dir);
  ASSERT_EQ(loaded.size(), result.records.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(to_json(loaded[i]), to_json(result.records[i]));
    EXPECT_EQ(transcript_jsonl(loaded[i]), transcript_jsonl(result.records[i]));
    const auto lines = harness::detail::read_file(dir / "runs" / (run_name(loaded[i]) + ".jsonl"));
    EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), loaded[i].model_calls());
  }
  std::filesystem::remove_all(dir);
}

TEST(Report, UnwritableDirectoryFails) {
  const auto base = temp_dir("blocked");
  harness::detail::write_file(base, "not a directory");
  const auto result = evaluate({make_trial(1)}, baseline_factory("do-nothing", Config::defaults()), {1, 1});
  EXPECT_THROW(write_report(base / "out", result.records, result.summary), std::runtime_error);
  std::filesystem::remove(base);
}

TEST(Report, RecordSchemaChecked) {
  EXPECT_THROW(record_from_json(nlohmann::json{{"schema", "nope"}}), std::invalid_argument);
}
