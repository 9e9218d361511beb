#pragma once

// Persistence of run records and suite summaries.
//
//   <dir>/summary.csv         one row per optimizer, Table-1 style columns
//   <dir>/summary.json        per-run metrics, aggregates and success tiers
//   <dir>/runs/<run>.json     full record without transcripts
//   <dir>/runs/<run>.jsonl    one line per model call
//
// Summaries contain no wall-clock data, so rewriting them from the same
// records is byte-identical.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "beamtune/harness/metrics.hpp"

namespace beamtune::harness {

inline constexpr const char* kRunSchema = "beamtune.run/1";
inline constexpr const char* kSummarySchema = "beamtune.summary/1";

inline std::string run_name(const RunRecord& r) {
  return "trial" + std::to_string(r.trial_id) + "_seed" + std::to_string(r.seed);
}

inline nlohmann::json to_json(const Sample& s) {
  nlohmann::json clamped = nlohmann::json::array();
  for (bool c : s.clamped) clamped.push_back(c);
  return {{"step", s.step_index}, {"settings", beamtune::to_json(s.settings)},
          {"beam_mm", beamtune::to_json(s.parameters)}, {"objective_mm", s.objective},
          {"mae_mm", s.mae}, {"clamped", clamped}};
}

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.step_index = j.at("step").get<int>();
  s.settings = settings_from_json(j.at("settings"));
  s.parameters = beam_from_json(j.at("beam_mm"));
  s.objective = j.at("objective_mm").get<double>();
  s.mae = j.at("mae_mm").get<double>();
  const auto& c = j.at("clamped");
  for (std::size_t i = 0; i < kNumActuators; ++i) s.clamped[i] = c.at(i).get<bool>();
  return s;
}

inline nlohmann::json to_json(const TranscriptEntry& e, bool include_timing = true) {
  nlohmann::json j{{"step", e.step},         {"attempt", e.attempt}, {"prompt", e.prompt},
                   {"response", e.response}, {"outcome", e.outcome}, {"error", e.error},
                   {"temperature", e.temperature}};
  j["system_prompt"] = e.system_prompt ? nlohmann::json(*e.system_prompt) : nlohmann::json();
  j["usage"] = e.usage ? nlohmann::json{{"prompt_tokens", e.usage->prompt_tokens},
                                        {"completion_tokens", e.usage->completion_tokens}}
                       : nlohmann::json();
  if (include_timing) j["latency_s"] = e.latency_s;
  return j;
}

inline TranscriptEntry transcript_from_json(const nlohmann::json& j) {
  TranscriptEntry e;
  e.step = j.at("step").get<int>();
  e.attempt = j.at("attempt").get<int>();
  e.prompt = j.at("prompt").get<std::string>();
  e.response = j.at("response").get<std::string>();
  e.outcome = j.at("outcome").get<std::string>();
  e.error = j.value("error", std::string{});
  e.temperature = j.value("temperature", 0.0);
  e.latency_s = j.value("latency_s", 0.0);
  if (j.contains("system_prompt") && !j["system_prompt"].is_null()) e.system_prompt = j["system_prompt"].get<std::string>();
  if (j.contains("usage") && !j["usage"].is_null())
    e.usage = llm::Usage{j["usage"].at("prompt_tokens").get<long>(), j["usage"].at("completion_tokens").get<long>()};
  return e;
}

/// Record without transcripts. `include_timing = false` drops wall-clock
/// fields, leaving only data that is reproducible from the seeds.
inline nlohmann::json to_json(const RunRecord& r, bool include_timing = true) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) samples.push_back(to_json(s));
  nlohmann::json j{{"schema", kRunSchema},
                   {"trial_id", r.trial_id},
                   {"seed", r.seed},
                   {"optimizer_id", r.optimizer_id},
                   {"is_llm", r.is_llm},
                   {"budget", r.budget},
                   {"termination", std::string(to_string(r.termination))},
                   {"termination_detail", r.termination_detail},
                   {"clamp_counts", r.clamp_counts},
                   {"iterations_started", r.iterations_started},
                   {"second_attempts", r.second_attempts},
                   {"successful_steps", r.successful_steps()},
                   {"model_calls", r.model_calls()},
                   {"samples", samples}};
  if (include_timing) j["step_wall_s"] = r.step_wall_s;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kRunSchema) throw std::invalid_argument("not a run record");
  RunRecord r;
  r.trial_id = j.at("trial_id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.optimizer_id = j.at("optimizer_id").get<std::string>();
  r.is_llm = j.at("is_llm").get<bool>();
  r.budget = j.at("budget").get<int>();
  r.termination = termination_from_string(j.at("termination").get<std::string>());
  r.termination_detail = j.value("termination_detail", std::string{});
  r.clamp_counts = j.at("clamp_counts").get<std::array<int, kNumActuators>>();
  r.iterations_started = j.at("iterations_started").get<int>();
  r.second_attempts = j.at("second_attempts").get<int>();
  if (j.contains("step_wall_s")) r.step_wall_s = j["step_wall_s"].get<std::vector<double>>();
  for (const auto& s : j.at("samples")) r.samples.push_back(sample_from_json(s));
  return r;
}

namespace detail {

inline std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline nlohmann::json stat_json(const std::optional<Stat>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"sd", s->sd}, {"n", s->n}};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline constexpr const char* kSummaryCsvHeader =
    "optimizer,runs,final_beam_difference_um_mean,final_beam_difference_um_sd,"
    "normalised_beam_improvement_pct_mean,normalised_beam_improvement_pct_sd,"
    "normalised_integrated_mae_pct_mean,normalised_integrated_mae_pct_sd,"
    "successful_steps_mean,successful_steps_sd,successful_runs,outright,partial,single_trial";

/// One CSV row; "-" marks undefined or not-applicable cells.
inline std::string summary_csv_row(const SuiteSummary& s) {
  auto cells = [](const std::optional<Stat>& st) {
    return st ? detail::fixed(st->mean) + "," + detail::fixed(st->sd) : std::string("-,-");
  };
  auto yes_no = [](bool b) { return b ? std::string("yes") : std::string("no"); };
  return s.optimizer_id + "," + std::to_string(s.runs.size()) + "," + cells(s.final_beam_difference_um) + "," +
         cells(s.normalized_improvement_pct) + "," + cells(s.normalized_integrated_mae_pct) + "," +
         cells(s.successful_steps) + "," + std::to_string(s.successful_runs) + "," + yes_no(s.tiers.outright) +
         "," + yes_no(s.tiers.partial) + "," + yes_no(s.tiers.single_trial);
}

inline std::string summary_csv(const std::vector<SuiteSummary>& summaries) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& s : summaries) out += summary_csv_row(s) + "\n";
  return out;
}

inline nlohmann::json to_json(const SuiteSummary& s) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) {
    const auto& m = r.metrics;
    runs.push_back({{"trial_id", r.trial_id},
                    {"seed", r.seed},
                    {"termination", std::string(to_string(r.termination))},
                    {"mae_initial_mm", m.mae_initial_mm},
                    {"mae_final_mm", m.mae_final_mm},
                    {"final_beam_difference_um", m.final_beam_difference_um},
                    {"normalised_beam_improvement_pct",
                     m.normalized_improvement_pct ? nlohmann::json(*m.normalized_improvement_pct) : nlohmann::json()},
                    {"normalised_integrated_mae_pct", m.normalized_integrated_mae_pct
                                                          ? nlohmann::json(*m.normalized_integrated_mae_pct)
                                                          : nlohmann::json()},
                    {"successful_steps", s.is_llm ? nlohmann::json(m.successful_steps) : nlohmann::json("-")},
                    {"run_success", m.run_success},
                    {"integrated_fill_applied", m.fill_applied}});
  }
  return {{"schema", kSummarySchema},
          {"optimizer", s.optimizer_id},
          {"is_llm", s.is_llm},
          {"runs", runs},
          {"final_beam_difference_um", detail::stat_json(s.final_beam_difference_um)},
          {"normalised_beam_improvement_pct", detail::stat_json(s.normalized_improvement_pct)},
          {"normalised_integrated_mae_pct", detail::stat_json(s.normalized_integrated_mae_pct)},
          {"successful_steps", detail::stat_json(s.successful_steps)},
          {"successful_runs", s.successful_runs},
          {"undefined_normalised_runs", s.undefined_normalized},
          {"integrated_fill_applied_runs", s.fill_applied},
          {"transport_failures", s.transport_failures},
          {"double_parse_failures", s.double_parse_failures},
          {"tiers", {{"outright", s.tiers.outright}, {"partial", s.tiers.partial}, {"single_trial", s.tiers.single_trial}}}};
}

inline std::string transcript_jsonl(const RunRecord& r) {
  std::string out;
  for (const auto& e : r.transcripts) out += to_json(e).dump() + "\n";
  return out;
}

inline void write_summary(const std::filesystem::path& dir, const SuiteSummary& summary) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  detail::write_file(dir / "summary.csv", summary_csv({summary}));
  detail::write_file(dir / "summary.json", to_json(summary).dump(2) + "\n");
}

inline void write_report(const std::filesystem::path& dir, const std::vector<RunRecord>& records,
                         const SuiteSummary& summary) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "runs", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  for (const auto& r : records) {
    detail::write_file(dir / "runs" / (run_name(r) + ".json"), to_json(r).dump(2) + "\n");
    detail::write_file(dir / "runs" / (run_name(r) + ".jsonl"), transcript_jsonl(r));
  }
  write_summary(dir, summary);
}

/// Records under <dir>/runs, in trial then seed order, transcripts included.
inline std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  const auto runs_dir = dir / "runs";
  if (!std::filesystem::is_directory(runs_dir)) throw std::runtime_error("no runs directory in " + dir.string());
  std::vector<RunRecord> records;
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
    if (entry.path().extension() != ".json") continue;
    auto r = record_from_json(nlohmann::json::parse(detail::read_file(entry.path())));
    auto jsonl = entry.path();
    jsonl.replace_extension(".jsonl");
    if (std::filesystem::exists(jsonl)) {
      std::istringstream lines(detail::read_file(jsonl));
      for (std::string line; std::getline(lines, line);)
        if (!line.empty()) r.transcripts.push_back(transcript_from_json(nlohmann::json::parse(line)));
    }
    records.push_back(std::move(r));
  }
  std::ranges::sort(records, [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.trial_id, a.seed) < std::tie(b.trial_id, b.seed);
  });
  return records;
}

/// Recomputes and rewrites the summary files from the stored runs.
inline SuiteSummary report(const std::filesystem::path& dir) {
  const auto records = load_records(dir);
  if (records.empty()) throw std::runtime_error("no run records in " + dir.string());
  auto summary = summarize(records);
  write_summary(dir, summary);
  return summary;
}

}  // namespace beamtune::harness
