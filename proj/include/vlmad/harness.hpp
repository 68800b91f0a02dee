#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vlmad/backend.hpp"
#include "vlmad/core_types.hpp"
#include "vlmad/dataset.hpp"
#include "vlmad/metrics.hpp"
#include "vlmad/parser.hpp"
#include "vlmad/preprocess.hpp"
#include "vlmad/prompt.hpp"

namespace vlmad {

struct PreprocessParams {
  int max_dim = 512;
  int point_cloud_resolution = 256;
  ChartSpec chart;
  int video_columns = 3;
};

// Everything a run needs. Relative paths in the config file are resolved
// against the directory holding that file.
struct RunConfig {
  std::filesystem::path dataset_root;
  std::vector<std::string> categories;  // empty = all
  std::vector<PromptStrategy> strategies{{StrategyLevel::kNormalityCase}};
  BackendConfig backend;
  std::filesystem::path rules_path;     // empty = shipped MVTec-AD rules
  std::filesystem::path template_path;  // empty = built-in wording
  PreprocessParams preprocess;
  int workers = 1;
  std::filesystem::path cache_path;  // empty = in-memory cache
  std::filesystem::path output_dir;
  std::optional<std::size_t> sample_limit;
  int repeats = 1;
  bool strict_prompts = true;
  ParserConfig parser;
};

void Validate(const RunConfig& config);
RunConfig ParseRunConfig(const nlohmann::json& j,
                         const std::filesystem::path& base_dir);
RunConfig LoadRunConfig(const std::filesystem::path& path);
nlohmann::json RunConfigToJson(const RunConfig& config);

std::filesystem::path DefaultRulesPath();

// Reduces one sample of any modality to a CanonicalImage.
CanonicalImage PreprocessSample(const std::filesystem::path& source,
                                Modality modality, const PreprocessParams& params);

struct Coverage {
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
  std::size_t unparseable = 0;
  std::size_t failed = 0;  // preprocessing or backend errors
  std::map<std::string, std::size_t> failures_by_code;

  std::size_t excluded() const { return unparseable + failed; }
};

void to_json(nlohmann::json& j, const Coverage& c);
void from_json(const nlohmann::json& j, Coverage& c);

struct RunResult {
  DatasetManifest manifest;
  // Sorted by (strategy level, category, sample id).
  std::vector<EvalRecord> records;
  // strategy id -> category -> unparseable responses.
  std::map<std::string, std::map<std::string, std::size_t>> unparseable;
  std::vector<std::string> failure_log;  // "<sample>|<strategy>: <error>"
  Coverage coverage;
  std::vector<PromptStrategy> strategies;
  std::uint64_t backend_calls = 0;  // calls that reached the wrapped backend
};

// Runs manifest -> preprocess -> prompt -> backend -> parse for every
// (category, test sample, strategy). Backend calls go through a cache keyed by
// request digest (config.cache_path). Per-sample failures are recorded and
// the run continues; only configuration problems throw (kConfigInvalid,
// kAuthMissing, dataset errors as kDatasetError).
//
// When `backend` is null it is built from config.backend.
RunResult RunBenchmark(const RunConfig& config,
                       std::shared_ptr<Backend> backend = nullptr);

// One MetricsReport per strategy, in strategy level order.
std::vector<MetricsReport> BuildReports(const RunResult& result);
std::vector<MetricsReport> BuildReports(
    const std::vector<EvalRecord>& records,
    const std::map<std::string, std::map<std::string, std::size_t>>& unparseable);

// Strategy x category accuracy.
struct AblationMatrix {
  std::vector<std::string> strategies;  // columns, level order
  std::vector<std::string> categories;  // rows, lexicographic
  std::vector<std::vector<MetricValue>> acc;  // [category][strategy]
};

AblationMatrix BuildAblation(std::span<const MetricsReport> reports);
std::string AblationToCsv(const AblationMatrix& matrix);

struct AblationResult {
  RunResult run;
  AblationMatrix matrix;
};

// Requires >= 2 strategies (kConfigInvalid otherwise).
AblationResult RunAblation(const RunConfig& config,
                           std::shared_ptr<Backend> backend = nullptr);

enum class ReportFormat { kCsv, kMarkdown };

// Writes records.jsonl, coverage.json, report_<strategy>.{csv,md},
// report.md and (for >= 2 strategies) ablation.csv into `dir`. Output is a
// pure function of the records and tallies. Returns the written paths.
std::vector<std::filesystem::path> EmitReport(
    const RunResult& result, const std::filesystem::path& dir,
    const std::vector<ReportFormat>& formats = {ReportFormat::kCsv,
                                                ReportFormat::kMarkdown});

// Regenerates reports from a previous run's records.jsonl and coverage.json.
std::vector<std::filesystem::path> EmitReportFromDirectory(
    const std::filesystem::path& dir,
    const std::vector<ReportFormat>& formats = {ReportFormat::kCsv,
                                                ReportFormat::kMarkdown});

}  // namespace vlmad
