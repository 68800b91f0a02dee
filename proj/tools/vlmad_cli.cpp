// Command-line front end: scan | run | ablate | report | record-fixture.
// Every run parameter comes from the config file; flags only pick the file
// and the log verbosity.

#include <iostream>

#include "CLI11.hpp"
#include "vlmad/error.hpp"
#include "vlmad/harness.hpp"
#include "vlmad/io.hpp"

namespace {

using vlmad::RunConfig;

void PrintSummary(const vlmad::RunResult& result) {
  const auto& c = result.coverage;
  std::cout << "attempted " << c.attempted << ", succeeded " << c.succeeded
            << ", unparseable " << c.unparseable << ", failed " << c.failed
            << ", backend calls " << result.backend_calls << "\n";
  for (const auto& [code, n] : c.failures_by_code) {
    std::cout << "  " << code << ": " << n << "\n";
  }
  if (!result.records.empty() || !result.unparseable.empty()) {
    auto reports = vlmad::BuildReports(result);
    std::cout << vlmad::ReportsToMarkdown(reports);
  }
}

std::filesystem::path RequireOutputDir(const RunConfig& config) {
  if (config.output_dir.empty()) {
    throw vlmad::Error(vlmad::ErrorCode::kConfigInvalid,
                       "output_dir must be set in the config");
  }
  return config.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompted vision-language anomaly detection benchmark"};
  app.require_subcommand(1);
  std::string config_path;
  int verbosity = 0;
  app.add_option("-c,--config", config_path, "Run config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", verbosity, "Increase log verbosity (-v, -vv)");

  auto* scan = app.add_subcommand("scan", "Scan the dataset tree and print the manifest");
  auto* run = app.add_subcommand("run", "Run the benchmark and write reports");
  auto* ablate = app.add_subcommand("ablate", "Run every configured strategy and write the ablation matrix");
  auto* report = app.add_subcommand("report", "Rebuild reports from records.jsonl in output_dir");
  auto* record = app.add_subcommand(
      "record-fixture", "Run against a live backend, saving responses to backend.fixture_path");

  CLI11_PARSE(app, argc, argv);
  vlmad::SetVerbosity(verbosity);

  try {
    RunConfig config = vlmad::LoadRunConfig(config_path);
    if (scan->parsed()) {
      auto manifest = vlmad::ScanLayout(config.dataset_root, {config.sample_limit});
      const std::string text = vlmad::ManifestToJson(manifest).dump(2) + "\n";
      if (!config.output_dir.empty()) {
        vlmad::WriteFile(config.output_dir / "manifest.json", text);
      }
      std::cout << text;
    } else if (run->parsed()) {
      const auto dir = RequireOutputDir(config);
      auto result = vlmad::RunBenchmark(config);
      vlmad::EmitReport(result, dir);
      PrintSummary(result);
    } else if (ablate->parsed()) {
      const auto dir = RequireOutputDir(config);
      auto result = vlmad::RunAblation(config);
      vlmad::EmitReport(result.run, dir);
      PrintSummary(result.run);
      std::cout << "\n" << vlmad::AblationToCsv(result.matrix);
    } else if (report->parsed()) {
      for (const auto& p : vlmad::EmitReportFromDirectory(RequireOutputDir(config))) {
        std::cout << p.string() << "\n";
      }
    } else if (record->parsed()) {
      const auto dir = RequireOutputDir(config);
      if (config.backend.adapter != vlmad::AdapterKind::kOpenAiChat &&
          config.backend.adapter != vlmad::AdapterKind::kGemini) {
        throw vlmad::Error(vlmad::ErrorCode::kConfigInvalid,
                           "record-fixture needs a live adapter (openai|gemini)");
      }
      if (config.backend.fixture_path.empty()) {
        throw vlmad::Error(vlmad::ErrorCode::kConfigInvalid,
                           "record-fixture needs backend.fixture_path");
      }
      config.cache_path = config.backend.fixture_path;
      auto result = vlmad::RunBenchmark(config);
      vlmad::EmitReport(result, dir);
      PrintSummary(result);
      std::cout << "fixture: " << config.backend.fixture_path << "\n";
    }
  } catch (const vlmad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == vlmad::ErrorCode::kConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
