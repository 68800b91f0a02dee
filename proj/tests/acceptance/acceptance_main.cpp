// Acceptance checks 1-10. Prints one PASS/FAIL (or SKIP for the optional
// live smoke) line per criterion and exits non-zero on any FAIL.
//
// Criterion 10 runs only when VLMAD_LIVE_CONFIG names a run config for a
// live backend whose key variable is set.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "testutil.hpp"
#include "vlmad/backend.hpp"
#include "vlmad/dataset.hpp"
#include "vlmad/error.hpp"
#include "vlmad/harness.hpp"
#include "vlmad/io.hpp"
#include "vlmad/parser.hpp"
#include "vlmad/preprocess.hpp"

namespace fs = std::filesystem;
using namespace vlmad;
using testing::Gray;

namespace {

struct Failure {
  std::string what;
};

struct Skip {
  std::string why;
};

void Require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::map<std::string, std::string> ReadDir(const std::vector<fs::path>& files) {
  std::map<std::string, std::string> out;
  for (const auto& p : files) out[p.filename().string()] = ReadFile(p);
  return out;
}

// ---- 1 ----
std::string MetricsOracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240101);
  const testing::ScoreRegime regimes[] = {testing::ScoreRegime::kBinary,
                                          testing::ScoreRegime::kContinuous,
                                          testing::ScoreRegime::kHeavyTies};
  int compared = 0;
  for (int i = 0; i < 1000; ++i) {
    auto d = testing::RandomScoredLabels(rng, regimes[i % 3], 200);
    const double roc = testing::PairwiseAurocOracle(d);
    const auto got_roc = Auroc(d);
    Require(got_roc.defined() == (roc >= 0), "AUROC definedness differs on instance " + std::to_string(i));
    if (roc >= 0) {
      Require(std::abs(got_roc.value() - roc) <= 1e-12, "AUROC differs on instance " + std::to_string(i));
      ++compared;
    }
    const double pr = testing::ThresholdAuprOracle(d);
    const auto got_pr = Aupr(d);
    Require(got_pr.defined() == (pr >= 0), "AUPR definedness differs on instance " + std::to_string(i));
    if (pr >= 0) {
      Require(std::abs(got_pr.value() - pr) <= 1e-12, "AUPR differs on instance " + std::to_string(i));
    }
  }
  const double secs = Seconds(start);
  Require(secs < 10.0, "took " + std::to_string(secs) + " s");
  std::ostringstream os;
  os << "1000 instances, " << compared << " two-class, " << FormatFixed(secs, 3) << " s";
  return os.str();
}

// ---- 2 ----
std::string MetricIdentities() {
  std::mt19937_64 rng(77);
  const testing::ScoreRegime regimes[] = {testing::ScoreRegime::kBinary,
                                          testing::ScoreRegime::kContinuous,
                                          testing::ScoreRegime::kHeavyTies};
  const std::vector<std::function<double(double)>> transforms = {
      [](double s) { return 2.0 * s - 5.0; }, [](double s) { return std::exp(3.0 * s); },
      [](double s) { return std::pow(s, 5.0); }};
  for (int i = 0; i < 1000; ++i) {
    auto d = testing::RandomScoredLabels(rng, regimes[i % 3], 200);
    std::vector<int> preds, labels;
    for (const auto& x : d) {
      preds.push_back(x.score >= 0.5);
      labels.push_back(x.label);
    }
    const double acc = Accuracy(preds, labels);
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> p2, l2;
    for (auto k : idx) {
      p2.push_back(preds[k]);
      l2.push_back(labels[k]);
    }
    Require(Accuracy(p2, l2) == acc && Accuracy(labels, preds) == acc, "accuracy not permutation invariant");
    const auto a = Auroc(d);
    if (!a.defined()) continue;
    for (const auto& f : transforms) {
      auto t = d;
      for (auto& x : t) x.score = f(x.score);
      Require(std::abs(Auroc(t).value() - a.value()) <= 1e-12, "AUROC changed under a monotone transform");
    }
    auto flipped = d;
    for (auto& x : flipped) x.label = 1 - x.label;
    Require(std::abs(Auroc(flipped).value() - (1.0 - a.value())) <= 1e-12, "label flip is not 1 - AUROC");
  }
  return "complementation, monotone invariance and accuracy permutation on 1000 instances";
}

// ---- 3 ----
std::string RendererGeometry() {
  auto single = RenderPointCloud({{{0, 0, 5}}, {}}, 64);
  int lit = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) lit += single.at(x, y)[0] != 0;
  Require(lit == 1 && single.at(32, 32)[0] == 255, "single point not at grid center");

  auto two = RenderPointCloud({{{0, 0, 0}, {1, 1, 1}}, {}}, 2);
  Require(two.at(0, 1)[0] == 255 && two.at(1, 0)[0] == 0 && two.at(0, 0)[0] == 0 &&
              two.at(1, 1)[0] == 0,
          "2x2 trace mismatch");

  PointCloud plane;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) plane.points.push_back({double(i), double(j), 1.5});
  auto grid = RenderPointCloud(plane, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const auto v = grid.at(x, y)[0];
      Require(v == 0 || v == 255, "planar grid pixel is not 255");
    }

  ChartSpec flat;
  flat.canvas_width = 256;
  flat.canvas_height = 128;
  TimeSeries constant;
  for (int t = 0; t <= 10; ++t) constant.samples.push_back({double(t), 3.0});
  const int center = flat.margin + (flat.plot_height() - 1) / 2;
  for (const auto& p : MapSeriesToPixels(constant, flat)) Require(p.y == center, "constant series not centered");

  ChartSpec square;
  square.canvas_width = square.canvas_height = 120;
  square.margin = 10;
  auto diag = MapSeriesToPixels({{{0, 0}, {1, 1}}, "", ""}, square);
  Require(diag[0] == PixelPos{10, 109} && diag[1] == PixelPos{109, 10}, "diagonal endpoints wrong");
  auto diag_img = RenderTimeSeries({{{0, 0}, {1, 1}}, "", ""}, square);
  for (int k = 0; k < 100; ++k) Require(diag_img.at(10 + k, 109 - k)[0] == 0, "diagonal not rasterized");

  ChartSpec def;
  TimeSeries ramp;
  for (int i = 0; i < 100; ++i) ramp.samples.push_back({double(i), double(i)});
  auto rp = MapSeriesToPixels(ramp, def);
  Require(rp.front() == PixelPos{def.margin, def.margin + def.plot_height() - 1} &&
              rp.back() == PixelPos{def.margin + def.plot_width() - 1, def.margin},
          "ramp endpoints wrong");

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-10, 10);
  for (int i = 0; i < 100; ++i) {
    PointCloud c;
    const int n = 1 + static_cast<int>(rng() % 200);
    for (int k = 0; k < n; ++k) c.points.push_back({coord(rng), coord(rng), coord(rng)});
    const auto base = RenderPointCloud(c, 64);
    auto shifted = c;
    for (auto& p : shifted.points) p.z += 64.0;
    auto permuted = c;
    std::shuffle(permuted.points.begin(), permuted.points.end(), rng);
    Require(RenderPointCloud(shifted, 64).SamePixels(base), "z shift changed cloud " + std::to_string(i));
    Require(RenderPointCloud(permuted, 64).SamePixels(base), "permutation changed cloud " + std::to_string(i));
  }
  return "point cloud and chart examples bit-exact; 100 random clouds invariant";
}

// ---- 4 ----
std::string PromptSnapshots() {
  std::vector<PromptBundle> bundles;
  for (auto s : kAllStrategies) {
    const auto path = testing::GoldenPath(s);
    Require(fs::exists(path), "missing golden " + path.string());
    bundles.push_back(testing::SnapshotBundle(s));
    Require(ReadFile(path) == SerializeBundle(bundles.back()),
            "bundle differs from " + path.filename().string());
  }
  for (std::size_t k = 1; k < bundles.size(); ++k) {
    const auto& lo = bundles[k - 1].segments;
    std::size_t j = 0;
    for (const auto& seg : bundles[k].segments) {
      if (j < lo.size() && seg.role == lo[j].role && seg.text == lo[j].text &&
          seg.is_image() == lo[j].is_image() &&
          (!seg.is_image() || seg.image->SamePixels(*lo[j].image))) {
        ++j;
      }
    }
    Require(j == lo.size(), "level " + std::to_string(k) + " does not extend level " + std::to_string(k - 1));
  }
  return "4 golden files match; every level extends the previous one";
}

// ---- 5 ----
std::string ParserCorpus() {
  int total = 0, garbage = 0;
  for (const auto& line : SplitLines(ReadFile(testing::TestDataDir() / "parser_corpus.jsonl"))) {
    if (Trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    const std::string text = j["text"];
    ++total;
    if (j["label"].is_null()) {
      ++garbage;
      bool unparseable = false;
      try {
        ParseResponse(text);
      } catch (const Error& e) {
        unparseable = e.code() == ErrorCode::kUnparseable;
      }
      Require(unparseable, "garbage entry parsed: " + text);
      continue;
    }
    Require(ParseResponse(text).label == j["label"].get<int>(), "wrong label for: " + text);
  }
  Require(total >= 30, "corpus has only " + std::to_string(total) + " entries");
  for (const auto& p : ParserConfig{}.negative_phrases) {
    Require(ParseResponse(p).label == 0, "negative phrase read as positive: " + p);
  }
  return std::to_string(total) + " entries (" + std::to_string(garbage) +
         " garbage), 0 incorrect; negation safety holds";
}

// ---- 6 ----
std::string MockEndToEnd() {
  const auto start = std::chrono::steady_clock::now();
  testing::TempDir dir;
  testing::MakeMockDataset(dir.path() / "data");
  auto cfg = testing::MockRunConfig(dir.path() / "data", testing::WriteWidgetRules(dir.path()));
  std::vector<std::map<std::string, std::string>> outputs;
  double acc = -1;
  for (int workers : {1, 1, 8}) {
    cfg.workers = workers;
    auto r = RunBenchmark(cfg);
    acc = BuildReports(r)[0].rows[0].acc.value();
    Require(acc == 0.75, "ACC is " + std::to_string(acc));
    outputs.push_back(ReadDir(EmitReport(r, dir.path() / ("out" + std::to_string(outputs.size())))));
  }
  Require(outputs[0] == outputs[1], "two runs differ");
  Require(outputs[0] == outputs[2], "1 vs 8 workers differ");
  const double secs = Seconds(start);
  Require(secs < 5.0, "took " + std::to_string(secs) + " s");
  return "ACC 0.75, identical output for workers {1, 8}, " + FormatFixed(secs, 3) + " s";
}

// ---- 7, 8 ----
// Expected from the fixture's hand-written responses, see harness_test.
constexpr double kReplayAcc = 25.0 / 30.0;
constexpr double kReplayAuroc = 0.825;
constexpr double kReplayAupr = 327.0 / 380.0;

RunConfig ReplayConfig() {
  return LoadRunConfig(testing::TestDataDir() / "replay_bottle" / "config.json");
}

std::string ReplayRegression() {
  auto cfg = ReplayConfig();
  auto r = RunBenchmark(cfg);
  Require(r.coverage.attempted - r.coverage.unparseable >= 30, "fixture covers fewer than 30 samples");
  const auto reports = BuildReports(r);
  const auto* row = reports[0].Find("bottle");
  Require(row != nullptr, "no bottle row");
  Require(std::abs(row->acc.value() - kReplayAcc) < 1e-12, "ACC " + row->acc.Render(6));
  Require(std::abs(row->auroc.value() - kReplayAuroc) < 1e-12, "AUROC " + row->auroc.Render(6));
  Require(std::abs(row->aupr.value() - kReplayAupr) < 1e-12, "AUPR " + row->aupr.Render(6));

  testing::TempDir dir;
  std::string rules = ReadFile(cfg.rules_path);
  const auto at = rules.find("evenly colored");
  Require(at != std::string::npos, "rule sentence not found");
  rules[at] = 'E';
  cfg.rules_path = dir.path() / "rules.json";
  WriteFile(cfg.rules_path, rules);
  auto mutated = RunBenchmark(cfg);
  const auto& codes = mutated.coverage.failures_by_code;
  Require(mutated.records.empty() && codes.count("FIXTURE_MISS") &&
              codes.at("FIXTURE_MISS") == mutated.coverage.attempted,
          "mutated rules did not miss the fixture");
  return "ACC/AUROC/AUPR = " + row->acc.Render(6) + "/" + row->auroc.Render(6) + "/" +
         row->aupr.Render(6) + " as hand-computed; mutated rule -> FIXTURE_MISS";
}

std::string WarmCache() {
  testing::TempDir dir;
  auto cfg = ReplayConfig();
  cfg.cache_path = dir.path() / "cache.jsonl";
  auto cold_backend = MakeBackend(cfg.backend);
  auto cold = RunBenchmark(cfg, cold_backend);
  auto cold_files = ReadDir(EmitReport(cold, dir.path() / "cold"));
  auto warm_backend = MakeBackend(cfg.backend);
  auto warm = RunBenchmark(cfg, warm_backend);
  auto warm_files = ReadDir(EmitReport(warm, dir.path() / "warm"));
  Require(cold_backend->invocations() == cold.coverage.attempted, "cold run did not reach the backend");
  Require(warm_backend->invocations() == 0,
          "warm run made " + std::to_string(warm_backend->invocations()) + " backend calls");
  cold_files.erase("records.jsonl");  // cached flag and latency legitimately differ
  warm_files.erase("records.jsonl");
  Require(cold_files == warm_files, "warm report differs");
  return "cold " + std::to_string(cold_backend->invocations()) +
         " calls, warm 0 calls, reports byte-identical";
}

// ---- 9 ----
std::string ScanDeterminism() {
  testing::TempDir dir;
  for (const char* cat : {"screw", "bottle", "pill"}) {
    for (const char* f : {"2.png", "10.png", "001.png"}) {
      testing::WritePng(dir.path() / cat / "test/good" / f, Gray(4, 4, 1));
      testing::WritePng(dir.path() / cat / "test/crack" / f, Gray(4, 4, 2));
    }
    testing::WritePng(dir.path() / cat / "train/good/2.png", Gray(4, 4, 3));
    testing::WritePng(dir.path() / cat / "train/good/10.png", Gray(4, 4, 3));
  }
  auto a = ScanLayout(dir.path());
  auto b = ScanLayout(dir.path());
  Require(a == b && ManifestToJson(a).dump() == ManifestToJson(b).dump(), "rescan differs");
  for (const auto& c : a.categories) {
    Require(fs::path(SelectReference(c)).filename() == "10.png", "reference is not 10.png in " + c.name);
  }
  return "identical manifests; reference = 10.png";
}

// ---- 10 ----
std::string LiveSmoke() {
  const char* path = std::getenv("VLMAD_LIVE_CONFIG");
  if (!path || !*path) throw Skip{"VLMAD_LIVE_CONFIG not set"};
  auto cfg = LoadRunConfig(path);
  const char* key = std::getenv(cfg.backend.api_key_env.c_str());
  if (!key || !*key) throw Skip{cfg.backend.api_key_env + " not set"};

  auto manifest = ScanLayout(cfg.dataset_root);
  const auto& cat = manifest.categories.front();
  RulesBook rules = RulesBook::Load(cfg.rules_path.empty() ? DefaultRulesPath() : cfg.rules_path);
  auto reference = PreprocessSample(SelectReference(cat), Modality::kRgbImage, cfg.preprocess);
  LiveBackend live(cfg.backend);
  int parsed = 0, attempted = 0;
  for (const auto& q : ToQuerySamples(cat)) {
    if (attempted == 5) break;
    ++attempted;
    PromptInputs in;
    in.class_token = cat.name;
    if (const auto* r = rules.Find(cat.name)) in.rules = *r;
    in.reference = reference;
    auto bundle = BuildPrompt({StrategyLevel::kNormalityCase},
                              PreprocessSample(q.source, q.modality, cfg.preprocess), in);
    try {
      if (TryParseResponse(live.Query(bundle).text, cfg.parser)) ++parsed;
    } catch (const Error& e) {
      std::cerr << "  live request failed: " << e.what() << "\n";
    }
  }
  const auto peak = MaxInWindow(live.limiter().Log(), std::chrono::seconds(60));
  Require(parsed >= 4, std::to_string(parsed) + "/" + std::to_string(attempted) + " parseable");
  Require(peak <= static_cast<std::size_t>(cfg.backend.rate_limit), "rate limit exceeded");
  return std::to_string(parsed) + "/" + std::to_string(attempted) + " parseable, peak " +
         std::to_string(peak) + " requests per 60 s";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<std::string()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "metrics oracle equivalence", MetricsOracle},
      {2, "metric identities", MetricIdentities},
      {3, "renderer geometry", RendererGeometry},
      {4, "prompt snapshots", PromptSnapshots},
      {5, "parser corpus", ParserCorpus},
      {6, "end-to-end mock run", MockEndToEnd},
      {7, "replay regression", ReplayRegression},
      {8, "warm cache", WarmCache},
      {9, "dataset scan determinism", ScanDeterminism},
      {10, "live smoke", LiveSmoke},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    std::string status, detail;
    try {
      detail = c.check();
      status = "PASS";
    } catch (const Skip& s) {
      status = "SKIP";
      detail = s.why;
    } catch (const Failure& f) {
      status = "FAIL";
      detail = f.what;
    } catch (const std::exception& e) {
      status = "FAIL";
      detail = std::string("exception: ") + e.what();
    }
    if (status == "FAIL") ++failures;
    std::cout << status << " " << c.id << " " << c.name << ": " << detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
