#include "vlmad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <set>
#include <thread>

#include "vlmad/error.hpp"
#include "vlmad/io.hpp"

namespace fs = std::filesystem;

namespace vlmad {
namespace {

fs::path Resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

Rgb ParseRgb(const nlohmann::json& j) {
  auto v = j.get<std::vector<int>>();
  if (v.size() != 3) throw Error(ErrorCode::kConfigInvalid, "colors are [r, g, b]");
  Rgb out{};
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255) {
      throw Error(ErrorCode::kConfigInvalid, "color channel out of range");
    }
    out[i] = static_cast<std::uint8_t>(v[i]);
  }
  return out;
}

void CheckKeys(const nlohmann::json& j, std::initializer_list<const char*> known,
               const std::string& where) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kConfigInvalid, where + " must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return key == k; })) {
      throw Error(ErrorCode::kConfigInvalid,
                  where + ": unknown field '" + key + "'");
    }
  }
}

// Runs fn(i) for i in [0, n) on `workers` threads.
void ParallelFor(std::size_t n, int workers,
                 const std::function<void(std::size_t)>& fn) {
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::string ErrorLabel(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(ErrorCodeName(err->code()));
  }
  return "INTERNAL";
}

struct Loaded {
  std::optional<CanonicalImage> image;
  std::string error_code;
  std::string error;
};

Loaded LoadOne(const fs::path& path, Modality modality,
               const PreprocessParams& params) {
  Loaded out;
  try {
    out.image = PreprocessSample(path, modality, params);
  } catch (const std::exception& e) {
    out.error_code = ErrorLabel(e);
    out.error = e.what();
  }
  return out;
}

enum class Outcome { kRecord, kUnparseable, kFailed };

struct TaskResult {
  Outcome outcome = Outcome::kFailed;
  EvalRecord record;
  std::string error_code;
  std::string message;
};

std::string Humanize(std::string name) {
  std::replace(name.begin(), name.end(), '_', ' ');
  return name;
}

}  // namespace

fs::path DefaultRulesPath() {
  return fs::path(VLMAD_ASSET_DIR) / "rules" / "mvtec_ad.json";
}

void Validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfigInvalid, msg);
  };
  if (c.dataset_root.empty()) fail("dataset_root must be set");
  if (c.strategies.empty()) fail("strategies must be non-empty");
  std::set<PromptStrategy> unique(c.strategies.begin(), c.strategies.end());
  if (unique.size() != c.strategies.size()) fail("strategies must be distinct");
  if (c.workers < 1) fail("workers must be >= 1");
  if (c.repeats < 1) fail("repeats must be >= 1");
  if (c.sample_limit && *c.sample_limit == 0) fail("sample_limit must be >= 1");
  if (c.preprocess.max_dim < 64) fail("preprocess.max_dim must be >= 64");
  if (c.preprocess.point_cloud_resolution < 16) {
    fail("preprocess.point_cloud_resolution must be >= 16");
  }
  if (c.preprocess.video_columns < 1) fail("preprocess.video_columns must be >= 1");
  try {
    Validate(c.preprocess.chart);
  } catch (const Error& e) {
    fail(std::string("preprocess.chart: ") + e.what());
  }
  Validate(c.backend);
}

RunConfig ParseRunConfig(const nlohmann::json& j, const fs::path& base_dir) {
  try {
    CheckKeys(j,
              {"dataset_root", "categories", "strategies", "backend", "rules_path",
               "template_path", "preprocess", "workers", "cache_path",
               "output_dir", "sample_limit", "repeats", "strict_prompts", "parser"},
              "config");
    RunConfig c;
    c.dataset_root = Resolve(base_dir, j.at("dataset_root").get<std::string>());
    c.categories = j.value("categories", std::vector<std::string>{});
    if (j.contains("strategies")) {
      c.strategies.clear();
      for (const auto& s : j["strategies"]) {
        c.strategies.push_back(ParseStrategy(s.get<std::string>()));
      }
    }
    if (j.contains("backend")) {
      c.backend = j["backend"].get<BackendConfig>();
      if (!c.backend.fixture_path.empty()) {
        c.backend.fixture_path = Resolve(base_dir, c.backend.fixture_path).string();
      }
    }
    c.rules_path = Resolve(base_dir, j.value("rules_path", ""));
    c.template_path = Resolve(base_dir, j.value("template_path", ""));
    if (j.contains("preprocess")) {
      const auto& p = j["preprocess"];
      CheckKeys(p, {"max_dim", "point_cloud_resolution", "video_columns", "chart"},
                "preprocess");
      c.preprocess.max_dim = p.value("max_dim", c.preprocess.max_dim);
      c.preprocess.point_cloud_resolution =
          p.value("point_cloud_resolution", c.preprocess.point_cloud_resolution);
      c.preprocess.video_columns = p.value("video_columns", c.preprocess.video_columns);
      if (p.contains("chart")) {
        const auto& ch = p["chart"];
        CheckKeys(ch, {"canvas_width", "canvas_height", "margin", "line_color",
                       "background_color", "axis_color"},
                  "preprocess.chart");
        auto& spec = c.preprocess.chart;
        spec.canvas_width = ch.value("canvas_width", spec.canvas_width);
        spec.canvas_height = ch.value("canvas_height", spec.canvas_height);
        spec.margin = ch.value("margin", spec.margin);
        if (ch.contains("line_color")) spec.line_color = ParseRgb(ch["line_color"]);
        if (ch.contains("background_color")) {
          spec.background_color = ParseRgb(ch["background_color"]);
        }
        if (ch.contains("axis_color")) spec.axis_color = ParseRgb(ch["axis_color"]);
      }
    }
    c.workers = j.value("workers", c.workers);
    c.cache_path = Resolve(base_dir, j.value("cache_path", ""));
    c.output_dir = Resolve(base_dir, j.value("output_dir", ""));
    if (j.contains("sample_limit") && !j["sample_limit"].is_null()) {
      c.sample_limit = j["sample_limit"].get<std::size_t>();
    }
    c.repeats = j.value("repeats", c.repeats);
    c.strict_prompts = j.value("strict_prompts", c.strict_prompts);
    if (j.contains("parser")) c.parser = j["parser"].get<ParserConfig>();
    Validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigInvalid) throw;
    throw Error(ErrorCode::kConfigInvalid, e.what());
  }
}

RunConfig LoadRunConfig(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid,
                path.string() + " is not valid JSON: " + e.what());
  }
  return ParseRunConfig(j, fs::absolute(path).parent_path());
}

nlohmann::json RunConfigToJson(const RunConfig& c) {
  nlohmann::json strategies = nlohmann::json::array();
  for (auto s : c.strategies) strategies.push_back(DescribeStrategy(s));
  const auto& ch = c.preprocess.chart;
  nlohmann::json j{
      {"dataset_root", c.dataset_root.string()},
      {"categories", c.categories},
      {"strategies", strategies},
      {"backend", c.backend},
      {"rules_path", c.rules_path.string()},
      {"template_path", c.template_path.string()},
      {"preprocess",
       {{"max_dim", c.preprocess.max_dim},
        {"point_cloud_resolution", c.preprocess.point_cloud_resolution},
        {"video_columns", c.preprocess.video_columns},
        {"chart",
         {{"canvas_width", ch.canvas_width},
          {"canvas_height", ch.canvas_height},
          {"margin", ch.margin},
          {"line_color", ch.line_color},
          {"background_color", ch.background_color},
          {"axis_color", ch.axis_color}}}}},
      {"workers", c.workers},
      {"cache_path", c.cache_path.string()},
      {"output_dir", c.output_dir.string()},
      {"repeats", c.repeats},
      {"strict_prompts", c.strict_prompts},
      {"parser", c.parser}};
  j["sample_limit"] = c.sample_limit ? nlohmann::json(*c.sample_limit)
                                     : nlohmann::json(nullptr);
  return j;
}

CanonicalImage PreprocessSample(const fs::path& source, Modality modality,
                                const PreprocessParams& params) {
  auto as_bytes = [](const std::string& s) {
    return std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  };
  switch (modality) {
    case Modality::kRgbImage: {
      const std::string bytes = ReadFile(source);
      return CanonicalizeImage(as_bytes(bytes), params.max_dim);
    }
    case Modality::kPointCloud:
      return RenderPointCloud(LoadPointCloud(source), params.point_cloud_resolution);
    case Modality::kTimeSeries:
      return RenderTimeSeries(LoadSeriesCsv(source), params.chart);
    case Modality::kVideoFrames: {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(source)) {
        const auto name = e.path().filename().string();
        if (!name.empty() && name[0] != '.' && e.is_regular_file() &&
            IsRasterExtension(e.path())) {
          files.push_back(e.path());
        }
      }
      std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
      });
      std::vector<CanonicalImage> frames;
      for (const auto& f : files) {
        const std::string bytes = ReadFile(f);
        frames.push_back(CanonicalizeImage(as_bytes(bytes), params.max_dim));
      }
      return TileVideoFrames(frames, params.video_columns);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown modality");
}

void to_json(nlohmann::json& j, const Coverage& c) {
  j = nlohmann::json{{"attempted", c.attempted},
                     {"succeeded", c.succeeded},
                     {"unparseable", c.unparseable},
                     {"failed", c.failed},
                     {"failures_by_code", c.failures_by_code}};
}

void from_json(const nlohmann::json& j, Coverage& c) {
  c.attempted = j.at("attempted").get<std::size_t>();
  c.succeeded = j.at("succeeded").get<std::size_t>();
  c.unparseable = j.at("unparseable").get<std::size_t>();
  c.failed = j.at("failed").get<std::size_t>();
  c.failures_by_code =
      j.value("failures_by_code", std::map<std::string, std::size_t>{});
}

RunResult RunBenchmark(const RunConfig& config, std::shared_ptr<Backend> backend) {
  Validate(config);

  const RulesBook rules = RulesBook::Load(
      config.rules_path.empty() ? DefaultRulesPath() : config.rules_path);
  const PromptTemplate tmpl = config.template_path.empty()
                                  ? PromptTemplate::Default()
                                  : PromptTemplate::Load(config.template_path);

  RunResult result;
  try {
    result.manifest = ScanLayout(config.dataset_root, {config.sample_limit});
  } catch (const Error& e) {
    throw Error(ErrorCode::kDatasetError, e.what());
  }

  std::vector<const CategoryEntry*> categories;
  if (config.categories.empty()) {
    for (const auto& c : result.manifest.categories) categories.push_back(&c);
  } else {
    std::set<std::string> wanted(config.categories.begin(), config.categories.end());
    for (const auto& name : wanted) {
      const CategoryEntry* c = result.manifest.Find(name);
      if (!c) {
        throw Error(ErrorCode::kConfigInvalid,
                    "category '" + name + "' is not in the dataset");
      }
      categories.push_back(c);
    }
  }

  std::vector<PromptStrategy> strategies = config.strategies;
  std::sort(strategies.begin(), strategies.end());
  result.strategies = strategies;
  const bool any_rules = std::any_of(strategies.begin(), strategies.end(),
                                     [](auto s) { return s.use_rules(); });
  const bool any_reference = std::any_of(strategies.begin(), strategies.end(),
                                         [](auto s) { return s.use_reference(); });
  if (any_rules) {
    for (const CategoryEntry* c : categories) {
      if (!rules.Find(c->name)) {
        throw Error(ErrorCode::kConfigInvalid,
                    "no normality rules for category '" + c->name + "'");
      }
    }
  }

  if (!backend) backend = MakeBackend(config.backend);
  const auto& bc = backend->config();
  if (bc.adapter == AdapterKind::kOpenAiChat || bc.adapter == AdapterKind::kGemini) {
    const char* key = std::getenv(bc.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::kAuthMissing,
                  "environment variable '" + bc.api_key_env + "' is not set");
    }
  }
  auto store = config.cache_path.empty()
                   ? std::make_shared<FixtureStore>()
                   : std::make_shared<FixtureStore>(config.cache_path);
  CachingBackend cached(backend, store);
  const std::uint64_t calls_before = backend->invocations();

  // Preprocess every query once; strategies share the images.
  struct Job {
    const CategoryEntry* category;
    QuerySample sample;
  };
  std::vector<Job> jobs;
  for (const CategoryEntry* c : categories) {
    for (auto& q : ToQuerySamples(*c)) jobs.push_back({c, std::move(q)});
  }
  std::vector<Loaded> queries(jobs.size());
  ParallelFor(jobs.size(), config.workers, [&](std::size_t i) {
    queries[i] = LoadOne(jobs[i].sample.source, jobs[i].sample.modality,
                         config.preprocess);
  });
  std::map<std::string, Loaded> references;
  if (any_reference) {
    for (const CategoryEntry* c : categories) {
      const std::string& ref = SelectReference(*c);
      references.emplace(c->name,
                         LoadOne(ref, InferModality(ref).value_or(Modality::kRgbImage),
                                 config.preprocess));
    }
  }

  const std::size_t n_tasks = jobs.size() * strategies.size();
  std::vector<TaskResult> outcomes(n_tasks);
  ParallelFor(n_tasks, config.workers, [&](std::size_t t) {
    const Job& job = jobs[t / strategies.size()];
    const Loaded& query = queries[t / strategies.size()];
    const PromptStrategy strategy = strategies[t % strategies.size()];
    TaskResult& out = outcomes[t];
    out.record.sample_id = job.sample.id;
    out.record.category = job.category->name;
    out.record.strategy_id = std::string(DescribeStrategy(strategy));
    out.record.backend_id = bc.backend_id;
    out.record.ground_truth = *job.sample.ground_truth;
    try {
      if (!query.image) {
        out.error_code = query.error_code;
        out.message = query.error;
        return;
      }
      PromptInputs inputs;
      if (strategy.use_class()) inputs.class_token = Humanize(job.category->name);
      if (strategy.use_rules()) inputs.rules = *rules.Find(job.category->name);
      if (strategy.use_reference()) {
        const Loaded& ref = references.at(job.category->name);
        if (!ref.image) {
          out.error_code = ref.error_code;
          out.message = "reference: " + ref.error;
          return;
        }
        inputs.reference = *ref.image;
      }
      const PromptBundle bundle = BuildPrompt(strategy, *query.image, std::move(inputs),
                                              tmpl, config.strict_prompts);

      std::optional<DetectionResult> first;
      int positives = 0;
      int parsed = 0;
      double latency = 0.0;
      bool all_cached = true;
      for (int r = 0; r < config.repeats; ++r) {
        BackendResponse resp = cached.Query(bundle, r);
        all_cached = all_cached && resp.cached;
        latency += resp.cached ? 0.0 : resp.latency_ms;
        auto det = TryParseResponse(resp.text, config.parser);
        if (!det) {
          if (!first) out.message = resp.text;
          continue;
        }
        ++parsed;
        positives += det->label;
        if (!first) first = std::move(det);
      }
      if (!first) {
        out.outcome = Outcome::kUnparseable;
        out.error_code = "UNPARSEABLE";
        out.message = "unparseable response: " + out.message.substr(0, 200);
        return;
      }
      DetectionResult prediction = std::move(*first);
      if (config.repeats > 1) {
        prediction.score = static_cast<double>(positives) / parsed;
        prediction.label = prediction.score >= 0.5 ? 1 : 0;
      }
      out.record.prediction = std::move(prediction);
      out.record.cached = all_cached;
      out.record.latency_ms = all_cached ? 0.0 : latency;
      Validate(out.record);
      out.outcome = Outcome::kRecord;
    } catch (const std::exception& e) {
      out.outcome = Outcome::kFailed;
      out.error_code = ErrorLabel(e);
      out.message = e.what();
    }
  });

  for (const auto& o : outcomes) {
    ++result.coverage.attempted;
    switch (o.outcome) {
      case Outcome::kRecord:
        ++result.coverage.succeeded;
        result.records.push_back(o.record);
        break;
      case Outcome::kUnparseable:
        ++result.coverage.unparseable;
        ++result.unparseable[o.record.strategy_id][o.record.category];
        result.failure_log.push_back(o.record.sample_id + "|" +
                                     o.record.strategy_id + ": " + o.message);
        break;
      case Outcome::kFailed:
        ++result.coverage.failed;
        ++result.coverage.failures_by_code[o.error_code];
        result.failure_log.push_back(o.record.sample_id + "|" +
                                     o.record.strategy_id + ": " + o.message);
        break;
    }
  }
  for (const auto& line : result.failure_log) LogInfo(line);

  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) {
                     auto la = ParseStrategy(a.strategy_id).level;
                     auto lb = ParseStrategy(b.strategy_id).level;
                     if (la != lb) return la < lb;
                     if (a.category != b.category) return a.category < b.category;
                     return a.sample_id < b.sample_id;
                   });
  result.backend_calls = backend->invocations() - calls_before;
  LogInfo("run finished: " + std::to_string(result.coverage.succeeded) + "/" +
          std::to_string(result.coverage.attempted) + " records, " +
          std::to_string(result.coverage.unparseable) + " unparseable, " +
          std::to_string(result.coverage.failed) + " failed, " +
          std::to_string(result.backend_calls) + " backend calls");
  return result;
}

std::vector<MetricsReport> BuildReports(
    const std::vector<EvalRecord>& records,
    const std::map<std::string, std::map<std::string, std::size_t>>& unparseable) {
  std::map<StrategyLevel, std::vector<EvalRecord>> by_strategy;
  for (const auto& r : records) {
    by_strategy[ParseStrategy(r.strategy_id).level].push_back(r);
  }
  for (const auto& [sid, _] : unparseable) by_strategy[ParseStrategy(sid).level];
  std::vector<MetricsReport> reports;
  for (auto& [level, recs] : by_strategy) {
    const std::string sid(DescribeStrategy({level}));
    std::sort(recs.begin(), recs.end(), [](const EvalRecord& a, const EvalRecord& b) {
      return std::tie(a.category, a.sample_id) < std::tie(b.category, b.sample_id);
    });
    auto it = unparseable.find(sid);
    MetricsReport rep = PerCategoryReport(
        recs, it == unparseable.end() ? std::map<std::string, std::size_t>{} : it->second);
    rep.strategy_id = sid;
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::vector<MetricsReport> BuildReports(const RunResult& result) {
  auto reports = BuildReports(result.records, result.unparseable);
  if (!result.records.empty()) {
    for (auto& r : reports) {
      if (r.backend_id.empty()) r.backend_id = result.records.front().backend_id;
    }
  }
  return reports;
}

AblationMatrix BuildAblation(std::span<const MetricsReport> reports) {
  AblationMatrix m;
  std::set<std::string> cats;
  for (const auto& r : reports) {
    m.strategies.push_back(r.strategy_id);
    for (const auto& row : r.rows) cats.insert(row.category);
  }
  m.categories.assign(cats.begin(), cats.end());
  for (const auto& cat : m.categories) {
    std::vector<MetricValue> row;
    for (const auto& r : reports) {
      const CategoryRow* cr = r.Find(cat);
      row.push_back(cr ? cr->acc : MetricValue::Undefined());
    }
    m.acc.push_back(std::move(row));
  }
  return m;
}

std::string AblationToCsv(const AblationMatrix& m) {
  std::string out = "category";
  for (const auto& s : m.strategies) out += "," + s;
  out += "\n";
  for (std::size_t i = 0; i < m.categories.size(); ++i) {
    out += m.categories[i];
    for (const auto& v : m.acc[i]) out += "," + v.Render(6);
    out += "\n";
  }
  return out;
}

AblationResult RunAblation(const RunConfig& config, std::shared_ptr<Backend> backend) {
  if (config.strategies.size() < 2) {
    throw Error(ErrorCode::kConfigInvalid, "ablation needs at least two strategies");
  }
  AblationResult out;
  out.run = RunBenchmark(config, std::move(backend));
  const auto reports = BuildReports(out.run);
  out.matrix = BuildAblation(reports);
  return out;
}

namespace {

std::vector<fs::path> WriteReports(
    const std::vector<EvalRecord>& records, const Coverage& coverage,
    const std::map<std::string, std::map<std::string, std::size_t>>& unparseable,
    const std::vector<MetricsReport>& reports, const fs::path& dir,
    const std::vector<ReportFormat>& formats) {
  std::vector<fs::path> written;
  auto write = [&](const fs::path& p, const std::string& content) {
    WriteFile(p, content);
    written.push_back(p);
  };
  write(dir / "records.jsonl", SerializeRecordLog(records));
  nlohmann::json cov{{"coverage", coverage}, {"unparseable", unparseable}};
  write(dir / "coverage.json", cov.dump(2) + "\n");
  const bool csv = std::find(formats.begin(), formats.end(), ReportFormat::kCsv) !=
                   formats.end();
  const bool md = std::find(formats.begin(), formats.end(),
                            ReportFormat::kMarkdown) != formats.end();
  for (const auto& r : reports) {
    if (csv) write(dir / ("report_" + r.strategy_id + ".csv"), ReportToCsv(r));
    if (md) {
      write(dir / ("report_" + r.strategy_id + ".md"),
            ReportsToMarkdown(std::span<const MetricsReport>(&r, 1)));
    }
  }
  if (md && !reports.empty()) write(dir / "report.md", ReportsToMarkdown(reports));
  if (reports.size() >= 2) {
    write(dir / "ablation.csv", AblationToCsv(BuildAblation(reports)));
  }
  return written;
}

}  // namespace

std::vector<fs::path> EmitReport(const RunResult& result, const fs::path& dir,
                                 const std::vector<ReportFormat>& formats) {
  if (result.records.empty() && result.unparseable.empty()) {
    throw Error(ErrorCode::kEmpty, "run produced no records to report");
  }
  return WriteReports(result.records, result.coverage, result.unparseable,
                      BuildReports(result), dir, formats);
}

std::vector<fs::path> EmitReportFromDirectory(const fs::path& dir,
                                              const std::vector<ReportFormat>& formats) {
  auto records = ParseRecordLog(ReadFile(dir / "records.jsonl"));
  Coverage coverage;
  std::map<std::string, std::map<std::string, std::size_t>> unparseable;
  if (fs::exists(dir / "coverage.json")) {
    auto j = nlohmann::json::parse(ReadFile(dir / "coverage.json"));
    coverage = j.at("coverage").get<Coverage>();
    unparseable = j.at("unparseable")
                      .get<std::map<std::string, std::map<std::string, std::size_t>>>();
  }
  if (records.empty() && unparseable.empty()) {
    throw Error(ErrorCode::kEmpty, "no records in " + (dir / "records.jsonl").string());
  }
  auto reports = BuildReports(records, unparseable);
  if (!records.empty()) {
    for (auto& r : reports) {
      if (r.backend_id.empty()) r.backend_id = records.front().backend_id;
    }
  }
  return WriteReports(records, coverage, unparseable, reports, dir, formats);
}

}  // namespace vlmad
