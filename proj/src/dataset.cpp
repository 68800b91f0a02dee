#include "vlmad/dataset.hpp"

#include <algorithm>

#include "vlmad/error.hpp"
#include "vlmad/io.hpp"

namespace fs = std::filesystem;

namespace vlmad {
namespace {

bool Hidden(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.empty() || name[0] == '.';
}

std::vector<fs::path> SortedChildren(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!Hidden(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

bool IsVideoDir(const fs::path& p) {
  if (!fs::is_directory(p)) return false;
  for (const auto& child : SortedChildren(p)) {
    if (fs::is_regular_file(child) && IsRasterExtension(child)) return true;
  }
  return false;
}

// Sample entries of one folder in byte-wise order.
std::vector<fs::path> SampleEntries(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& p : SortedChildren(dir)) {
    if (InferModality(p)) out.push_back(p);
  }
  return out;
}

}  // namespace

bool IsRasterExtension(const fs::path& path) {
  const std::string ext = ToLower(path.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" ||
         ext == ".pgm" || ext == ".pnm";
}

std::optional<Modality> InferModality(const fs::path& path) {
  if (Hidden(path)) return std::nullopt;
  if (fs::is_directory(path)) {
    return IsVideoDir(path) ? std::optional(Modality::kVideoFrames) : std::nullopt;
  }
  if (!fs::is_regular_file(path)) return std::nullopt;
  if (IsRasterExtension(path)) return Modality::kRgbImage;
  const std::string ext = ToLower(path.extension().string());
  if (ext == ".xyz" || ext == ".xyzbin") return Modality::kPointCloud;
  if (ext == ".csv") return Modality::kTimeSeries;
  return std::nullopt;
}

const CategoryEntry* DatasetManifest::Find(std::string_view name) const {
  for (const auto& c : categories) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

DatasetManifest ScanLayout(const fs::path& root, const ScanOptions& options) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kEmptyDataset,
                "dataset root is not a directory: " + root.string());
  }
  DatasetManifest manifest;
  manifest.root = root.string();
  for (const auto& dir : SortedChildren(root)) {
    if (!fs::is_directory(dir)) continue;
    if (!fs::is_directory(dir / "train") && !fs::is_directory(dir / "test")) continue;

    CategoryEntry entry;
    entry.name = dir.filename().string();
    for (const auto& p : SampleEntries(dir / "train" / "good")) {
      entry.train_normal.push_back(p.string());
    }
    if (entry.train_normal.empty()) {
      throw Error(ErrorCode::kCategoryMissingTrain,
                  "category '" + entry.name + "' has no train/good samples");
    }
    entry.reference = entry.train_normal.front();

    for (const auto& sub : SortedChildren(dir / "test")) {
      if (!fs::is_directory(sub)) continue;
      const std::string subname = sub.filename().string();
      const Label label = subname == "good" ? 0 : 1;
      auto files = SampleEntries(sub);
      if (options.sample_limit && files.size() > *options.sample_limit) {
        files.resize(*options.sample_limit);
      }
      for (const auto& f : files) {
        entry.test_samples.push_back({f.string(), label, subname});
      }
    }
    manifest.categories.push_back(std::move(entry));
  }
  if (manifest.categories.empty()) {
    throw Error(ErrorCode::kEmptyDataset,
                "no category directories under " + root.string());
  }
  return manifest;
}

const std::string& SelectReference(const CategoryEntry& entry) {
  return entry.train_normal.front();
}

std::vector<QuerySample> ToQuerySamples(const CategoryEntry& entry) {
  std::vector<QuerySample> out;
  out.reserve(entry.test_samples.size());
  for (const auto& t : entry.test_samples) {
    QuerySample q;
    const fs::path p(t.path);
    q.id = entry.name + "/" + t.subfolder + "/" + p.filename().string();
    q.modality = InferModality(p).value_or(Modality::kRgbImage);
    q.source = t.path;
    q.category = entry.name;
    q.ground_truth = t.label;
    out.push_back(std::move(q));
  }
  return out;
}

nlohmann::json ManifestToJson(const DatasetManifest& manifest) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : manifest.categories) {
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : c.test_samples) {
      tests.push_back({{"path", t.path}, {"label", t.label}, {"subfolder", t.subfolder}});
    }
    cats.push_back({{"name", c.name},
                    {"reference", c.reference},
                    {"train_normal", c.train_normal},
                    {"test_samples", std::move(tests)}});
  }
  return {{"root", manifest.root}, {"categories", std::move(cats)}};
}

DatasetManifest ManifestFromJson(const nlohmann::json& j) {
  DatasetManifest m;
  m.root = j.at("root").get<std::string>();
  for (const auto& jc : j.at("categories")) {
    CategoryEntry c;
    c.name = jc.at("name").get<std::string>();
    c.reference = jc.at("reference").get<std::string>();
    c.train_normal = jc.at("train_normal").get<std::vector<std::string>>();
    for (const auto& jt : jc.at("test_samples")) {
      c.test_samples.push_back({jt.at("path").get<std::string>(),
                                jt.at("label").get<int>(),
                                jt.at("subfolder").get<std::string>()});
    }
    m.categories.push_back(std::move(c));
  }
  return m;
}

}  // namespace vlmad
