#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vlmad/core_types.hpp"

namespace vlmad {

struct TestSample {
  std::string path;
  Label label = 0;
  std::string subfolder;  // "good" or a defect type

  bool operator==(const TestSample&) const = default;
};

struct CategoryEntry {
  std::string name;
  std::vector<std::string> train_normal;  // byte-wise sorted
  std::vector<TestSample> test_samples;
  std::string reference;  // train_normal[0]

  bool operator==(const CategoryEntry&) const = default;
};

struct DatasetManifest {
  std::string root;
  std::vector<CategoryEntry> categories;  // sorted by name

  const CategoryEntry* Find(std::string_view name) const;
  bool operator==(const DatasetManifest&) const = default;
};

struct ScanOptions {
  // Keep only the first k files of every test subfolder.
  std::optional<std::size_t> sample_limit;
};

// Walks an MVTec-AD style tree: <category>/train/good/* and
// <category>/test/<subfolder>/*. A directory counts as a category when it
// has a train/ or test/ child. test/good is label 0, every other test
// subfolder label 1. Files are ordered by byte-wise name comparison; hidden
// entries and unsupported extensions are skipped. A directory of raster
// frames inside a test subfolder is one video sample.
//
// Throws kEmptyDataset when no category is found and kCategoryMissingTrain
// when a category has no usable train/good entries.
DatasetManifest ScanLayout(const std::filesystem::path& root,
                           const ScanOptions& options = {});

// The first normal training image under byte-wise ordering.
const std::string& SelectReference(const CategoryEntry& entry);

// Modality from file extension (or directory -> VIDEO_FRAMES); nullopt when
// the entry is not a supported sample.
std::optional<Modality> InferModality(const std::filesystem::path& path);

bool IsRasterExtension(const std::filesystem::path& path);

// Query samples of one category, ids "<category>/<subfolder>/<file>".
std::vector<QuerySample> ToQuerySamples(const CategoryEntry& entry);

nlohmann::json ManifestToJson(const DatasetManifest& manifest);
DatasetManifest ManifestFromJson(const nlohmann::json& j);

}  // namespace vlmad
