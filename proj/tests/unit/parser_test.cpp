#include <random>

#include <gtest/gtest.h>

#include "testutil.hpp"
#include "vlmad/backend.hpp"
#include "vlmad/error.hpp"
#include "vlmad/io.hpp"
#include "vlmad/parser.hpp"

namespace vlmad {
namespace {

TEST(ParseResponse, CanonicalPositive) {
  auto r = ParseResponse("1, There appears to be a braided or twisted material on the bottle");
  EXPECT_EQ(r.label, 1);
  EXPECT_EQ(r.parse_path, ParsePath::kStructured);
  EXPECT_EQ(r.reasoning, "There appears to be a braided or twisted material on the bottle");
  EXPECT_EQ(r.score, 1.0);
}

TEST(ParseResponse, CanonicalNegative) {
  auto r = ParseResponse("0, the object matches the reference");
  EXPECT_EQ(r.label, 0);
  EXPECT_EQ(r.parse_path, ParsePath::kStructured);
  EXPECT_EQ(r.score, 0.0);
}

TEST(ParseResponse, KeywordOnlyNegative) {
  // No leading label and no standalone digit; "normal" and "no defects" are
  // negative phrases, and "defects" is consumed by the negation.
  auto r = ParseResponse("The image looks normal with no defects visible.");
  EXPECT_EQ(r.label, 0);
  EXPECT_EQ(r.parse_path, ParsePath::kFallbackKeyword);
}

TEST(ParseResponse, GarbageIsUnparseable) {
  for (const char* s : {"???", "", "  ", "hello world"}) {
    try {
      ParseResponse(s);
      ADD_FAILURE() << s;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnparseable);
    }
  }
}

TEST(ParseResponse, RawResponseIsKept) {
  const std::string raw = "  '1, dent'  ";
  EXPECT_EQ(ParseResponse(raw).raw_response, raw);
  EXPECT_EQ(ParseResponse(raw).reasoning, "dent");
}

struct CorpusEntry {
  std::string text;
  std::optional<int> label;
  std::optional<std::string> path;
};

std::vector<CorpusEntry> LoadCorpus() {
  std::vector<CorpusEntry> out;
  for (const auto& line : SplitLines(ReadFile(testing::TestDataDir() / "parser_corpus.jsonl"))) {
    if (Trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    CorpusEntry e;
    e.text = j["text"];
    if (!j["label"].is_null()) e.label = j["label"].get<int>();
    if (!j["path"].is_null()) e.path = j["path"].get<std::string>();
    out.push_back(e);
  }
  return out;
}

TEST(ParserCorpus, EveryEntryClassifiedCorrectly) {
  const auto corpus = LoadCorpus();
  ASSERT_GE(corpus.size(), 30u);
  int garbage = 0;
  for (const auto& e : corpus) {
    auto r = TryParseResponse(e.text);
    if (!e.label) {
      ++garbage;
      EXPECT_FALSE(r.has_value()) << e.text;
      EXPECT_THROW(ParseResponse(e.text), Error) << e.text;
      continue;
    }
    ASSERT_TRUE(r.has_value()) << e.text;
    EXPECT_EQ(r->label, *e.label) << e.text;
    EXPECT_EQ(ParsePathName(r->parse_path), *e.path) << e.text;
  }
  EXPECT_GE(garbage, 5);
}

TEST(ParseResponse, NegativePhrasesAreNeverPositive) {
  ParserConfig cfg;
  for (const auto& p : cfg.negative_phrases) {
    EXPECT_EQ(ParseResponse(p, cfg).label, 0) << p;
    EXPECT_EQ(ParseResponse("The sample shows " + p + ".", cfg).label, 0) << p;
    std::string upper = p;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    EXPECT_EQ(ParseResponse(upper, cfg).label, 0) << upper;
  }
}

TEST(ParseResponse, NegationWindowStaysInClause) {
  // The negator sits in a different clause, so the defect is asserted.
  EXPECT_EQ(ParseResponse("Not sure. There is a defect.").label, 1);
  // Too far away from the keyword.
  EXPECT_EQ(ParseResponse("not in my view would this one be a defect").label, 1);
  EXPECT_EQ(ParseResponse("there is not a defect").label, 0);
}

TEST(ParseResponse, CustomKeywordsFromConfig) {
  ParserConfig cfg = nlohmann::json{{"positive_keywords", {"damaged"}},
                                    {"negative_phrases", {"pristine"}}}
                         .get<ParserConfig>();
  EXPECT_EQ(ParseResponse("The rim is damaged.", cfg).label, 1);
  EXPECT_EQ(ParseResponse("Looks pristine.", cfg).label, 0);
  EXPECT_FALSE(TryParseResponse("Looks normal.", cfg).has_value());
}

TEST(ParseResponse, ReconstructedFormKeepsLabel) {
  std::mt19937_64 rng(17);
  const std::vector<std::string> reasons = {
      "", "no anomaly here", "defect, 0 issues", "1 2 3", "normal but anomalous",
      "\"quoted\"", "multi\nline", "(paren)", "abnormal: yes", "0"};
  for (const auto& raw : {"1, crack", "0, fine", "The surface is normal.",
                          "There is a defect.", "{\"anomaly\": 1}", "verdict 0"}) {
    auto r = ParseResponse(raw);
    for (const auto& reason : reasons) {
      const std::string rebuilt = std::to_string(r.label) + ", " + reason;
      EXPECT_EQ(ParseResponse(rebuilt).label, r.label) << rebuilt;
    }
  }
  std::uniform_int_distribution<int> ch(32, 126);
  for (int i = 0; i < 500; ++i) {
    std::string reason;
    for (int k = 0; k < 40; ++k) reason.push_back(static_cast<char>(ch(rng)));
    for (int label : {0, 1}) {
      const std::string rebuilt = std::to_string(label) + ", " + reason;
      EXPECT_EQ(ParseResponse(rebuilt).label, label) << rebuilt;
    }
  }
}

TEST(ParseResponse, MockOutputsAreStructured) {
  for (std::uint8_t q : {0, 50, 100, 128, 200, 255}) {
    auto text = MockOracle(testing::Gray(4, 4, 128), testing::Gray(4, 4, q), 10);
    EXPECT_EQ(ParseResponse(text).parse_path, ParsePath::kStructured) << text;
  }
  EXPECT_EQ(ParseResponse(std::string(kMockNoReference)).parse_path, ParsePath::kStructured);
}

TEST(ParseBatch, Examples) {
  auto a = ParseBatch({"1, x", "0, y"});
  EXPECT_EQ(a.results.size(), 2u);
  EXPECT_EQ(a.unparseable_count(), 0u);
  auto b = ParseBatch({"???"});
  EXPECT_EQ(b.results.size(), 0u);
  EXPECT_EQ(b.unparseable_count(), 1u);
}

TEST(ParseBatch, AgreesWithSingleCalls) {
  const auto corpus = LoadCorpus();
  std::vector<std::string> raws;
  for (std::size_t i = 0; i < 10; ++i) raws.push_back(corpus[(i * 7) % corpus.size()].text);
  raws.push_back("???");
  auto batch = ParseBatch(raws);
  std::size_t ok = 0, bad = 0;
  std::vector<DetectionResult> singles;
  for (const auto& r : raws) {
    if (auto p = TryParseResponse(r)) {
      ++ok;
      singles.push_back(*p);
    } else {
      ++bad;
    }
  }
  EXPECT_EQ(batch.results.size(), ok);
  EXPECT_EQ(batch.unparseable_count(), bad);
  EXPECT_EQ(batch.results, singles);
  EXPECT_EQ(batch.unparseable_indices.back(), raws.size() - 1);
}

}  // namespace
}  // namespace vlmad
