#include <cstdlib>

#include <gtest/gtest.h>

#include "testutil.hpp"
#include "vlmad/error.hpp"
#include "vlmad/io.hpp"
#include "vlmad/prompt.hpp"

namespace vlmad {
namespace {

using testing::Gray;

const std::string kPcbRule =
    "The given image should depict a clean and well-structured PCB with clear "
    "traces, soldered components, and distinct labels.";

int IndexOf(const PromptBundle& b, SegmentRole role) {
  for (std::size_t i = 0; i < b.segments.size(); ++i)
    if (b.segments[i].role == role) return static_cast<int>(i);
  return -1;
}

TEST(BuildPrompt, NaiveHasThreeSegments) {
  auto b = BuildPrompt({StrategyLevel::kNaive}, Gray(8, 8, 1), {});
  ASSERT_EQ(b.segments.size(), 3u);
  EXPECT_EQ(b.segments[0].role, SegmentRole::kTaskInstruction);
  EXPECT_EQ(b.segments[1].role, SegmentRole::kQueryImage);
  EXPECT_TRUE(b.segments[1].is_image());
  EXPECT_EQ(b.segments[2].role, SegmentRole::kFormatInstruction);
  EXPECT_EQ(b.ReferenceImage(), nullptr);
}

TEST(BuildPrompt, RulesCarryClassTokenAndSentenceVerbatim) {
  PromptInputs in;
  in.class_token = "PCB";
  in.rules = NormalityRules{"pcb", {kPcbRule}};
  auto b = BuildPrompt({StrategyLevel::kNormalityRule}, Gray(8, 8, 1), in);
  const auto text = BundleText(b);
  EXPECT_NE(text.find("PCB"), std::string::npos);
  EXPECT_NE(text.find(kPcbRule), std::string::npos);
}

TEST(BuildPrompt, ReferencePrecedesQuery) {
  PromptInputs in;
  in.class_token = "bottle";
  in.rules = NormalityRules{"bottle", {"clean"}};
  in.reference = Gray(8, 8, 200);
  auto b = BuildPrompt({StrategyLevel::kNormalityCase}, Gray(8, 8, 1), in);
  const int ref = IndexOf(b, SegmentRole::kReferenceImage);
  const int query = IndexOf(b, SegmentRole::kQueryImage);
  ASSERT_GE(ref, 0);
  EXPECT_LT(ref, query);
  EXPECT_EQ(b.ReferenceImage()->at(0, 0)[0], 200);
  EXPECT_EQ(b.QueryImage().at(0, 0)[0], 1);
  EXPECT_NO_THROW(ValidateBundle(b));
}

TEST(BuildPrompt, EveryLevelEndsWithFormatInstruction) {
  for (auto s : kAllStrategies) {
    auto b = testing::SnapshotBundle(s);
    EXPECT_EQ(b.segments.back().role, SegmentRole::kFormatInstruction);
    EXPECT_NO_THROW(ValidateBundle(b));
  }
}

ErrorCode BuildError(PromptStrategy s, PromptInputs in, bool strict = true) {
  try {
    BuildPrompt(s, Gray(4, 4, 0), std::move(in), PromptTemplate::Default(), strict);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

TEST(BuildPrompt, MissingComponents) {
  EXPECT_EQ(BuildError({StrategyLevel::kClassInfo}, {}), ErrorCode::kMissingComponent);
  PromptInputs cls;
  cls.class_token = "bottle";
  EXPECT_EQ(BuildError({StrategyLevel::kNormalityRule}, cls), ErrorCode::kMissingComponent);
  PromptInputs rules = cls;
  rules.rules = NormalityRules{"bottle", {"clean"}};
  EXPECT_EQ(BuildError({StrategyLevel::kNormalityCase}, rules), ErrorCode::kMissingComponent);
}

TEST(BuildPrompt, ExtraComponentsOnlyRejectedInStrictMode) {
  PromptInputs in;
  in.reference = Gray(4, 4, 9);
  EXPECT_EQ(BuildError({StrategyLevel::kNaive}, in), ErrorCode::kExtraComponent);
  auto lenient = BuildPrompt({StrategyLevel::kNaive}, Gray(4, 4, 0), in,
                             PromptTemplate::Default(), false);
  EXPECT_EQ(lenient.segments.size(), 3u);
  EXPECT_EQ(lenient.ReferenceImage(), nullptr);
}

TEST(Strategy, DescribeAndParseAreInverse) {
  EXPECT_EQ(DescribeStrategy({StrategyLevel::kNaive}), "naive");
  EXPECT_EQ(DescribeStrategy({StrategyLevel::kNormalityCase}), "reference");
  for (auto s : kAllStrategies) EXPECT_EQ(ParseStrategy(DescribeStrategy(s)), s);
  EXPECT_THROW(ParseStrategy("bogus"), Error);
}

TEST(SerializeBundle, DeterministicAcrossBuilds) {
  for (auto s : kAllStrategies)
    EXPECT_EQ(SerializeBundle(testing::SnapshotBundle(s)),
              SerializeBundle(testing::SnapshotBundle(s)));
}

TEST(SerializeBundle, MatchesGoldenFiles) {
  const bool update = std::getenv("VLMAD_UPDATE_GOLDEN") != nullptr;
  for (auto s : kAllStrategies) {
    const auto got = SerializeBundle(testing::SnapshotBundle(s));
    const auto path = testing::GoldenPath(s);
    if (update) WriteFile(path, got);
    EXPECT_EQ(ReadFile(path), got) << path;
  }
}

bool SameSegment(const PromptSegment& a, const PromptSegment& b) {
  if (a.role != b.role || a.text != b.text || a.is_image() != b.is_image()) return false;
  return !a.is_image() || a.image->SamePixels(*b.image);
}

// Each level's segments appear, unchanged and in order, in the next level.
TEST(BuildPrompt, HigherLevelsOnlyInsertSegments) {
  for (std::size_t k = 1; k < std::size(kAllStrategies); ++k) {
    auto lower = testing::SnapshotBundle(kAllStrategies[k - 1]);
    auto higher = testing::SnapshotBundle(kAllStrategies[k]);
    EXPECT_GT(higher.segments.size(), lower.segments.size());
    std::size_t j = 0;
    for (const auto& seg : higher.segments)
      if (j < lower.segments.size() && SameSegment(seg, lower.segments[j])) ++j;
    EXPECT_EQ(j, lower.segments.size()) << "level " << k;
  }
}

TEST(RulesBook, ParsesAndRejectsEmptyRules) {
  auto book = RulesBook::Parse(R"({"version":1,"categories":{"a":["x","y"]}})");
  ASSERT_NE(book.Find("a"), nullptr);
  EXPECT_EQ(book.Find("a")->rules.size(), 2u);
  EXPECT_EQ(book.Find("b"), nullptr);
  EXPECT_THROW(RulesBook::Parse(R"({"version":1,"categories":{"a":[""]}})"), Error);
}

TEST(RulesBook, ShippedRulesCoverTheFifteenCategories) {
  auto book = RulesBook::Load(std::filesystem::path(VLMAD_ASSET_DIR) / "rules" / "mvtec_ad.json");
  for (const char* c : {"bottle", "cable", "capsule", "carpet", "grid", "hazelnut",
                        "leather", "metal_nut", "pill", "screw", "tile", "toothbrush",
                        "transistor", "wood", "zipper"}) {
    ASSERT_NE(book.Find(c), nullptr) << c;
    EXPECT_FALSE(book.Find(c)->rules.empty());
  }
}

TEST(PromptTemplate, ShippedFileMatchesDefault) {
  auto t = PromptTemplate::Load(std::filesystem::path(VLMAD_ASSET_DIR) / "prompt_template.json");
  auto d = PromptTemplate::Default();
  EXPECT_EQ(t.task_instruction, d.task_instruction);
  EXPECT_EQ(t.format_instruction, d.format_instruction);
  EXPECT_EQ(t.class_context, d.class_context);
  EXPECT_EQ(t.rules_preamble, d.rules_preamble);
  EXPECT_EQ(t.reference_preamble, d.reference_preamble);
  EXPECT_EQ(t.query_preamble, d.query_preamble);
}

}  // namespace
}  // namespace vlmad
