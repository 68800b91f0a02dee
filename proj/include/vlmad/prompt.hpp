#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vlmad/core_types.hpp"

namespace vlmad {

// Cumulative prompting levels; each level adds one kind of prompt to the
// previous one.
enum class StrategyLevel { kNaive = 0, kClassInfo = 1, kNormalityRule = 2, kNormalityCase = 3 };

struct PromptStrategy {
  StrategyLevel level = StrategyLevel::kNaive;

  bool use_class() const { return level >= StrategyLevel::kClassInfo; }
  bool use_rules() const { return level >= StrategyLevel::kNormalityRule; }
  bool use_reference() const { return level >= StrategyLevel::kNormalityCase; }

  bool operator==(const PromptStrategy&) const = default;
  auto operator<=>(const PromptStrategy&) const = default;
};

inline constexpr PromptStrategy kAllStrategies[] = {
    {StrategyLevel::kNaive},
    {StrategyLevel::kClassInfo},
    {StrategyLevel::kNormalityRule},
    {StrategyLevel::kNormalityCase},
};

// "naive" | "class" | "rules" | "reference"
std::string_view DescribeStrategy(PromptStrategy strategy);
PromptStrategy ParseStrategy(std::string_view id);

struct NormalityRules {
  std::string category;
  std::vector<std::string> rules;
};

// Per-category rules keyed by dataset category directory name.
class RulesBook {
 public:
  RulesBook() = default;
  explicit RulesBook(std::map<std::string, NormalityRules> by_category);

  // {"version": 1, "categories": {"<name>": ["rule", ...], ...}}
  static RulesBook Parse(std::string_view json_text);
  static RulesBook Load(const std::filesystem::path& path);

  const NormalityRules* Find(std::string_view category) const;
  std::vector<std::string> Categories() const;

 private:
  std::map<std::string, NormalityRules, std::less<>> by_category_;
};

// Fixed instruction wording. `class_context` contains the placeholder
// "{cls}".
struct PromptTemplate {
  int version = 1;
  std::string task_instruction;
  std::string class_context;
  std::string rules_preamble;
  std::string rule_bullet;
  std::string reference_preamble;
  std::string query_preamble;
  std::string format_instruction;

  static PromptTemplate Default();
  static PromptTemplate Parse(std::string_view json_text);
  static PromptTemplate Load(const std::filesystem::path& path);
};

enum class SegmentRole {
  kTaskInstruction,
  kClassContext,
  kNormalityRules,
  kReferencePreamble,
  kReferenceImage,
  kQueryPreamble,
  kQueryImage,
  kFormatInstruction,
};

std::string_view SegmentRoleName(SegmentRole role);

struct PromptSegment {
  SegmentRole role;
  std::string text;                    // text segments
  std::optional<CanonicalImage> image;  // image attachments

  bool is_image() const { return image.has_value(); }
};

struct PromptBundle {
  std::vector<PromptSegment> segments;
  PromptStrategy strategy;
  std::optional<std::string> class_token;
  int template_version = 1;

  const CanonicalImage* ReferenceImage() const;
  const CanonicalImage& QueryImage() const;
};

struct PromptInputs {
  std::optional<std::string> class_token;
  std::optional<NormalityRules> rules;
  std::optional<CanonicalImage> reference;
};

// Assembles the message in fixed order: task, class context, rules,
// reference preamble + reference image, query preamble + query image, format.
// The query preamble is only emitted when a reference image precedes the
// query.
//
// Throws kMissingComponent when the strategy needs an input that is absent,
// and (strict only) kExtraComponent when an input is given that the strategy
// disables.
PromptBundle BuildPrompt(PromptStrategy strategy, CanonicalImage query_image,
                         PromptInputs inputs,
                         const PromptTemplate& tmpl = PromptTemplate::Default(),
                         bool strict = true);

// Checks the structural invariants of a bundle; throws kInvalidArgument.
void ValidateBundle(const PromptBundle& bundle);

// Canonical JSON serialization: fixed field order, images as base64 of their
// canonical PNG bytes. Used for digests and snapshot files.
std::string SerializeBundle(const PromptBundle& bundle);

// Concatenated text segments separated by blank lines.
std::string BundleText(const PromptBundle& bundle);

}  // namespace vlmad
