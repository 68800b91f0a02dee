#include "vlmad/prompt.hpp"

#include "json.hpp"
#include "vlmad/error.hpp"
#include "vlmad/image_codec.hpp"
#include "vlmad/io.hpp"

namespace vlmad {

std::string_view DescribeStrategy(PromptStrategy strategy) {
  switch (strategy.level) {
    case StrategyLevel::kNaive: return "naive";
    case StrategyLevel::kClassInfo: return "class";
    case StrategyLevel::kNormalityRule: return "rules";
    case StrategyLevel::kNormalityCase: return "reference";
  }
  return "naive";
}

PromptStrategy ParseStrategy(std::string_view id) {
  for (PromptStrategy s : kAllStrategies) {
    if (DescribeStrategy(s) == id) return s;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown strategy '" + std::string(id) +
                  "' (expected naive|class|rules|reference)");
}

std::string_view SegmentRoleName(SegmentRole role) {
  switch (role) {
    case SegmentRole::kTaskInstruction: return "task_instruction";
    case SegmentRole::kClassContext: return "class_context";
    case SegmentRole::kNormalityRules: return "normality_rules";
    case SegmentRole::kReferencePreamble: return "reference_preamble";
    case SegmentRole::kReferenceImage: return "reference_image";
    case SegmentRole::kQueryPreamble: return "query_preamble";
    case SegmentRole::kQueryImage: return "query_image";
    case SegmentRole::kFormatInstruction: return "format_instruction";
  }
  return "unknown";
}

// ---- RulesBook ------------------------------------------------------------

RulesBook::RulesBook(std::map<std::string, NormalityRules> by_category) {
  for (auto& [name, rules] : by_category) {
    by_category_.emplace(name, std::move(rules));
  }
}

RulesBook RulesBook::Parse(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("rules file is not valid JSON: ") + e.what());
  }
  if (!j.contains("categories") || !j["categories"].is_object()) {
    throw Error(ErrorCode::kInvalidArgument,
                "rules file needs a 'categories' object");
  }
  std::map<std::string, NormalityRules> out;
  for (const auto& [name, list] : j["categories"].items()) {
    NormalityRules r;
    r.category = name;
    if (!list.is_array() || list.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rules for '" + name + "' must be a non-empty list");
    }
    for (const auto& rule : list) {
      std::string text = Trim(rule.get<std::string>());
      if (text.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "empty rule sentence for '" + name + "'");
      }
      r.rules.push_back(std::move(text));
    }
    out.emplace(name, std::move(r));
  }
  return RulesBook(std::move(out));
}

RulesBook RulesBook::Load(const std::filesystem::path& path) {
  return Parse(ReadFile(path));
}

const NormalityRules* RulesBook::Find(std::string_view category) const {
  auto it = by_category_.find(category);
  return it == by_category_.end() ? nullptr : &it->second;
}

std::vector<std::string> RulesBook::Categories() const {
  std::vector<std::string> names;
  for (const auto& [name, _] : by_category_) names.push_back(name);
  return names;
}

// ---- PromptTemplate -------------------------------------------------------

PromptTemplate PromptTemplate::Default() {
  PromptTemplate t;
  t.version = 1;
  t.task_instruction =
      "You are an industrial anomaly detection expert. Determine whether the "
      "following image contains anomalies or defects.";
  t.class_context = "The object class is: {cls}.";
  t.rules_preamble =
      "A normal sample of this class satisfies the following rules:";
  t.rule_bullet = "- ";
  t.reference_preamble =
      "The first image is a normal reference sample of this class.";
  t.query_preamble = "The second image is the query sample to inspect.";
  t.format_instruction =
      "Respond with a single line: first the binary result (0 for normal, 1 "
      "for anomaly), then a short reasoning string.";
  return t;
}

PromptTemplate PromptTemplate::Parse(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("template file is not valid JSON: ") + e.what());
  }
  PromptTemplate t;
  try {
    t.version = j.at("version").get<int>();
    t.task_instruction = j.at("task_instruction").get<std::string>();
    t.class_context = j.at("class_context").get<std::string>();
    t.rules_preamble = j.at("rules_preamble").get<std::string>();
    t.rule_bullet = j.at("rule_bullet").get<std::string>();
    t.reference_preamble = j.at("reference_preamble").get<std::string>();
    t.query_preamble = j.at("query_preamble").get<std::string>();
    t.format_instruction = j.at("format_instruction").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("template file: ") + e.what());
  }
  if (t.class_context.find("{cls}") == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "class_context must contain the {cls} placeholder");
  }
  return t;
}

PromptTemplate PromptTemplate::Load(const std::filesystem::path& path) {
  return Parse(ReadFile(path));
}

// ---- bundle ---------------------------------------------------------------

const CanonicalImage* PromptBundle::ReferenceImage() const {
  for (const auto& s : segments) {
    if (s.role == SegmentRole::kReferenceImage) return &*s.image;
  }
  return nullptr;
}

const CanonicalImage& PromptBundle::QueryImage() const {
  for (const auto& s : segments) {
    if (s.role == SegmentRole::kQueryImage) return *s.image;
  }
  throw Error(ErrorCode::kInvalidArgument, "bundle has no query image");
}

namespace {

void Require(bool present, bool enabled, bool strict, const char* what) {
  if (enabled && !present) {
    throw Error(ErrorCode::kMissingComponent,
                std::string(what) + " is required by the strategy");
  }
  if (!enabled && present && strict) {
    throw Error(ErrorCode::kExtraComponent,
                std::string(what) + " was supplied but the strategy disables it");
  }
}

PromptSegment Text(SegmentRole role, std::string text) {
  return PromptSegment{role, std::move(text), std::nullopt};
}

PromptSegment Image(SegmentRole role, CanonicalImage image) {
  return PromptSegment{role, {}, std::move(image)};
}

}  // namespace

PromptBundle BuildPrompt(PromptStrategy strategy, CanonicalImage query_image,
                         PromptInputs inputs, const PromptTemplate& tmpl,
                         bool strict) {
  const bool has_class = inputs.class_token && !Trim(*inputs.class_token).empty();
  Require(has_class, strategy.use_class(), strict, "class token");
  Require(inputs.rules.has_value(), strategy.use_rules(), strict,
          "normality rules");
  Require(inputs.reference.has_value(), strategy.use_reference(), strict,
          "reference image");

  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.template_version = tmpl.version;
  if (strategy.use_class()) bundle.class_token = *inputs.class_token;

  auto& seg = bundle.segments;
  seg.push_back(Text(SegmentRole::kTaskInstruction, tmpl.task_instruction));
  if (strategy.use_class()) {
    std::string text = tmpl.class_context;
    text.replace(text.find("{cls}"), 5, *inputs.class_token);
    seg.push_back(Text(SegmentRole::kClassContext, std::move(text)));
  }
  if (strategy.use_rules()) {
    if (inputs.rules->rules.empty()) {
      throw Error(ErrorCode::kMissingComponent, "normality rules list is empty");
    }
    std::string text = tmpl.rules_preamble;
    for (const auto& rule : inputs.rules->rules) {
      if (Trim(rule).empty()) {
        throw Error(ErrorCode::kInvalidArgument, "empty normality rule");
      }
      text += "\n" + tmpl.rule_bullet + rule;
    }
    seg.push_back(Text(SegmentRole::kNormalityRules, std::move(text)));
  }
  if (strategy.use_reference()) {
    seg.push_back(Text(SegmentRole::kReferencePreamble, tmpl.reference_preamble));
    seg.push_back(Image(SegmentRole::kReferenceImage, std::move(*inputs.reference)));
    seg.push_back(Text(SegmentRole::kQueryPreamble, tmpl.query_preamble));
  }
  seg.push_back(Image(SegmentRole::kQueryImage, std::move(query_image)));
  seg.push_back(Text(SegmentRole::kFormatInstruction, tmpl.format_instruction));
  return bundle;
}

void ValidateBundle(const PromptBundle& bundle) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, "invalid bundle: " + msg);
  };
  int task = 0, format = 0, query = 0, reference = 0;
  std::ptrdiff_t query_at = -1, reference_at = -1;
  for (std::size_t i = 0; i < bundle.segments.size(); ++i) {
    const auto& s = bundle.segments[i];
    const bool wants_image = s.role == SegmentRole::kQueryImage ||
                             s.role == SegmentRole::kReferenceImage;
    if (wants_image != s.is_image()) fail("segment kind does not match role");
    switch (s.role) {
      case SegmentRole::kTaskInstruction: ++task; break;
      case SegmentRole::kFormatInstruction: ++format; break;
      case SegmentRole::kQueryImage:
        ++query;
        query_at = static_cast<std::ptrdiff_t>(i);
        break;
      case SegmentRole::kReferenceImage:
        ++reference;
        reference_at = static_cast<std::ptrdiff_t>(i);
        break;
      default: break;
    }
  }
  if (task != 1) fail("needs exactly one task instruction");
  if (format != 1) fail("needs exactly one format instruction");
  if (query != 1) fail("needs exactly one query image");
  if (reference != (bundle.strategy.use_reference() ? 1 : 0)) {
    fail("reference image presence does not match the strategy");
  }
  if (reference == 1 && reference_at > query_at) {
    fail("reference image must precede the query image");
  }
  if (bundle.segments.back().role != SegmentRole::kFormatInstruction) {
    fail("last segment must be the format instruction");
  }
}

std::string SerializeBundle(const PromptBundle& bundle) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : bundle.segments) {
    nlohmann::json js{{"role", SegmentRoleName(s.role)}};
    if (s.is_image()) {
      js["width"] = s.image->width();
      js["height"] = s.image->height();
      js["png_base64"] = Base64Encode(EncodePng(*s.image));
    } else {
      js["text"] = s.text;
    }
    segs.push_back(std::move(js));
  }
  nlohmann::json j{{"strategy", DescribeStrategy(bundle.strategy)},
                   {"template_version", bundle.template_version},
                   {"segments", std::move(segs)}};
  j["class_token"] = bundle.class_token ? nlohmann::json(*bundle.class_token)
                                        : nlohmann::json(nullptr);
  return j.dump();
}

std::string BundleText(const PromptBundle& bundle) {
  std::string out;
  for (const auto& s : bundle.segments) {
    if (s.is_image()) continue;
    if (!out.empty()) out += "\n\n";
    out += s.text;
  }
  return out;
}

}  // namespace vlmad
