#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vlmad/core_types.hpp"

namespace vlmad {

// Keyword lists for the last-resort stage. Entries may be multi-word
// phrases; the last word of a phrase also matches its inflections
// ("defect" matches "defects", "defective"; "anomaly" matches "anomalies").
struct ParserConfig {
  std::vector<std::string> positive_keywords{"anomaly", "anomalous", "defect",
                                             "abnormal"};
  std::vector<std::string> negative_phrases{"no anomaly", "not anomalous",
                                            "no defect", "normal"};
  // A positive keyword preceded by one of these within `negation_window`
  // words of the same clause counts as negated.
  std::vector<std::string> negators{"no",     "not",        "without", "never",
                                    "none",   "nor",        "free of", "absence of",
                                    "isn't",  "aren't",     "wasn't",  "doesn't",
                                    "don't",  "cannot",     "lack of", "lacks"};
  int negation_window = 3;
};

void from_json(const nlohmann::json& j, ParserConfig& c);
void to_json(nlohmann::json& j, const ParserConfig& c);

// Three-stage cascade: STRUCTURED ("<0|1>, <reason>", tuple, key-value or
// object literal) -> FALLBACK_DIGIT (first standalone 0/1 token) ->
// FALLBACK_KEYWORD. Returns nullopt when every stage fails.
std::optional<DetectionResult> TryParseResponse(std::string_view raw,
                                                const ParserConfig& config = {});

// As TryParseResponse but throws kUnparseable.
DetectionResult ParseResponse(std::string_view raw, const ParserConfig& config = {});

struct BatchParse {
  std::vector<DetectionResult> results;  // input order, unparseable dropped
  std::vector<std::size_t> unparseable_indices;
  std::size_t unparseable_count() const { return unparseable_indices.size(); }
};

BatchParse ParseBatch(const std::vector<std::string>& raws,
                      const ParserConfig& config = {});

}  // namespace vlmad
