#include "vlmad/parser.hpp"

#include <cctype>
#include <regex>

#include "vlmad/error.hpp"
#include "vlmad/io.hpp"

namespace vlmad {

void from_json(const nlohmann::json& j, ParserConfig& c) {
  ParserConfig d;
  c.positive_keywords = j.value("positive_keywords", d.positive_keywords);
  c.negative_phrases = j.value("negative_phrases", d.negative_phrases);
  c.negators = j.value("negators", d.negators);
  c.negation_window = j.value("negation_window", d.negation_window);
  if (c.positive_keywords.empty() || c.negative_phrases.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "parser keyword lists must be non-empty");
  }
  if (c.negation_window < 0) {
    throw Error(ErrorCode::kConfigInvalid, "negation_window must be >= 0");
  }
}

void to_json(nlohmann::json& j, const ParserConfig& c) {
  j = nlohmann::json{{"positive_keywords", c.positive_keywords},
                     {"negative_phrases", c.negative_phrases},
                     {"negators", c.negators},
                     {"negation_window", c.negation_window}};
}

namespace {

DetectionResult Make(int label, std::string reasoning, std::string_view raw,
                     ParsePath path) {
  DetectionResult r;
  r.label = label;
  r.reasoning = std::move(reasoning);
  r.score = static_cast<double>(label);
  r.raw_response = std::string(raw);
  r.parse_path = path;
  return r;
}

// Removes markdown fences and one level of surrounding quotes.
std::string Unwrap(std::string_view raw) {
  std::string t = Trim(raw);
  if (t.rfind("```", 0) == 0) {
    auto nl = t.find('\n');
    t = nl == std::string::npos ? t.substr(3) : t.substr(nl + 1);
    auto close = t.rfind("```");
    if (close != std::string::npos) t = t.substr(0, close);
    t = Trim(t);
  }
  for (std::string_view q : {"\"\"\"", "'''", "\"", "'"}) {
    if (t.size() >= 2 * q.size() && t.starts_with(q) && t.ends_with(q)) {
      t = Trim(t.substr(q.size(), t.size() - 2 * q.size()));
      break;
    }
  }
  return t;
}

std::string StripReason(std::string s) {
  s = Trim(s);
  while (!s.empty() && (s.back() == ')' || s.back() == ']')) s = Trim(s.substr(0, s.size() - 1));
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return Trim(s);
}

int LabelFromToken(std::string token) {
  token = ToLower(token);
  return (token == "1" || token == "true") ? 1 : 0;
}

std::optional<std::pair<int, std::string>> ParseStructured(const std::string& t) {
  static const std::regex kLeading(
      R"(^[\(\[]?\s*["']?([01])["']?\s*(?:[,;:|]|-\s|\n)\s*([\s\S]*)$)");
  static const std::regex kBare(R"(^[\(\[]?\s*["']?([01])["']?\s*[\)\]]?\.?$)");
  std::smatch m;
  if (std::regex_match(t, m, kBare)) {
    return std::make_pair(LabelFromToken(m[1]), std::string());
  }
  if (std::regex_match(t, m, kLeading)) {
    return std::make_pair(LabelFromToken(m[1]), StripReason(m[2]));
  }

  static const std::regex kField(
      R"re(["']?\b(anomaly|anomalous|is_anomaly|is_anomalous|anomaly_detected|has_anomaly|label|result|prediction|answer|binary_result|output)\b["']?\s*[:=]\s*["']?(0|1|true|false|True|False)\b)re",
      std::regex::icase);
  if (!std::regex_search(t, m, kField)) return std::nullopt;
  const int label = LabelFromToken(m[2]);

  static const std::regex kReasonKey(
      R"re(["']?\b(reason|reasoning|explanation|rationale)\b["']?\s*[:=]\s*)re",
      std::regex::icase);
  std::string reason;
  std::smatch rm;
  if (std::regex_search(t, rm, kReasonKey)) {
    std::string rest = rm.suffix();
    if (!rest.empty() && (rest[0] == '"' || rest[0] == '\'')) {
      const char q = rest[0];
      std::string value;
      for (std::size_t i = 1; i < rest.size(); ++i) {
        if (rest[i] == '\\' && i + 1 < rest.size()) {
          value += rest[++i];
        } else if (rest[i] == q) {
          break;
        } else {
          value += rest[i];
        }
      }
      reason = value;
    } else {
      auto nl = rest.find('\n');
      reason = StripReason(rest.substr(0, nl));
      while (!reason.empty() && (reason.back() == '}' || reason.back() == ',')) {
        reason = Trim(reason.substr(0, reason.size() - 1));
      }
    }
  }
  return std::make_pair(label, Trim(reason));
}

bool IsWordChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::optional<std::pair<int, std::string>> ParseDigit(const std::string& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '0' && t[i] != '1') continue;
    if (i > 0) {
      char p = t[i - 1];
      if (IsWordChar(p) || p == '.' || p == '/' || p == '-' || p == '+') continue;
    }
    if (i + 1 < t.size()) {
      char n = t[i + 1];
      if (IsWordChar(n) || n == '%' || n == '/') continue;
      if ((n == '.' || n == ',') && i + 2 < t.size() &&
          std::isdigit(static_cast<unsigned char>(t[i + 2]))) {
        continue;
      }
    }
    std::string rest = t.substr(0, i) + t.substr(i + 1);
    rest = Trim(rest);
    while (!rest.empty() && (rest.front() == ',' || rest.front() == ':' ||
                             rest.front() == '-' || rest.front() == '.')) {
      rest = Trim(rest.substr(1));
    }
    return std::make_pair(t[i] - '0', rest);
  }
  return std::nullopt;
}

// Lowercased words; clause punctuation becomes an empty-string boundary.
std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char raw : text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (IsWordChar(c) || c == '\'') {
      cur += c;
    } else {
      flush();
      if (c == '.' || c == ',' || c == ';' || c == '!' || c == '?' ||
          c == ':' || c == '\n') {
        if (tokens.empty() || !tokens.back().empty()) tokens.emplace_back();
      }
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> Words(std::string_view phrase) {
  std::vector<std::string> out;
  for (auto& tok : Tokenize(phrase)) {
    if (!tok.empty()) out.push_back(std::move(tok));
  }
  return out;
}

bool WordMatches(const std::string& token, const std::string& word, bool inflect) {
  if (token == word) return true;
  if (!inflect) return false;
  if (token.starts_with(word)) return true;
  // anomaly -> anomalies
  return word.size() > 1 && word.back() == 'y' &&
         token == word.substr(0, word.size() - 1) + "ies";
}

bool PhraseAt(const std::vector<std::string>& tokens, std::size_t at,
              const std::vector<std::string>& phrase) {
  if (phrase.empty() || at + phrase.size() > tokens.size()) return false;
  for (std::size_t k = 0; k < phrase.size(); ++k) {
    if (!WordMatches(tokens[at + k], phrase[k], k + 1 == phrase.size())) return false;
  }
  return true;
}

bool NegatedBefore(const std::vector<std::string>& tokens, std::size_t at,
                   const std::vector<std::vector<std::string>>& negators,
                   int window) {
  std::size_t begin = at;
  int words = 0;
  while (begin > 0 && words < window && !tokens[begin - 1].empty()) {
    --begin;
    ++words;
  }
  for (std::size_t i = begin; i < at; ++i) {
    for (const auto& neg : negators) {
      if (i + neg.size() > at) continue;
      bool ok = true;
      for (std::size_t k = 0; k < neg.size() && ok; ++k) ok = tokens[i + k] == neg[k];
      if (ok) return true;
    }
  }
  return false;
}

std::optional<int> ParseKeyword(std::string_view text, const ParserConfig& config) {
  const auto tokens = Tokenize(text);
  std::vector<std::vector<std::string>> negatives, positives, negators;
  for (const auto& p : config.negative_phrases) negatives.push_back(Words(p));
  for (const auto& p : config.positive_keywords) positives.push_back(Words(p));
  for (const auto& p : config.negators) negators.push_back(Words(p));

  std::vector<bool> consumed(tokens.size(), false);
  bool positive = false;
  bool negative = false;
  // Negation phrases first; their words are consumed.
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& phrase : negatives) {
      if (!PhraseAt(tokens, i, phrase)) continue;
      if (NegatedBefore(tokens, i, negators, config.negation_window)) {
        positive = true;  // "not normal"
      } else {
        negative = true;
      }
      for (std::size_t k = 0; k < phrase.size(); ++k) consumed[i + k] = true;
      break;
    }
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (consumed[i]) continue;
    for (const auto& phrase : positives) {
      bool free = true;
      for (std::size_t k = 0; k < phrase.size() && i + k < tokens.size(); ++k) {
        free = free && !consumed[i + k];
      }
      if (!free || !PhraseAt(tokens, i, phrase)) continue;
      if (NegatedBefore(tokens, i, negators, config.negation_window)) {
        negative = true;
      } else {
        positive = true;
      }
      break;
    }
  }
  if (positive) return 1;
  if (negative) return 0;
  return std::nullopt;
}

}  // namespace

std::optional<DetectionResult> TryParseResponse(std::string_view raw,
                                                const ParserConfig& config) {
  const std::string text = Unwrap(raw);
  if (text.empty()) return std::nullopt;
  if (auto s = ParseStructured(text)) {
    return Make(s->first, std::move(s->second), raw, ParsePath::kStructured);
  }
  if (auto d = ParseDigit(text)) {
    return Make(d->first, std::move(d->second), raw, ParsePath::kFallbackDigit);
  }
  if (auto k = ParseKeyword(text, config)) {
    return Make(*k, text, raw, ParsePath::kFallbackKeyword);
  }
  return std::nullopt;
}

DetectionResult ParseResponse(std::string_view raw, const ParserConfig& config) {
  if (Trim(raw).empty()) {
    throw Error(ErrorCode::kUnparseable, "empty response");
  }
  auto r = TryParseResponse(raw, config);
  if (!r) {
    throw Error(ErrorCode::kUnparseable,
                "no label found in response: " + std::string(raw.substr(0, 200)));
  }
  return *r;
}

BatchParse ParseBatch(const std::vector<std::string>& raws,
                      const ParserConfig& config) {
  BatchParse out;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    if (auto r = TryParseResponse(raws[i], config)) {
      out.results.push_back(std::move(*r));
    } else {
      out.unparseable_indices.push_back(i);
    }
  }
  return out;
}

}  // namespace vlmad
