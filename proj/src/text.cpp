#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>

#include "cmsent/errors.hpp"
#include "cmsent/preprocess.hpp"

namespace cmsent {

namespace {

// Length of the UTF-8 sequence starting at text[i], or 0 if it is malformed.
std::size_t sequence_length(std::string_view text, std::size_t i, char32_t* cp) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len = 0;
  char32_t value = 0;
  if (b0 < 0x80) {
    *cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    value = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    value = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    value = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    value = (value << 6) | (b & 0x3F);
  }
  *cp = value;
  return len;
}

struct Range {
  char32_t lo;
  char32_t hi;
};

// Pictographic emoji blocks.
constexpr std::array<Range, 14> kEmojiRanges = {{
    {0x1F000, 0x1F02F},  // mahjong
    {0x1F0A0, 0x1F0FF},  // playing cards
    {0x1F100, 0x1F1FF},  // enclosed alphanumerics, regional indicators
    {0x1F200, 0x1F2FF},  // enclosed ideographic supplement
    {0x1F300, 0x1F5FF},  // misc symbols and pictographs, skin tones
    {0x1F600, 0x1F64F},  // emoticons
    {0x1F680, 0x1F6FF},  // transport and map
    {0x1F700, 0x1F7FF},  // alchemical, geometric shapes extended
    {0x1F800, 0x1F8FF},  // supplemental arrows-c
    {0x1F900, 0x1F9FF},  // supplemental symbols and pictographs
    {0x1FA00, 0x1FAFF},  // chess, symbols and pictographs extended-a
    {0x2600, 0x26FF},    // misc symbols
    {0x2700, 0x27BF},    // dingbats
    {0x2B00, 0x2BFF},    // misc symbols and arrows
}};

// Code points that only modify or join emoji.
constexpr std::array<Range, 4> kEmojiJoiners = {{
    {0x200D, 0x200D},  // zero width joiner
    {0xFE0E, 0xFE0F},  // variation selectors
    {0x20E3, 0x20E3},  // combining keycap
    {0xE0020, 0xE007F},  // tag characters
}};

template <std::size_t N>
bool in_ranges(char32_t cp, const std::array<Range, N>& ranges) {
  return std::any_of(ranges.begin(), ranges.end(), [cp](Range r) { return cp >= r.lo && cp <= r.hi; });
}

constexpr std::array<std::string_view, 7> kAsciiEmoticons = {":)", ":(", ":D", ":d", ";)", ":-)", ":-("};

}  // namespace

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    std::size_t len = sequence_length(text, i, &cp);
    if (len == 0) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<char32_t> utf8_decode(std::string_view text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    std::size_t len = sequence_length(text, i, &cp);
    if (len == 0) {
      cp = 0xFFFD;
      len = 1;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

// ---- transliteration ----------------------------------------------------

TransliterationRules::TransliterationRules(std::vector<std::pair<std::string, std::string>> rules) {
  for (auto& [source, target] : rules) {
    if (source.empty()) throw ValueError("transliteration rule with empty source");
    longest_ = std::max(longest_, source.size());
    rules_[std::move(source)] = std::move(target);
  }
}

TransliterationRules TransliterationRules::load(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError("expected 'source<TAB>target'", line_no);
    }
    rules.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return TransliterationRules(std::move(rules));
}

TransliterationRules TransliterationRules::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open transliteration rules " + path.string());
  return load(in);
}

std::string TransliterationRules::apply(std::string_view word) const {
  std::string out;
  std::size_t i = 0;
  while (i < word.size()) {
    bool matched = false;
    for (std::size_t len = std::min(longest_, word.size() - i); len > 0; --len) {
      const auto it = rules_.find(word.substr(i, len));
      if (it != rules_.end()) {
        out += it->second;
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      char32_t cp = 0;
      std::size_t len = sequence_length(word, i, &cp);
      if (len == 0) len = 1;
      out.append(word.substr(i, len));
      i += len;
    }
  }
  return out;
}

RawTweet transliterate(const RawTweet& tweet, const TransliterationRules* rules, Lang target) {
  RawTweet out = tweet;
  if (rules == nullptr || rules->empty()) return out;
  for (auto& tok : out.tokens) {
    if (tok.lang == target) tok.text = rules->apply(tok.text);
  }
  return out;
}

// ---- noise removal ------------------------------------------------------

bool is_username(std::string_view token) { return !token.empty() && token.front() == '@'; }

bool is_url(std::string_view token) {
  if (token.size() >= 4) {
    std::string head(token.substr(0, 4));
    std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) { return std::tolower(c); });
    if (head == "www.") return true;
  }
  const auto sep = token.find("://");
  if (sep == std::string_view::npos || sep == 0) return false;
  // scheme = ALPHA *( ALPHA / DIGIT / "+" / "-" / "." )
  if (!std::isalpha(static_cast<unsigned char>(token[0]))) return false;
  return std::all_of(token.begin(), token.begin() + static_cast<std::ptrdiff_t>(sep), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '-' || c == '.';
  });
}

bool is_emoticon(std::string_view token) {
  if (token.empty()) return false;
  if (std::find(kAsciiEmoticons.begin(), kAsciiEmoticons.end(), token) != kAsciiEmoticons.end()) return true;
  bool any_pictograph = false;
  for (char32_t cp : utf8_decode(token)) {
    if (in_ranges(cp, kEmojiRanges)) {
      any_pictograph = true;
    } else if (!in_ranges(cp, kEmojiJoiners)) {
      return false;
    }
  }
  return any_pictograph;
}

std::vector<std::string> strip_noise(const std::vector<std::string>& tokens) {
  std::vector<std::string> kept;
  kept.reserve(tokens.size());
  for (const auto& tok : tokens) {
    if (is_username(tok) || is_url(tok) || is_emoticon(tok)) continue;
    kept.push_back(tok);
  }
  if (kept.empty()) kept.emplace_back(kEmptyPlaceholder);
  return kept;
}

CleanTweet remove_noise(const RawTweet& tweet) {
  std::vector<std::string> texts;
  texts.reserve(tweet.tokens.size());
  for (const auto& tok : tweet.tokens) texts.push_back(tok.text);
  return CleanTweet{tweet.uid, strip_noise(texts), tweet.label};
}

CleanTweet remove_noise(const CleanTweet& tweet) { return CleanTweet{tweet.uid, strip_noise(tweet.tokens), tweet.label}; }

CleanTweet preprocess(const RawTweet& tweet, const TransliterationRules* rules, Lang target) {
  return remove_noise(transliterate(tweet, rules, target));
}

std::string normalized_text(const CleanTweet& tweet) {
  std::string out;
  for (std::size_t i = 0; i < tweet.tokens.size(); ++i) {
    if (i) out += ' ';
    out += tweet.tokens[i];
  }
  return out;
}

}  // namespace cmsent
