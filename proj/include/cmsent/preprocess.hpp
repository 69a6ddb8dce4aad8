#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmsent/labels.hpp"

namespace cmsent {

// Language tags are normalized into three buckets. "lang1"/"Eng" is English,
// "lang2"/"Hin"/"Spa" the other language of the pair, anything else `other`.
enum class Lang { lang1, lang2, other };

Lang classify_lang_tag(std::string_view tag);
std::optional<Lang> parse_lang(std::string_view name);
std::string_view lang_name(Lang lang);

struct TaggedToken {
  std::string text;
  Lang lang = Lang::other;
  std::string tag;  // tag exactly as written in the corpus file

  bool operator==(const TaggedToken&) const = default;
};

struct RawTweet {
  std::string uid;
  std::vector<TaggedToken> tokens;
  std::optional<Label> label;  // absent for unlabeled test blocks

  bool operator==(const RawTweet&) const = default;
};

struct CleanTweet {
  std::string uid;
  std::vector<std::string> tokens;
  std::optional<Label> label;

  bool operator==(const CleanTweet&) const = default;
};

// ---- corpus files -------------------------------------------------------

/// Blocks of `meta <uid> [<label>]` followed by `<token>\t<lang>` lines,
/// separated by blank lines. ParseError carries the offending line number;
/// an unknown label string raises ValueError.
std::vector<RawTweet> parse_corpus(std::istream& in);
std::vector<RawTweet> parse_corpus(const std::filesystem::path& path);

/// Canonical form: `meta\t<uid>[\t<label>]`, one `text\ttag` line per token,
/// one blank line after every block.
void serialize_corpus(std::ostream& out, const std::vector<RawTweet>& tweets);

// ---- transliteration ----------------------------------------------------

/// Latin -> target-script substitution table applied longest-match-first.
class TransliterationRules {
 public:
  TransliterationRules() = default;
  explicit TransliterationRules(std::vector<std::pair<std::string, std::string>> rules);

  /// One `source<TAB>target` pair per line; blank lines ignored.
  static TransliterationRules load(std::istream& in);
  static TransliterationRules load(const std::filesystem::path& path);

  std::string apply(std::string_view word) const;
  bool empty() const noexcept { return rules_.empty(); }

 private:
  std::map<std::string, std::string, std::less<>> rules_;
  std::size_t longest_ = 0;
};

/// Rewrites tokens tagged `target` through `rules`; identity when `rules` is null.
RawTweet transliterate(const RawTweet& tweet, const TransliterationRules* rules, Lang target);

// ---- noise removal ------------------------------------------------------

// Stand-in for a tweet whose every token was noise.
inline constexpr std::string_view kEmptyPlaceholder = "<empty>";

bool is_username(std::string_view token);
bool is_url(std::string_view token);
bool is_emoticon(std::string_view token);

/// Drops usernames, URLs and emoticon tokens; hashtags and everything else
/// survive verbatim and in order. Never returns an empty list.
std::vector<std::string> strip_noise(const std::vector<std::string>& tokens);

CleanTweet remove_noise(const RawTweet& tweet);
CleanTweet remove_noise(const CleanTweet& tweet);

/// transliterate followed by remove_noise.
CleanTweet preprocess(const RawTweet& tweet, const TransliterationRules* rules, Lang target);

/// Tokens joined by single spaces: the text encode/decode round-trips.
std::string normalized_text(const CleanTweet& tweet);

// ---- UTF-8 --------------------------------------------------------------

/// Splits into code points; invalid bytes become single-byte pieces.
std::vector<std::string> utf8_chars(std::string_view text);
/// Decoded code points; invalid bytes decode to U+FFFD.
std::vector<char32_t> utf8_decode(std::string_view text);

// ---- byte-pair encoding -------------------------------------------------

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnknownId = 1;
inline constexpr std::size_t kBoundaryId = 2;  // separates consecutive words
inline constexpr std::size_t kEmptyId = 3;     // kEmptyPlaceholder
inline constexpr std::size_t kReservedCount = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnknownToken = "<unk>";
inline constexpr std::string_view kBoundaryToken = "▁";

inline constexpr int kVocabFormatVersion = 1;
inline constexpr std::size_t kDefaultVocabSize = 8000;
inline constexpr std::size_t kDefaultMaxLen = 128;

struct SubwordSequence {
  std::vector<std::size_t> ids;  // length T
  std::vector<bool> mask;        // true on real positions
  std::size_t n = 0;             // number of real positions

  std::vector<std::size_t> real_ids() const;
};

class BpeVocab {
 public:
  using Merge = std::pair<std::string, std::string>;

  BpeVocab();
  BpeVocab(std::vector<Merge> merges, std::vector<std::string> tokens);

  /// Most frequent adjacent pair first; ties go to the lexicographically
  /// smallest pair. Stops at `vocab_size` tokens or when no pair occurs twice.
  static BpeVocab train(const std::vector<CleanTweet>& corpus, std::size_t vocab_size = kDefaultVocabSize);

  SubwordSequence encode(const CleanTweet& tweet, std::size_t max_len = kDefaultMaxLen) const;
  /// Subword pieces of one word after replaying the merges.
  std::vector<std::string> segment(std::string_view word) const;
  std::string decode(const std::vector<std::size_t>& ids) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<Merge>& merges() const noexcept { return merges_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<std::size_t> id_of(std::string_view token) const;

  std::string to_json() const;
  static BpeVocab from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static BpeVocab load(const std::filesystem::path& path);

  /// 64-bit FNV-1a of the JSON serialization, as 16 hex digits.
  std::string fingerprint() const;

  bool operator==(const BpeVocab& other) const { return merges_ == other.merges_ && tokens_ == other.tokens_; }

 private:
  void index();

  std::vector<Merge> merges_;
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> token_to_id_;
  std::map<Merge, std::size_t> merge_rank_;
};

std::string fnv1a_hex(std::string_view bytes);

}  // namespace cmsent
