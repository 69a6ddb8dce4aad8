#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "cmsent/errors.hpp"
#include "cmsent/preprocess.hpp"

namespace cmsent {

namespace {

using PairKey = std::uint64_t;

PairKey make_key(std::uint32_t a, std::uint32_t b) { return (static_cast<PairKey>(a) << 32) | b; }
std::uint32_t key_left(PairKey k) { return static_cast<std::uint32_t>(k >> 32); }
std::uint32_t key_right(PairKey k) { return static_cast<std::uint32_t>(k & 0xFFFFFFFFu); }

// Incremental pair statistics for merge learning.
class PairTable {
 public:
  explicit PairTable(const std::vector<std::string>& symbols) : symbols_(symbols) {}

  void add(PairKey key, long delta, std::size_t word) {
    long& count = counts_[key];
    if (count > 0) ranking_.erase(Candidate{count, key});
    count += delta;
    if (count > 0) {
      ranking_.insert(Candidate{count, key});
    } else {
      counts_.erase(key);
    }
    if (delta > 0) where_[key].insert(word);
  }

  // Highest count; ties resolved by the byte order of (left, right).
  std::optional<std::pair<PairKey, long>> best() const {
    if (ranking_.empty()) return std::nullopt;
    const auto& top = *ranking_.begin();
    return std::make_pair(top.key, top.count);
  }

  std::vector<std::size_t> words_with(PairKey key) {
    std::vector<std::size_t> words;
    if (auto it = where_.find(key); it != where_.end()) {
      words.assign(it->second.begin(), it->second.end());
      where_.erase(it);
    }
    std::sort(words.begin(), words.end());
    return words;
  }

 private:
  struct Candidate {
    long count;
    PairKey key;
  };
  struct Order {
    const std::vector<std::string>* symbols;
    bool operator()(const Candidate& x, const Candidate& y) const {
      if (x.count != y.count) return x.count > y.count;
      const auto& sx = *symbols;
      const int left = sx[key_left(x.key)].compare(sx[key_left(y.key)]);
      if (left != 0) return left < 0;
      return sx[key_right(x.key)] < sx[key_right(y.key)];
    }
  };

  const std::vector<std::string>& symbols_;
  std::unordered_map<PairKey, long> counts_;
  std::unordered_map<PairKey, std::unordered_set<std::size_t>> where_;
  std::set<Candidate, Order> ranking_{Order{&symbols_}};
};

void merge_in_place(std::vector<std::uint32_t>& word, std::uint32_t a, std::uint32_t b, std::uint32_t merged) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (i + 1 < word.size() && word[i] == a && word[i + 1] == b) {
      word[out++] = merged;
      ++i;
    } else {
      word[out++] = word[i];
    }
  }
  word.resize(out);
}

}  // namespace

std::vector<std::size_t> SubwordSequence::real_ids() const {
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (mask[t]) out.push_back(ids[t]);
  }
  return out;
}

BpeVocab::BpeVocab()
    : tokens_{std::string(kPadToken), std::string(kUnknownToken), std::string(kBoundaryToken),
              std::string(kEmptyPlaceholder)} {
  index();
}

BpeVocab::BpeVocab(std::vector<Merge> merges, std::vector<std::string> tokens)
    : merges_(std::move(merges)), tokens_(std::move(tokens)) {
  const std::vector<std::string_view> reserved = {kPadToken, kUnknownToken, kBoundaryToken, kEmptyPlaceholder};
  if (tokens_.size() < kReservedCount ||
      !std::equal(reserved.begin(), reserved.end(), tokens_.begin())) {
    throw ValueError("vocabulary must start with the reserved tokens <pad> <unk> ▁ <empty>");
  }
  index();
  if (token_to_id_.size() != tokens_.size()) throw ValueError("vocabulary contains duplicate tokens");
  for (const auto& [a, b] : merges_) {
    if (!token_to_id_.contains(a + b)) throw ValueError("merge result '" + a + b + "' missing from tokens");
  }
}

void BpeVocab::index() {
  token_to_id_.clear();
  merge_rank_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) token_to_id_.emplace(tokens_[i], i);
  for (std::size_t r = 0; r < merges_.size(); ++r) merge_rank_.emplace(merges_[r], r);
}

std::optional<std::size_t> BpeVocab::id_of(std::string_view token) const {
  const auto it = token_to_id_.find(token);
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

BpeVocab BpeVocab::train(const std::vector<CleanTweet>& corpus, std::size_t vocab_size) {
  std::map<std::string, long> word_freq;
  for (const auto& tweet : corpus) {
    for (const auto& tok : tweet.tokens) {
      if (tok == kEmptyPlaceholder) continue;
      ++word_freq[tok];
    }
  }
  if (word_freq.empty()) throw ValueError("bpe_train: empty corpus");

  std::set<std::string> alphabet;
  for (const auto& [word, _] : word_freq) {
    for (auto& ch : utf8_chars(word)) alphabet.insert(std::move(ch));
  }
  if (vocab_size <= alphabet.size() + kReservedCount) {
    throw ValueError("bpe_train: vocab_size " + std::to_string(vocab_size) + " must exceed alphabet size " +
                     std::to_string(alphabet.size()) + " plus " + std::to_string(kReservedCount) + " reserved ids");
  }

  BpeVocab vocab;
  std::vector<std::string> symbols;  // interned symbol strings
  std::unordered_map<std::string, std::uint32_t> symbol_id;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = symbol_id.emplace(s, static_cast<std::uint32_t>(symbols.size()));
    if (inserted) symbols.push_back(s);
    return it->second;
  };
  for (const auto& ch : alphabet) {
    intern(ch);
    vocab.tokens_.push_back(ch);
  }

  std::vector<std::vector<std::uint32_t>> words;
  std::vector<long> freqs;
  for (const auto& [word, freq] : word_freq) {
    std::vector<std::uint32_t> syms;
    for (const auto& ch : utf8_chars(word)) syms.push_back(symbol_id.at(ch));
    words.push_back(std::move(syms));
    freqs.push_back(freq);
  }

  PairTable table(symbols);
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t i = 0; i + 1 < words[w].size(); ++i) table.add(make_key(words[w][i], words[w][i + 1]), freqs[w], w);
  }

  std::set<std::string> present(vocab.tokens_.begin(), vocab.tokens_.end());
  while (vocab.tokens_.size() < vocab_size) {
    const auto best = table.best();
    if (!best || best->second < 2) break;
    const PairKey key = best->first;
    const std::uint32_t a = key_left(key);
    const std::uint32_t b = key_right(key);
    const std::string left = symbols[a];
    const std::string right = symbols[b];
    const std::uint32_t merged = intern(left + right);
    vocab.merges_.emplace_back(left, right);
    if (present.insert(left + right).second) vocab.tokens_.push_back(left + right);

    for (std::size_t w : table.words_with(key)) {
      auto& word = words[w];
      for (std::size_t i = 0; i + 1 < word.size(); ++i) table.add(make_key(word[i], word[i + 1]), -freqs[w], w);
      merge_in_place(word, a, b, merged);
      for (std::size_t i = 0; i + 1 < word.size(); ++i) table.add(make_key(word[i], word[i + 1]), freqs[w], w);
    }
  }
  vocab.index();
  return vocab;
}

std::vector<std::string> BpeVocab::segment(std::string_view word) const {
  std::vector<std::string> pieces = utf8_chars(word);
  while (pieces.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
      const auto it = merge_rank_.find(Merge{pieces[i], pieces[i + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const Merge& m = merges_[best_rank];
    std::vector<std::string> next;
    next.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (i >= best_at && i + 1 < pieces.size() && pieces[i] == m.first && pieces[i + 1] == m.second) {
        next.push_back(pieces[i] + pieces[i + 1]);
        ++i;
      } else {
        next.push_back(std::move(pieces[i]));
      }
    }
    pieces = std::move(next);
  }
  return pieces;
}

SubwordSequence BpeVocab::encode(const CleanTweet& tweet, std::size_t max_len) const {
  if (max_len == 0) throw ValueError("encode: max_len must be positive");
  std::vector<std::size_t> real;
  for (std::size_t k = 0; k < tweet.tokens.size(); ++k) {
    if (k) real.push_back(kBoundaryId);
    const auto& tok = tweet.tokens[k];
    if (tok == kEmptyPlaceholder) {
      real.push_back(kEmptyId);
      continue;
    }
    for (const auto& piece : segment(tok)) real.push_back(id_of(piece).value_or(kUnknownId));
  }
  if (real.empty()) real.push_back(kEmptyId);

  SubwordSequence seq;
  seq.n = std::min(real.size(), max_len);
  seq.ids.assign(max_len, kPadId);
  seq.mask.assign(max_len, false);
  for (std::size_t t = 0; t < seq.n; ++t) {
    seq.ids[t] = real[t];
    seq.mask[t] = true;
  }
  return seq;
}

std::string BpeVocab::decode(const std::vector<std::size_t>& ids) const {
  std::string out;
  for (std::size_t id : ids) {
    if (id == kPadId) continue;
    if (id == kBoundaryId) {
      out += ' ';
    } else if (id < tokens_.size()) {
      out += tokens_[id];
    } else {
      out += kUnknownToken;
    }
  }
  return out;
}

std::string BpeVocab::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = kVocabFormatVersion;
  j["merges"] = nlohmann::json::array();
  for (const auto& [a, b] : merges_) j["merges"].push_back({a, b});
  j["tokens"] = tokens_;
  return j.dump() + "\n";
}

BpeVocab BpeVocab::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("vocabulary is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version") || j["version"] != kVocabFormatVersion) {
    throw LoadError("unsupported vocabulary version");
  }
  try {
    std::vector<Merge> merges;
    for (const auto& m : j.at("merges")) {
      if (!m.is_array() || m.size() != 2) throw LoadError("merge entries must be [left, right] pairs");
      merges.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
    }
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    return BpeVocab(std::move(merges), std::move(tokens));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed vocabulary: ") + e.what());
  } catch (const ValueError& e) {
    throw LoadError(std::string("malformed vocabulary: ") + e.what());
  }
}

void BpeVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary to " + path.string());
  out << to_json();
  if (!out) throw Error("failed writing vocabulary to " + path.string());
}

BpeVocab BpeVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open vocabulary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string BpeVocab::fingerprint() const { return fnv1a_hex(to_json()); }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cmsent
