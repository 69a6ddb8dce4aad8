#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cmsent/errors.hpp"
#include "cmsent/preprocess.hpp"

namespace cmsent {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> fields;
  std::istringstream in{std::string(line)};
  std::string field;
  while (in >> field) fields.push_back(field);
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

bool is_meta_line(std::string_view line) {
  return line.size() > 4 && line.substr(0, 4) == "meta" && (line[4] == ' ' || line[4] == '\t');
}

}  // namespace

Lang classify_lang_tag(std::string_view tag) {
  const std::string t = lower(tag);
  if (t == "lang1" || t == "eng") return Lang::lang1;
  if (t == "lang2" || t == "hin" || t == "spa") return Lang::lang2;
  return Lang::other;
}

std::optional<Lang> parse_lang(std::string_view name) {
  if (name == "lang1") return Lang::lang1;
  if (name == "lang2") return Lang::lang2;
  if (name == "other") return Lang::other;
  return std::nullopt;
}

std::string_view lang_name(Lang lang) {
  switch (lang) {
    case Lang::lang1: return "lang1";
    case Lang::lang2: return "lang2";
    case Lang::other: return "other";
  }
  return "other";
}

std::vector<RawTweet> parse_corpus(std::istream& in) {
  std::vector<RawTweet> tweets;
  std::optional<RawTweet> current;
  std::size_t block_start = 0;

  auto finish = [&](std::size_t line_no) {
    if (!current) return;
    if (current->tokens.empty()) {
      throw ParseError("block for uid '" + current->uid + "' (started line " + std::to_string(block_start) +
                           ") has no tokens",
                       line_no);
    }
    tweets.push_back(std::move(*current));
    current.reset();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      finish(line_no);
      continue;
    }
    if (is_meta_line(line)) {
      if (current) throw ParseError("new 'meta' line without a blank separator", line_no);
      const auto fields = split_ws(line);
      if (fields.size() < 2 || fields.size() > 3) {
        throw ParseError("expected 'meta <uid> [<label>]'", line_no);
      }
      current.emplace();
      current->uid = fields[1];
      block_start = line_no;
      if (fields.size() == 3) {
        current->label = parse_label(fields[2]);
        if (!current->label) {
          throw ValueError("line " + std::to_string(line_no) + ": unknown label '" + fields[2] + "'");
        }
      }
      continue;
    }
    if (!current) throw ParseError("token line outside a 'meta' block", line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos ||
        tab + 1 == line.size()) {
      throw ParseError("expected '<token>\\t<lang>'", line_no);
    }
    TaggedToken tok;
    tok.text = line.substr(0, tab);
    tok.tag = line.substr(tab + 1);
    tok.lang = classify_lang_tag(tok.tag);
    current->tokens.push_back(std::move(tok));
  }
  finish(line_no + 1);
  return tweets;
}

std::vector<RawTweet> parse_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void serialize_corpus(std::ostream& out, const std::vector<RawTweet>& tweets) {
  for (const auto& tweet : tweets) {
    out << "meta\t" << tweet.uid;
    if (tweet.label) out << '\t' << label_name(*tweet.label);
    out << '\n';
    for (const auto& tok : tweet.tokens) out << tok.text << '\t' << tok.tag << '\n';
    out << '\n';
  }
}

}  // namespace cmsent
