#include "cmsent/embedding.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>

#include "cmsent/errors.hpp"
#include "cmsent/numerics.hpp"

namespace cmsent {

EmbeddingTable init_embedding(std::size_t vocab_size, std::size_t dim, std::uint64_t seed, bool trainable) {
  if (vocab_size <= kReservedCount) throw ValueError("embedding needs more rows than reserved ids");
  EmbeddingTable emb{Tensor({vocab_size, dim}), trainable};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-kEmbeddingInitRange, kEmbeddingInitRange);
  for (double& v : emb.table.data()) v = dist(rng);
  for (double& v : emb.table.row(kPadId)) v = 0.0;
  return emb;
}

Tensor embed(const SubwordSequence& seq, const EmbeddingTable& table) {
  for (std::size_t id : seq.ids) {
    if (id >= table.vocab_size()) {
      throw IndexError("embed: id " + std::to_string(id) + " is outside the embedding table (" +
                       std::to_string(table.vocab_size()) + " rows)");
    }
  }
  return embedding_lookup(table.table, seq.ids);
}

void embed_backward(const SubwordSequence& seq, const Tensor& dout, Tensor& dtable) {
  const std::size_t D = dtable.dim(1);
  for (std::size_t t = 0; t < seq.ids.size() && t < dout.dim(0); ++t) {
    if (!seq.mask[t] || seq.ids[t] == kPadId) continue;
    const auto src = dout.row(t);
    auto dst = dtable.row(seq.ids[t]);
    for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
  }
}

ExternalEmbedding load_external(std::istream& in, const BpeVocab& vocab, std::size_t dim, std::uint64_t seed,
                                bool trainable) {
  ExternalEmbedding result{init_embedding(vocab.size(), dim, seed, trainable), 0, {}};
  std::map<std::size_t, std::size_t> first_seen;  // id -> line
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected 'token<TAB>v1 ... vD'", line_no);
    const std::string token = line.substr(0, tab);
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> vec;
    std::string field;
    while (values >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("'" + field + "' is not a number", line_no);
      }
    }
    if (vec.size() != dim) {
      throw ParseError("vector has " + std::to_string(vec.size()) + " components, expected " + std::to_string(dim),
                       line_no);
    }
    const auto id = vocab.id_of(token);
    if (!id) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": token '" + token + "' not in vocabulary");
      continue;
    }
    if (*id == kPadId) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": pad row is fixed at zero, ignored");
      continue;
    }
    if (auto [it, fresh] = first_seen.emplace(*id, line_no); !fresh) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": token '" + token +
                                "' repeats line " + std::to_string(it->second) + ", last occurrence wins");
    } else {
      ++result.rows_set;
    }
    std::copy(vec.begin(), vec.end(), result.table.table.row(*id).begin());
  }
  return result;
}

ExternalEmbedding load_external(const std::filesystem::path& path, const BpeVocab& vocab, std::size_t dim,
                                std::uint64_t seed, bool trainable) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file " + path.string());
  return load_external(in, vocab, dim, seed, trainable);
}

}  // namespace cmsent
