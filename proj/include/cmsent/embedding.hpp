#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmsent/preprocess.hpp"
#include "cmsent/tensor.hpp"

namespace cmsent {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;
inline constexpr double kEmbeddingInitRange = 0.1;

// Trainable subword lookup. Row kPadId is all-zero and never updated.
struct EmbeddingTable {
  Tensor table;  // [V x D]
  bool trainable = true;

  std::size_t vocab_size() const { return table.dim(0); }
  std::size_t dim() const { return table.dim(1); }
};

/// Uniform in [-0.1, 0.1] from `seed`, pad row zeroed.
EmbeddingTable init_embedding(std::size_t vocab_size, std::size_t dim, std::uint64_t seed, bool trainable = true);

/// [T x D] rows for every id of `seq`; pad positions come out as zero rows.
Tensor embed(const SubwordSequence& seq, const EmbeddingTable& table);

/// Scatter-adds dout rows of real, non-pad positions into dtable.
void embed_backward(const SubwordSequence& seq, const Tensor& dout, Tensor& dtable);

struct ExternalEmbedding {
  EmbeddingTable table;
  std::size_t rows_set = 0;
  std::vector<std::string> warnings;
};

/// Reads `token<TAB>v1 v2 ... vD` lines. Listed vocabulary tokens overwrite
/// the randomly initialized rows; a repeated token keeps its last line.
/// A line whose vector length differs from `dim` raises ParseError.
ExternalEmbedding load_external(std::istream& in, const BpeVocab& vocab, std::size_t dim, std::uint64_t seed,
                                bool trainable = true);
ExternalEmbedding load_external(const std::filesystem::path& path, const BpeVocab& vocab, std::size_t dim,
                                std::uint64_t seed, bool trainable = true);

}  // namespace cmsent
