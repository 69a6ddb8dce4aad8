#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "cmsent/attention_classifier.hpp"
#include "cmsent/cnn_classifier.hpp"
#include "cmsent/embedding.hpp"
#include "cmsent/ensemble.hpp"
#include "cmsent/errors.hpp"
#include "gradient_cases.hpp"
#include "invariants.hpp"
#include "oracles.hpp"

using namespace cmsent;

namespace {

bool is_probability(const Tensor& p) {
  double s = 0.0;
  for (double v : p.data()) {
    if (!(v >= 0.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) < 1e-12;
}

BpeVocab small_vocab() {
  return BpeVocab::train({CleanTweet{"u", {"ab", "ab", "cd"}, std::nullopt}}, 20);
}

CnnParams zero_cnn(std::size_t D, std::size_t F) {
  std::mt19937_64 rng(0);
  return zeros_like(init_cnn(D, F, rng));
}

}  // namespace

// ---- embedding ----------------------------------------------------------

TEST_CASE("embed") {
  const auto table = init_embedding(8, 3, 42);
  SUBCASE("pad row is zero and positions beyond n embed to zero") {
    SubwordSequence seq{{0, 0, 0}, {false, false, false}, 0};
    CHECK(embed(seq, table) == Tensor({3, 3}));
  }
  SUBCASE("rows are gathered by id") {
    SubwordSequence seq{{3, 5, 0}, {true, true, false}, 2};
    const Tensor x = embed(seq, table);
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(x.at(0, d) == table.table.at(3, d));
      CHECK(x.at(1, d) == table.table.at(5, d));
      CHECK(x.at(2, d) == 0.0);
    }
  }
  SUBCASE("initialization is seeded and bounded") {
    CHECK(init_embedding(8, 3, 42).table == table.table);
    CHECK_FALSE(init_embedding(8, 3, 43).table == table.table);
    for (std::size_t i = 3; i < table.table.size(); ++i) CHECK(std::abs(table.table[i]) <= kEmbeddingInitRange);
  }
  SUBCASE("gradient reaches real non-pad rows only") {
    SubwordSequence seq{{4, 0, 4, 6}, {true, true, true, false}, 3};
    Tensor d({8, 3});
    embed_backward(seq, Tensor({4, 3}, 1.0), d);
    for (std::size_t r = 0; r < 8; ++r) {
      const double want = r == 4 ? 2.0 : 0.0;
      for (std::size_t c = 0; c < 3; ++c) CHECK(d.at(r, c) == want);
    }
  }
  SUBCASE("out-of-range id names the id") {
    SubwordSequence seq{{9}, {true}, 1};
    try {
      embed(seq, table);
      FAIL("expected IndexError");
    } catch (const IndexError& e) {
      CHECK(std::string(e.what()).find('9') != std::string::npos);
    }
  }
}

TEST_CASE("load_external") {
  const auto vocab = small_vocab();
  const std::size_t ab = vocab.id_of("ab").value();
  SUBCASE("one listed token") {
    std::istringstream in("ab\t0.5 -0.25\n");
    const auto ext = load_external(in, vocab, 2, 1);
    CHECK(ext.rows_set == 1);
    CHECK(ext.table.table.dim(0) == vocab.size());
    CHECK(ext.table.table.at(ab, 0) == 0.5);
    CHECK(ext.table.table.at(ab, 1) == -0.25);
  }
  SUBCASE("empty file falls back to the seeded initialization") {
    std::istringstream in("");
    const auto ext = load_external(in, vocab, 2, 1);
    CHECK(ext.rows_set == 0);
    CHECK(ext.table.table == init_embedding(vocab.size(), 2, 1).table);
  }
  SUBCASE("duplicates: last occurrence wins with a warning") {
    std::istringstream in("ab\t1 1\nab\t2 3\n");
    const auto ext = load_external(in, vocab, 2, 1);
    CHECK(ext.table.table.at(ab, 0) == 2.0);
    CHECK(ext.table.table.at(ab, 1) == 3.0);
    CHECK(ext.warnings.size() == 1);
  }
  SUBCASE("wrong dimension reports the line") {
    std::istringstream in("ab\t1 1\ncd\t1 2 3\n");
    try {
      load_external(in, vocab, 2, 1);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("frozen flag is carried") {
    std::istringstream in("");
    CHECK_FALSE(load_external(in, vocab, 2, 1, false).table.trainable);
  }
}

// ---- CNN ----------------------------------------------------------------

TEST_CASE("cnn_forward") {
  std::mt19937_64 rng(101);
  SUBCASE("single subword still yields a probability vector") {
    const auto params = oracle::random_cnn(3, 2, rng);
    const auto out = cnn_forward(oracle::random_tensor({1, 3}, rng), params, 1);
    CHECK(out.p_cnn.all_finite());
    CHECK(is_probability(out.p_cnn));
  }
  SUBCASE("zero params give a uniform output") {
    const auto out = cnn_forward(oracle::random_tensor({5, 3}, rng), zero_cnn(3, 2), 5);
    CHECK(out.logits == Tensor({3}));
    for (double v : out.p_cnn.data()) CHECK(v == doctest::Approx(1.0 / 3));
  }
  SUBCASE("equals the hand composition of the numerics ops") {
    const std::size_t T = 7, n = 6, D = 3, F = 2;
    const Tensor x = oracle::random_tensor({T, D}, rng);
    const auto params = oracle::random_cnn(D, F, rng);
    Tensor window({n, D});
    std::copy_n(x.data().begin(), n * D, window.data().begin());
    std::vector<double> pooled;
    for (const auto& bank : params.banks) {
      const auto pool = max_over_time(relu(oracle::naive_conv(window, bank.filters, bank.bias)));
      pooled.insert(pooled.end(), pool.values.data().begin(), pool.values.data().end());
    }
    const Tensor want = softmax(linear_forward(Tensor({pooled.size()}, pooled), params.fc_W, params.fc_b));
    const auto got = cnn_forward(x, params, n);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(got.p_cnn[c] - want[c]) < 1e-14);
  }
  SUBCASE("rows past n never influence the output") {
    const auto params = oracle::random_cnn(2, 3, rng);
    Tensor x = oracle::random_tensor({6, 2}, rng);
    const auto before = cnn_forward(x, params, 4);
    for (std::size_t i = 8; i < 12; ++i) x[i] = 100.0;
    CHECK(cnn_forward(x, params, 4).p_cnn == before.p_cnn);
  }
  SUBCASE("shuffling window rows leaves the pooled vector unchanged for width 1 statistics") {
    // Pooling is order-insensitive given the feature map rows.
    const Tensor fm = oracle::random_tensor({5, 4}, rng);
    Tensor shuffled = fm;
    const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 4; ++c) shuffled.at(r, c) = fm.at(perm[r], c);
    }
    CHECK(max_over_time(fm).values == max_over_time(shuffled).values);
  }
  SUBCASE("valid probabilities on random inputs") {
    for (int k = 0; k < 50; ++k) {
      const std::size_t n = 1 + rng() % 6;
      const auto params = oracle::random_cnn(3, 2, rng);
      CHECK(is_probability(cnn_forward(oracle::random_tensor({n + 2, 3}, rng, -3, 3), params, n).p_cnn));
    }
  }
}

TEST_CASE("cnn gradients") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    CHECK(gradcases::cnn(seed).max_relative_error < 1e-5);
    CHECK(gradcases::cnn(seed, 5, 3, 2, 2).max_relative_error < 1e-5);  // n < every width but 2
    CHECK(gradcases::cnn(seed, 6, 2, 3, 1, true).max_relative_error < 1e-5);
  }
}

// ---- attention ----------------------------------------------------------

TEST_CASE("attend") {
  SUBCASE("single row") {
    const auto att = attend(Tensor::matrix({{0.3, -2.0}}));
    CHECK(att.a == Tensor::vector({1.0}));
    CHECK(att.h == Tensor::vector({0.3, -2.0}));
  }
  SUBCASE("equal rows give uniform weights") {
    const auto att = attend(Tensor::matrix({{1, 2}, {1, 2}, {1, 2}, {1, 2}}));
    for (double v : att.a.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(att.h[0] == doctest::Approx(1.0));
    CHECK(att.h[1] == doctest::Approx(2.0));
  }
  SUBCASE("hand computed two-row case") {
    const auto att = attend(Tensor::matrix({{1, 0}, {0, 1}}));
    CHECK(att.e == Tensor::vector({0, 1}));
    const double a0 = 1 / (1 + std::exp(1.0));
    CHECK(std::abs(att.a[0] - a0) < 1e-15);
    CHECK(std::abs(att.a[1] - (1 - a0)) < 1e-15);
    CHECK(std::abs(att.h[0] - a0) < 1e-15);
    CHECK(std::abs(att.h[1] - (1 - a0)) < 1e-15);
  }
  SUBCASE("scaling annotations by c scales scores by c squared") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
      Tensor K = oracle::random_tensor({4, 3}, rng);
      const auto base = attend(K);
      const double c = 0.5 + (rng() % 100) / 25.0;
      for (double& v : K.data()) v *= c;
      const auto scaled = attend(K);
      for (std::size_t i = 0; i < 4; ++i) CHECK(scaled.e[i] == doctest::Approx(c * c * base.e[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("bilstm_annotate") {
  std::mt19937_64 rng(13);
  SUBCASE("one position runs each cell once") {
    const auto params = oracle::random_bilstm(2, 3, rng);
    const Tensor x = oracle::random_tensor({1, 2}, rng);
    const Tensor K = bilstm_annotate(x, {true}, params);
    const Tensor zero({3});
    const auto f = lstm_cell_forward(Tensor({2}, std::vector<double>(x.data().begin(), x.data().end())), zero, zero, params.forward);
    const auto b = lstm_cell_forward(Tensor({2}, std::vector<double>(x.data().begin(), x.data().end())), zero, zero, params.backward);
    REQUIRE(K.shape() == std::vector<std::size_t>{1, 6});
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(K.at(0, j) == f.h[j]);
      CHECK(K.at(0, 3 + j) == b.h[j]);
    }
  }
  SUBCASE("zero params give zero annotations") {
    const auto params = zeros_like(oracle::random_bilstm(2, 3, rng));
    CHECK(bilstm_annotate(oracle::random_tensor({4, 2}, rng), std::vector<bool>(4, true), params) == Tensor({4, 6}));
  }
  SUBCASE("reversed input with swapped cells swaps halves and reverses rows") {
    const std::size_t n = 5, D = 3, H = 2;
    const auto params = oracle::random_bilstm(D, H, rng);
    const Tensor x = oracle::random_tensor({n, D}, rng);
    Tensor xr({n, D});
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t d = 0; d < D; ++d) xr.at(t, d) = x.at(n - 1 - t, d);
    }
    BiLstmParams swapped = params;
    std::swap(swapped.forward, swapped.backward);
    const std::vector<bool> mask(n, true);
    const Tensor K = bilstm_annotate(x, mask, params);
    const Tensor Kr = bilstm_annotate(xr, mask, swapped);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t j = 0; j < H; ++j) {
        CHECK(Kr.at(t, j) == K.at(n - 1 - t, H + j));
        CHECK(Kr.at(t, H + j) == K.at(n - 1 - t, j));
      }
    }
  }
  CHECK_THROWS_AS(bilstm_annotate(Tensor({2, 2}), {false, false}, oracle::random_bilstm(2, 2, rng)), SequenceError);
}

TEST_CASE("attn_forward") {
  std::mt19937_64 rng(17);
  SUBCASE("zero params give a uniform output") {
    const auto params = zeros_like(oracle::random_bilstm(3, 2, rng));
    const auto out = attn_forward(oracle::random_tensor({4, 3}, rng), std::vector<bool>(4, true), params);
    CHECK(out.logits == Tensor({3}));
    for (double v : out.p_att.data()) CHECK(v == doctest::Approx(1.0 / 3));
  }
  SUBCASE("equals the hand composition of annotate, attend and the FC layer") {
    const auto params = oracle::random_bilstm(3, 2, rng);
    const Tensor x = oracle::random_tensor({5, 3}, rng);
    const std::vector<bool> mask = {true, true, true, false, false};
    const Tensor K = bilstm_annotate(x, mask, params);
    const auto att = attend(K);
    const Tensor want = softmax(linear_forward(att.h, params.fc_W, params.fc_b));
    const auto out = attn_forward(x, mask, params);
    CHECK(out.K == K);
    CHECK(out.a == att.a);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.p_att[c] - want[c]) < 1e-15);
  }
  SUBCASE("invariants over random instances") { CHECK(invariants::attention(200, 3) == 0); }
}

// The two-point check at eps 1e-6 has an absolute roundoff floor near 1e-10,
// which exceeds 1e-5 relative on the near-zero recurrent-weight coordinates
// this objective produces; the sixth-order stencil resolves them.
TEST_CASE("attention gradients") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto o = gradcases::precise();
    CHECK(gradcases::attention(seed, 4, 3, 3, 4, false, o).max_relative_error < 1e-5);
    CHECK(gradcases::attention(seed, 6, 2, 2, 3, false, o).max_relative_error < 1e-5);  // padded tail
    CHECK(gradcases::attention(seed, 3, 3, 4, 1, true, o).max_relative_error < 1e-5);
  }
}

// ---- ensemble -----------------------------------------------------------

TEST_CASE("combine") {
  SUBCASE("calculator example") {
    const auto p = combine(Tensor::vector({0.5, 0.3, 0.2}), Tensor::vector({0.2, 0.5, 0.3}));
    CHECK(p.raw[0] == doctest::Approx(0.10));
    CHECK(p.raw[1] == doctest::Approx(0.15));
    CHECK(p.raw[2] == doctest::Approx(0.06));
    CHECK(p.p_final[0] == doctest::Approx(0.10 / 0.31).epsilon(1e-12));
    CHECK(p.p_final[1] == doctest::Approx(0.15 / 0.31).epsilon(1e-12));
    CHECK(p.p_final[2] == doctest::Approx(0.06 / 0.31).epsilon(1e-12));
    CHECK(std::abs(p.p_final[0] - 0.3226) < 5e-5);
    CHECK(std::abs(p.p_final[1] - 0.4839) < 5e-5);
    CHECK(std::abs(p.p_final[2] - 0.1935) < 5e-5);
    CHECK(p.label == Label::neutral);
    CHECK_FALSE(p.tie);
  }
  SUBCASE("uniform co-factor and squaring keep the argmax") {
    const Tensor u = Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3});
    const Tensor p = Tensor::vector({0.1, 0.2, 0.7});
    CHECK(combine(p, u).label == Label::positive);
    CHECK(combine(p, p).label == Label::positive);
  }
  SUBCASE("veto") {
    const auto p = combine(Tensor::vector({0.0, 0.9, 0.1}), Tensor::vector({0.98, 0.01, 0.01}));
    CHECK(p.p_final[0] == 0.0);
    CHECK(p.label == Label::neutral);
  }
  SUBCASE("total veto yields a uniform tie") {
    const auto p = combine(Tensor::vector({1, 0, 0}), Tensor::vector({0, 1, 0}));
    CHECK(p.tie);
    CHECK(p.label == Label::negative);
    for (double v : p.p_final.data()) CHECK(v == doctest::Approx(1.0 / 3));
  }
  SUBCASE("ties break toward the earlier class") {
    const auto p = combine(Tensor::vector({0.4, 0.4, 0.2}), Tensor::vector({0.4, 0.4, 0.2}));
    CHECK(p.tie);
    CHECK(p.label == Label::negative);
  }
  SUBCASE("non-probability input") {
    CHECK_THROWS_AS(combine(Tensor::vector({0.5, 0.5, 0.5}), Tensor::vector({0.2, 0.5, 0.3})), ValueError);
    CHECK_THROWS_AS(combine(Tensor::vector({1.2, -0.2, 0.0}), Tensor::vector({0.2, 0.5, 0.3})), ValueError);
  }
  SUBCASE("weighted average mode") {
    const auto p = combine(Tensor::vector({0.5, 0.3, 0.2}), Tensor::vector({0.2, 0.5, 0.3}), EnsembleMode::weighted_average);
    CHECK(p.p_final[0] == doctest::Approx(0.35));
    CHECK(p.p_final[1] == doctest::Approx(0.40));
    CHECK(p.label == Label::neutral);
    CHECK(parse_ensemble_mode("weighted_average") == EnsembleMode::weighted_average);
    CHECK_FALSE(parse_ensemble_mode("mean").has_value());
  }
  SUBCASE("invariants on a coarse grid and random pairs") { CHECK(invariants::ensemble(0.1, 2000, 9) == 0); }
  SUBCASE("JSON carries every field") {
    const auto j = prediction_json("42", combine(Tensor::vector({0.5, 0.3, 0.2}), Tensor::vector({0.2, 0.5, 0.3})));
    for (const char* key : {"\"uid\"", "\"p_cnn\"", "\"p_att\"", "\"p_final\"", "\"class\"", "\"tie_flag\""}) {
      CHECK(j.find(key) != std::string::npos);
    }
    CHECK(j.find("\"neutral\"") != std::string::npos);
  }
}
