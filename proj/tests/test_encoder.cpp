#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "symrel/encoder.hpp"
#include "symrel/error.hpp"

using namespace symrel;
using namespace symrel::testing;

namespace {

// d = 1, |V| = 4, hand-set weights.
EncoderParams tiny_params() {
  EncoderParams p;
  p.dim = 1;
  p.vocab_size = 4;
  p.embedding = {0, 0, 0.3, 0.3, 0.5, -1, 2, 0.25};
  p.projection = {1, 0.5, -0.25, 2};
  p.bias = {0.1, -0.2};
  return p;
}

}  // namespace

TEST_CASE("tokenization") {
  const std::vector<std::string> texts = {"Q7024230 is part of Q2231347.", "Alice is a sibling of Bob."};
  const auto vocab = Vocabulary::build(texts);
  CHECK(vocab.token(Vocabulary::kUnk) == "<unk>");
  CHECK(vocab.token(Vocabulary::kSep) == "<sep>");

  const auto ids = vocab.tokenize("Q7024230 is part of Q2231347.");
  REQUIRE(ids.size() == 6);
  CHECK(vocab.token(ids[0]) == "q7024230");
  CHECK(vocab.token(ids[5]) == ".");
  CHECK(vocab.tokenize("") .empty());
  CHECK(vocab.tokenize("   ").empty());
  CHECK(vocab.tokenize("zebra") == std::vector<TokenId>{Vocabulary::kUnk});
  const auto rep = vocab.tokenize("is IS is");
  CHECK(rep[0] == rep[1]);
  CHECK(rep[1] == rep[2]);
  CHECK(vocab.tokenize("X has part(s) that") .size() == 4);
}

TEST_CASE("split_words detaches trailing punctuation only") {
  CHECK(split_words("Bob is a child of Alice.") ==
        std::vector<std::string>{"bob", "is", "a", "child", "of", "alice", "."});
  CHECK(split_words("part(s)") == std::vector<std::string>{"part(s)"});
  CHECK(split_words("a,b") == std::vector<std::string>{"a,b"});
  CHECK(split_words("end?!") == std::vector<std::string>{"end", "?", "!"});
}

TEST_CASE("vocabulary round trip and validation") {
  const auto v = Vocabulary::build(std::vector<std::string>{"b a", "c"});
  const auto w = Vocabulary::from_tokens(v.tokens());
  CHECK(w.tokens() == v.tokens());
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), DataError);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<unk>", "<sep>", "a", "a"}), DataError);
}

TEST_CASE("init_params") {
  const auto a = init_params(7, 4, 10, 0.1);
  CHECK(a == init_params(7, 4, 10, 0.1));
  CHECK_FALSE(a == init_params(8, 4, 10, 0.1));
  CHECK(a.embedding.size() == 10 * 8);
  CHECK(a.projection.size() == 64);
  for (double b : a.bias) CHECK(b == 0.0);
  for (double e : a.embedding) {
    CHECK(e >= -0.1);
    CHECK(e < 0.1);
  }

  const auto z = init_params(7, 3, 5, 0.0);
  for (double e : z.embedding) CHECK(e == 0.0);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) CHECK(z.projection[r * 6 + c] == (r == c ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(init_params(1, 0, 5, 0.1), UsageError);
  CHECK_THROWS_AS(init_params(1, 2, 1, 0.1), UsageError);
}

TEST_CASE("encode_single forward values") {
  const auto p = tiny_params();
  SUBCASE("single token is projection of its embedding plus bias") {
    const auto e = embed(p, std::vector<TokenId>{2});
    // W (0.5, -1) + b = (0.5 - 0.5 + 0.1, -0.125 - 2 - 0.2)
    CHECK(e[0].real() == doctest::Approx(0.1));
    CHECK(e[0].imag() == doctest::Approx(-2.325));
  }
  SUBCASE("signed halves, frozen value") {
    // numpy oracle: tokens [2, 3, 3] -> (+e2 + e3 - e3) / 3, then W z + b
    const auto e = embed(p, std::vector<TokenId>{2, 3, 3});
    CHECK(e[0].real() == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(e[0].imag() == doctest::Approx(-0.90833333333333321).epsilon(1e-14));
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(encode_single(p, std::vector<TokenId>{}), DataError);
  }
  SUBCASE("token outside the vocabulary") {
    CHECK_THROWS_AS(encode_single(p, std::vector<TokenId>{9}), DimensionError);
  }
}

TEST_CASE("pooling weights") {
  CHECK(pool_weights(std::vector<TokenId>{5, 6, 7, 8}) ==
        std::vector<double>{0.25, 0.25, -0.25, -0.25});
  CHECK(pool_weights(std::vector<TokenId>{5, 6, 7}) ==
        std::vector<double>{1.0 / 3, 1.0 / 3, -1.0 / 3});
  // A SEP-joined pair is a plain mean.
  CHECK(pool_weights(std::vector<TokenId>{5, Vocabulary::kSep, 6, 7}) ==
        std::vector<double>(4, 0.25));
}

TEST_CASE("pooling invariances") {
  const auto p = init_params(3, 4, 12, 0.5);
  // Permuting tokens within each half leaves the encoding unchanged.
  const std::vector<TokenId> s = {2, 3, 4, 5, 6, 7};
  const std::vector<TokenId> s_perm = {4, 2, 3, 7, 5, 6};
  const auto a = embed(p, s);
  const auto b = embed(p, s_perm);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].real() == doctest::Approx(b[i].real()).epsilon(1e-14));
    CHECK(a[i].imag() == doctest::Approx(b[i].imag()).epsilon(1e-14));
  }
  // Swapping subject and object (first and last token) changes it.
  const std::vector<TokenId> swapped = {7, 3, 4, 5, 6, 2};
  CHECK_FALSE(embed(p, swapped) == a);
}

TEST_CASE("encode_pair") {
  const auto p = tiny_params();
  SUBCASE("plain mean over premise, SEP, hypothesis; frozen value") {
    const auto enc = encode_pair(p, std::vector<TokenId>{2}, std::vector<TokenId>{3});
    REQUIRE(enc.label.dim() == 1);
    CHECK(enc.label[0] == doctest::Approx(-0.65316931582658644).epsilon(1e-14));
    CHECK(enc.tape.output[0].real() == doctest::Approx(0.95833333333333326).epsilon(1e-14));
  }
  SUBCASE("deterministic, phases in range, direction-sensitive in general") {
    const auto q = init_params(11, 8, 30, 0.3);
    Rng rng(4);
    bool differs = false;
    for (int i = 0; i < 20; ++i) {
      const auto a = random_tokens(rng, 5, 30);
      const auto b = random_tokens(rng, 4, 30);
      const auto x = encode_pair(q, a, b).label;
      CHECK(x == encode_pair(q, a, b).label);
      for (double t : x.phases()) {
        CHECK(t >= -kPi);
        CHECK(t < kPi);
      }
      differs = differs || !(x == encode_pair(q, b, a).label);
    }
    CHECK(differs);
  }
  SUBCASE("empty side") {
    CHECK_THROWS_AS(encode_pair(p, std::vector<TokenId>{}, std::vector<TokenId>{2}), DataError);
    CHECK_THROWS_AS(encode_pair(p, std::vector<TokenId>{2}, std::vector<TokenId>{}), DataError);
  }
}

TEST_CASE("backward") {
  SUBCASE("zero upstream gives zero gradients") {
    const auto p = init_params(1, 4, 10, 0.2);
    const auto enc = encode_single(p, std::vector<TokenId>{2, 3, 4});
    CHECK(backward(p, enc.tape, std::vector<double>(8, 0.0)).all_zero());
  }
  SUBCASE("mean pooling spreads 1/n onto every token row") {
    // Identity projection: d out / d embedding = pooling weight.
    const auto p = init_params(1, 2, 6, 0.0);
    const auto enc = encode_pair(p, std::vector<TokenId>{2, 3}, std::vector<TokenId>{4});
    // Phase gradient upstream would mix components; use the complex path.
    const auto single = encode_single(p, std::vector<TokenId>{2, 3, Vocabulary::kSep, 4});
    const auto g = backward(p, single.tape, std::vector<double>{1, 0, 0, 0});
    for (TokenId t : {2u, 3u, 1u, 4u}) CHECK(g.embedding[t * 4] == doctest::Approx(0.25));
    CHECK(g.embedding[5 * 4] == 0.0);
    CHECK(enc.tape.ops.back() == ComputationTape::Op::Phase);
  }
  SUBCASE("upstream size must match the output kind") {
    const auto p = init_params(1, 4, 10, 0.2);
    const auto single = encode_single(p, std::vector<TokenId>{2, 3});
    CHECK_THROWS_AS(backward(p, single.tape, std::vector<double>(4, 1.0)), DimensionError);
    const auto pair = encode_pair(p, std::vector<TokenId>{2}, std::vector<TokenId>{3});
    CHECK_THROWS_AS(backward(p, pair.tape, std::vector<double>(8, 1.0)), DimensionError);
  }
  SUBCASE("tape recorded with other shapes") {
    const auto p = init_params(1, 4, 10, 0.2);
    const auto q = init_params(1, 3, 10, 0.2);
    const auto single = encode_single(p, std::vector<TokenId>{2, 3});
    CHECK_THROWS_AS(backward(q, single.tape, std::vector<double>(8, 1.0)), DimensionError);
  }
}

TEST_CASE("backward matches central finite differences (d = 4, 5 tokens)") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = init_params(100 + trial, 4, 9, 0.5);
    const auto tokens = random_tokens(rng, 5, 9);
    std::vector<double> w(8);
    for (auto& x : w) x = rng.uniform(-1, 1);

    // Single path: L = w . realized(output)
    const auto enc = encode_single(params, tokens);
    const auto g = backward(params, enc.tape, w);
    const double worst = worst_fd_error(params.tensors(), g.tensors(), [&] {
      const auto out = embed(params, tokens);
      double s = 0.0;
      for (std::size_t i = 0; i < 8; ++i) s += w[i] * out.realized()[i];
      return s;
    });
    REQUIRE(worst < 1e-4);

    // Pair path: L = w[:4] . phases
    const auto prem = random_tokens(rng, 3, 9);
    const auto hyp = random_tokens(rng, 2, 9);
    const std::vector<double> wp(w.begin(), w.begin() + 4);
    const auto pe = encode_pair(params, prem, hyp);
    const auto gp = backward(params, pe.tape, wp);
    const auto base = pe.label;
    const double worst_pair = worst_fd_error(params.tensors(), gp.tensors(), [&] {
      const auto lab = encode_pair(params, prem, hyp).label;
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += wp[i] * (base[i] + phase_difference(lab[i], base[i]));
      return s;
    });
    REQUIRE(worst_pair < 1e-4);
  }
}

TEST_CASE("gradient buffer helpers") {
  const auto p = init_params(2, 2, 5, 0.1);
  auto g = ParamGradients::zeros_like(p);
  CHECK(g.all_zero());
  auto h = ParamGradients::zeros_like(p);
  h.bias[0] = 3;
  h.bias[1] = 4;
  CHECK(h.norm() == doctest::Approx(5));
  g.add_scaled(h, 2.0);
  CHECK(g.bias[0] == 6);
  g.scale(0.5);
  CHECK(g.bias[1] == 4);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto dir = std::filesystem::temp_directory_path() / "symrel_test_encoder";
  std::filesystem::remove_all(dir);
  const auto vocab = Vocabulary::build(std::vector<std::string>{"alpha beta gamma delta"});
  const auto params = init_params(99, 5, vocab.size(), 0.37);
  save_checkpoint(dir / "enc.json", params, vocab);
  const auto back = load_checkpoint(dir / "enc.json");
  CHECK(back.params == params);
  CHECK(back.vocab.tokens() == vocab.tokens());
  const auto toks = vocab.tokenize("alpha gamma delta");
  CHECK(embed(back.params, toks) == embed(params, toks));

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), DataError);
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << "{\"format\": \"something-else\"}";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), DataError);
  std::filesystem::remove_all(dir);
}
