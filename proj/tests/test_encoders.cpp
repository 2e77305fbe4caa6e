#include <doctest.h>

#include <cmath>

#include "model_oracles.hpp"
#include "pmatch/error.hpp"
#include "pmatch/model.hpp"
#include "pmatch/model_io.hpp"
#include "pmatch/tfidf.hpp"
#include "pmatch/vocab.hpp"

using namespace pmatch;

namespace {

EncoderConfig pooled(std::uint32_t d, Pooling pooling = Pooling::Max) {
  EncoderConfig c;
  c.kind = EncoderKind::PooledEmbedding;
  c.d = d;
  c.pooling = pooling;
  return c;
}

EncoderConfig attention(std::uint32_t d, std::uint32_t layers, std::uint32_t heads, std::uint32_t dk,
                        Pooling pooling = Pooling::Max) {
  EncoderConfig c;
  c.kind = EncoderKind::SelfAttentive;
  c.d = d;
  c.layers = layers;
  c.heads = heads;
  c.d_k = dk;
  c.pooling = pooling;
  return c;
}

void check_encode_gradient(ModelState& state, const TokenIds& ids, Rng& rng) {
  std::vector<double> upstream(state.dim());
  for (auto& u : upstream) u = rng.normal();
  EncodeCache cache;
  encode_ids(state, ids, &cache);
  auto grads = Gradients::zeros_like(state);
  backward_encode(state, cache, upstream, grads);
  const auto analytic = oracle::flatten(state, grads);
  const auto numeric = oracle::numeric_gradient(state, [&] {
    const auto v = encode_ids(state, ids);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += upstream[i] * v[i];
    return s;
  });
  REQUIRE(analytic.size() == numeric.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i]));
  CHECK(worst < 1e-4);
}

}  // namespace

TEST_CASE("vocabulary") {
  Corpus c;
  TokenList s, p;
  for (int i = 0; i < 5; ++i) s.push_back(Token::math("x"));
  s.push_back(Token::math("a"));
  p.push_back(Token::text("a"));
  p.push_back(Token::text("a"));
  c.pairs.push_back(oracle::make_pair("1", "a", s, p));

  const auto v1 = build_vocab(c, 1);
  CHECK(v1.size() == 4);
  CHECK(v1.id_of(Token::math("x")) == 1);
  CHECK(v1.id_of(Token::text("a")) == 2);
  CHECK(v1.id_of(Token::math("a")) == 3);
  CHECK(v1.id_of(Token::math("zzz")) == Vocabulary::kUnk);
  for (std::uint32_t id = 1; id < v1.size(); ++id) CHECK(v1.id_of(v1.token(id)) == id);

  const auto v6 = build_vocab(c, 6);
  CHECK_FALSE(v6.contains(Token::math("x")));
  CHECK(v6.encode({Token::math("x")}) == std::vector<std::uint32_t>{Vocabulary::kUnk});
  CHECK(build_vocab(c, 1) == v1);
  CHECK_THROWS_AS(build_vocab(Corpus{}, 1), Error);
}

TEST_CASE("tf-idf") {
  std::vector<TokenList> docs(9, TokenList{Token::text("the")});
  docs[0].push_back(Token::text("rare"));
  const auto stats = TfIdfStats::from_documents(docs);
  const auto the = static_cast<std::uint32_t>(stats.term_id(Token::text("the")));
  CHECK(stats.idf(the) == doctest::Approx(std::log(0.9)).epsilon(1e-12));
  const auto v = tfidf_encode({Token::text("the"), Token::text("the")}, stats);
  REQUIRE(v.size() == 1);
  CHECK(v[0].second == doctest::Approx(2.0 * std::log(0.9)));
  CHECK(v[0].second < 0.0);

  CHECK(tfidf_encode({Token::text("unseen")}, stats).empty());
  CHECK(cosine(tfidf_encode({Token::text("unseen")}, stats), v) == 0.0);
  const auto d = tfidf_encode(docs[0], stats);
  CHECK(cosine(d, d) == doctest::Approx(1.0));
  CHECK_THROWS_AS(tfidf_encode(docs[0], TfIdfStats{}), Error);

  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    SparseVector a, b;
    for (std::uint32_t k = 0; k < 6; ++k) {
      if (rng.below(2)) a.emplace_back(k, rng.normal());
      if (rng.below(2)) b.emplace_back(k, rng.normal());
    }
    CHECK(cosine(a, b) == doctest::Approx(cosine(b, a)).epsilon(1e-12));
    auto scaled = a;
    for (auto& [k, w] : scaled) w *= 3.5;
    CHECK(cosine(scaled, b) == doctest::Approx(cosine(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("pooled encoders") {
  Rng rng(1);
  auto max_state = oracle::random_model(rng, pooled(4, Pooling::Max));
  const auto one = encode_ids(max_state, {3});
  CHECK(std::equal(one.begin(), one.end(), max_state.embeddings.row(3).begin()));

  auto mean_state = oracle::random_model(rng, pooled(4, Pooling::Mean));
  const auto twice = encode_ids(mean_state, {2, 2});
  const auto single = encode_ids(mean_state, {2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(twice[i] == doctest::Approx(single[i]));

  CHECK_THROWS_AS(encode(max_state, TokenList{}), Error);
  // All-UNK documents are valid.
  CHECK(encode(max_state, {Token::math("nowhere")}).size() == 4);
}

TEST_CASE("zeroed attention reduces to pooled embeddings") {
  Rng rng(2);
  for (auto pooling : {Pooling::Max, Pooling::Mean}) {
    auto base = oracle::random_model(rng, pooled(6, pooling));
    auto attn = oracle::random_model(rng, attention(6, 2, 3, 4, pooling));
    attn.embeddings = base.embeddings;
    for (auto& layer : attn.layers) {
      for (auto* group : {&layer.wq, &layer.wk, &layer.wv}) {
        for (auto& m : *group) std::fill(m.values().begin(), m.values().end(), 0.0);
      }
      std::fill(layer.wo.values().begin(), layer.wo.values().end(), 0.0);
    }
    const TokenIds ids = {1, 4, 2, 7, 0};
    const auto a = encode_ids(attn, ids);
    const auto b = encode_ids(base, ids);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("max pooling is order blind without attention") {
  Rng rng(3);
  for (auto config : {pooled(5), attention(4, 0, 2, 2)}) {
    auto state = oracle::random_model(rng, config);
    for (int t = 0; t < 50; ++t) {
      auto ids = oracle::random_ids(rng, 8, 7);
      const auto before = encode_ids(state, ids);
      rng.shuffle(std::span(ids));
      CHECK(encode_ids(state, ids) == before);
    }
  }
  // With attention, positions matter.
  auto state = oracle::random_model(rng, attention(4, 1, 2, 2));
  CHECK(encode_ids(state, {1, 2, 3}) != encode_ids(state, {3, 2, 1}));
}

TEST_CASE("attention rows are distributions") {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    auto state = oracle::random_model(rng, attention(6, 2, 2, 3));
    EncodeCache cache;
    encode_ids(state, oracle::random_ids(rng, 8, 9), &cache);
    for (const auto& layer : cache.layers) {
      for (const auto& a : layer.attn) {
        for (std::size_t r = 0; r < a.rows(); ++r) {
          double s = 0.0;
          for (double v : a.row(r)) {
            CHECK(v >= 0.0);
            s += v;
          }
          CHECK(std::abs(s - 1.0) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("bilinear score") {
  BilinearHead head{Matrix::identity(2), 0.5};
  const std::vector<double> s = {1, 2}, p = {3, 4}, zero = {0, 0};
  CHECK(score(head, s, p) == doctest::Approx(11.5));
  CHECK(score(head, zero, p) == 0.5);
  head.b = 0.0;
  CHECK(score(head, s, p) == 11.0);
  const std::vector<double> bad = {1, 2, 3};
  CHECK_THROWS_AS(score(head, bad, p), Error);
}

TEST_CASE("head gradients are exact") {
  Rng rng(5);
  auto state = oracle::random_model(rng, pooled(3));
  std::vector<const TokenIds*> ss, ps;
  const TokenIds s = {1, 2}, p = {4};
  ss.push_back(&s);
  ps.push_back(&p);
  const auto fwd = forward_batch(state, ss, ps);
  Matrix upstream(1, 1, 1.0);
  const auto g = backward_batch(state, fwd, upstream);
  CHECK(g.b == 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(g.w(i, j) == doctest::Approx(fwd.statements(0, i) * fwd.proofs(0, j)));
  }
}

TEST_CASE("encoder gradients match finite differences") {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    auto state = oracle::random_model(rng, oracle::random_config(rng));
    check_encode_gradient(state, oracle::random_ids(rng, 8), rng);
  }
}

TEST_CASE("stale caches are refused") {
  Rng rng(7);
  auto state = oracle::random_model(rng, attention(4, 1, 2, 2));
  auto grads = Gradients::zeros_like(state);
  std::vector<double> up(4, 1.0);
  CHECK_THROWS_AS(backward_encode(state, EncodeCache{}, up, grads), Error);
  EncodeCache cache;
  encode_ids(state, {1, 2}, &cache);
  ++state.generation;
  try {
    backward_encode(state, cache, up, grads);
    FAIL("expected StaleCache");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StaleCache);
  }
}

TEST_CASE("model files round-trip exactly") {
  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    auto config = oracle::random_config(rng);
    auto state = oracle::random_model(rng, config);
    const auto bytes = serialize_model(state);
    CHECK(bytes.substr(0, 4) == "PMM1");
    const auto back = deserialize_model(bytes);
    CHECK(back.same_parameters(state));
    CHECK(serialize_model(back) == bytes);
  }
  auto state = oracle::random_model(rng, EncoderConfig::reference(), 3);
  CHECK(state.layers.size() == 2);
  CHECK(state.layers[0].wq.size() == 4);
  CHECK(state.layers[0].wq[0].cols() == 128);
  CHECK(deserialize_model(serialize_model(state)).same_parameters(state));

  auto bytes = serialize_model(oracle::random_model(rng, pooled(3)));
  bytes[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(deserialize_model(bytes), Error);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, 10)), Error);
}
