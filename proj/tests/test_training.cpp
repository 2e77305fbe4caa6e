#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "model_oracles.hpp"
#include "pmatch/error.hpp"
#include "pmatch/eval.hpp"
#include "pmatch/training.hpp"
#include "training_fixtures.hpp"

using namespace pmatch;

namespace {

double matrix_formula_cost(const Assignment& a) {
  const std::size_t n = a.size();
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ahat = a.proof_of[i] == j ? 1.0 : 0.0;
      const double id = i == j ? 1.0 : 0.0;
      cost += std::max(0.0, ahat - id);
    }
  }
  return cost;
}

TrainConfig memorize_config() {
  TrainConfig c;
  c.objective = Objective::Local;
  c.batch_size = 4;
  c.epochs = 200;
  c.lr = 5e-3;
  c.lr_decay = 0.996;
  c.eval_every = 1;
  c.seed = 0;
  return c;
}

ModelState pooled_state(const Corpus& c, std::uint32_t d, std::uint64_t seed) {
  EncoderConfig e;
  e.kind = EncoderKind::PooledEmbedding;
  e.d = d;
  return init_model(build_vocab(c, 1), e, seed);
}

}  // namespace

TEST_CASE("local loss values") {
  const auto zero = local_loss(Matrix(2, 2));
  CHECK(std::abs(zero.loss - 2.0 * std::log(2.0)) < 1e-12);
  Matrix sat(3, 3);
  for (std::size_t i = 0; i < 3; ++i) sat(i, i) = 1e6;
  CHECK(local_loss(sat).loss < 1e-6);
  CHECK_THROWS_AS(local_loss(Matrix(1, 1)), Error);
}

TEST_CASE("local loss gradient") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    auto m = oracle::random_real_matrix(rng, 4);
    const auto res = local_loss(m);
    CHECK(res.loss >= 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (double g : res.grad.row(i)) s += g;
      CHECK(std::abs(s) < 1e-12);
    }
    const auto numeric = oracle::central_difference(m.values(), [&] { return local_loss(m).loss; });
    for (std::size_t k = 0; k < numeric.size(); ++k) CHECK(std::abs(numeric[k] - res.grad.values()[k]) < 1e-6);
  }
}

TEST_CASE("structured cost") {
  CHECK(structured_cost(Assignment::identity(5)) == 0);
  CHECK(structured_cost(Assignment{{1, 0, 2, 3, 4}}) == 2);
  CHECK(structured_cost(Assignment{{1, 2, 3, 4, 5, 0}}) == 6);
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    Assignment a = Assignment::identity(1 + rng.below(9));
    rng.shuffle(std::span(a.proof_of));
    const auto cost = structured_cost(a);
    CHECK(static_cast<double>(cost) == matrix_formula_cost(a));
    CHECK(cost != 1);
  }
}

TEST_CASE("global loss") {
  Matrix dd(3, 3);
  for (std::size_t i = 0; i < 3; ++i) dd(i, i) = 10.0;
  const auto zero = global_loss(dd);
  CHECK(zero.loss == 0.0);
  CHECK(zero.predicted == Assignment::identity(3));
  for (double g : zero.grad.values()) CHECK(g == 0.0);

  Matrix swap(2, 2);
  swap(0, 1) = swap(1, 0) = 1.0;
  const auto s = global_loss(swap);
  CHECK(s.predicted == Assignment{{1, 0}});
  CHECK(s.loss == 4.0);
  CHECK(s.grad(0, 1) == 1.0);
  CHECK(s.grad(0, 0) == -1.0);

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto m = oracle::random_real_matrix(rng, 1 + rng.below(6));
    const auto r = global_loss(m);
    CHECK(r.loss >= 0.0);
    const double ident = assignment_score(m, Assignment::identity(m.rows()));
    const double margin = static_cast<double>(structured_cost(r.predicted)) + assignment_score(m, r.predicted);
    if (r.loss == 0.0) CHECK(ident >= margin - 1e-12);
    if (r.predicted == Assignment::identity(m.rows())) CHECK(r.loss == 0.0);
  }
}

TEST_CASE("loss gradients through encoder and head") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    auto state = oracle::random_model(rng, oracle::random_config(rng));
    const std::size_t b = 2 + rng.below(3);
    std::vector<TokenIds> s(b), p(b);
    std::vector<const TokenIds*> sp, pp;
    for (std::size_t i = 0; i < b; ++i) {
      s[i] = oracle::random_ids(rng, 8);
      p[i] = oracle::random_ids(rng, 8);
      sp.push_back(&s[i]);
      pp.push_back(&p[i]);
    }
    for (bool global : {false, true}) {
      auto loss_of = [&] {
        const auto f = forward_batch(state, sp, pp);
        return global ? global_loss(f.scores).loss : local_loss(f.scores).loss;
      };
      const auto fwd = forward_batch(state, sp, pp);
      const Matrix dscores = global ? global_loss(fwd.scores).grad : local_loss(fwd.scores).grad;
      const auto analytic = oracle::flatten(state, backward_batch(state, fwd, dscores));
      const auto numeric = oracle::numeric_gradient(state, loss_of);
      double worst = 0.0;
      for (std::size_t k = 0; k < analytic.size(); ++k) {
        worst = std::max(worst, oracle::relative_error(analytic[k], numeric[k]));
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.lr = 5e-3;
  c.lr_decay = 0.996;
  CHECK(scheduled_lr(c, 0) == 5e-3);
  CHECK(scheduled_lr(c, 300) == doctest::Approx(5e-3 * std::pow(0.996, 300)).epsilon(1e-12));
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.lr_decay = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("memorizes a separable corpus deterministically") {
  const auto corpus = oracle::separable_corpus(8);
  const auto cfg = memorize_config();
  const auto a = train(corpus, corpus, pooled_state(corpus, 16, 0), cfg);
  const auto report = evaluate_local(a.best, corpus);
  CHECK(report.accuracy == 1.0);
  CHECK(*report.mrr == 1.0);
  CHECK(a.history.epoch_loss(200) < a.history.epoch_loss(1));
  CHECK(a.history.steps.size() == 200 * 2);

  const auto b = train(corpus, corpus, pooled_state(corpus, 16, 0), cfg);
  CHECK(format_history(a.history) == format_history(b.history));
  CHECK(a.best.same_parameters(b.best));
}

TEST_CASE("hybrid training alternates local and global steps") {
  const auto corpus = oracle::separable_corpus(6);
  auto cfg = memorize_config();
  cfg.objective = Objective::Hybrid;
  cfg.epochs = 3;
  cfg.optimizer = OptimizerKind::Sgd;
  const auto r = train(corpus, corpus, pooled_state(corpus, 8, 1), cfg);
  REQUIRE(r.history.steps.size() == 3 * 2 * 2);
  for (std::size_t i = 0; i < r.history.steps.size(); ++i) CHECK(r.history.steps[i].global_step == (i % 2 == 1));
  const auto log = format_history(r.history);
  CHECK(log.rfind("1\t1\tlocal\t", 0) == 0);
  CHECK(log.find("\tglobal\t") != std::string::npos);
  for (const auto& s : r.history.steps) {
    CHECK(s.loss >= 0.0);
    CHECK(s.grad_norms.size() == 3);
  }
}

TEST_CASE("non-finite losses abort with batch ids") {
  const auto corpus = oracle::separable_corpus(4);
  auto state = pooled_state(corpus, 4, 2);
  state.embeddings(1, 0) = std::nan("");
  auto cfg = memorize_config();
  cfg.epochs = 1;
  try {
    train(corpus, corpus, state, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("pair") != std::string::npos);
  }
}

TEST_CASE("checkpoints round-trip") {
  const auto corpus = oracle::separable_corpus(6);
  auto cfg = memorize_config();
  cfg.epochs = 4;
  const auto r = train(corpus, corpus, pooled_state(corpus, 8, 3), cfg);
  REQUIRE(r.optimizer.average.has_value());
  const auto path = std::filesystem::temp_directory_path() / "pmatch_checkpoint_test.pmc";
  save_checkpoint(path, r.last, r.optimizer);
  const auto [state, opt] = load_checkpoint(path);
  CHECK(state.same_parameters(r.last));
  CHECK(opt.lr == r.optimizer.lr);
  CHECK(opt.step == r.optimizer.step);
  CHECK(opt.epoch == 4);
  CHECK(opt.average_count == r.optimizer.average_count);
  CHECK(opt.average->same_parameters(*r.optimizer.average));
  std::filesystem::remove(path);
}
