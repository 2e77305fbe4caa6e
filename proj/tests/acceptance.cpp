// acceptance - end-to-end acceptance checks, one PASS/FAIL line per criterion.
//
// Exit status is non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "model_oracles.hpp"
#include "oracles.hpp"
#include "pmatch/assignment.hpp"
#include "pmatch/corpus.hpp"
#include "pmatch/decoding.hpp"
#include "pmatch/eval.hpp"
#include "pmatch/mathml.hpp"
#include "pmatch/model_io.hpp"
#include "pmatch/symbols.hpp"
#include "pmatch/training.hpp"
#include "symbol_fuzz.hpp"
#include "training_fixtures.hpp"

using namespace pmatch;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// 1. Dense solver agrees with exhaustive enumeration.
Outcome lap_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::size_t mismatches = 0;
  const std::size_t trials = 1200;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.below(7);
    const auto m = oracle::random_int_matrix(rng, n, -50, 50);
    const auto dense = solve_dense(m);
    const auto brute = solve_brute(m);
    if (dense.objective != brute.objective || !dense.assignment.is_permutation()) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          std::to_string(trials) + " matrices, " + std::to_string(mismatches) + " mismatches, " + fmt("%.2f s", secs)};
}

// 2. Sparse solver equals dense when nothing is pruned; objective grows with k.
Outcome sparse_consistency() {
  Rng rng(202);
  std::size_t bad = 0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 5 + rng.below(56);
    const auto m = oracle::random_real_matrix(rng, n);
    const auto s = solve_sparse(prune_topk(m, n));
    const double err = std::abs(s.objective - solve_dense(m).objective);
    worst = std::max(worst, err);
    if (err > 1e-9 || s.padded) ++bad;
  }
  // Padded solves compare on (fewest sentinel rows, genuine objective);
  // unpadded steps must also be non-decreasing as plain scalars.
  std::size_t decreases = 0, steps = 0, padded_steps = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + rng.below(56);
    const auto m = oracle::random_real_matrix(rng, n);
    std::optional<SparseAssignmentResult> previous;
    for (std::size_t k = 1;; k = std::min(n, k + 1 + rng.below(4))) {
      auto current = solve_sparse(prune_topk(m, k));
      padded_steps += current.padded;
      if (previous) {
        ++steps;
        const bool scalar_drop = !previous->padded && current.objective < previous->objective - 1e-9;
        if (!sparse_at_least(current, *previous) || scalar_drop) ++decreases;
      }
      previous = std::move(current);
      if (k == n) break;
    }
  }
  return {bad == 0 && decreases == 0, "200 matrices, max |sparse - dense| " + fmt("%.2e", worst) + ", " +
                                          std::to_string(decreases) + " decreases over " + std::to_string(steps) +
                                          " k-steps in 50 chains (" + std::to_string(padded_steps) + " padded solves)"};
}

// 3. Loss gradients through encoder and head against central differences.
Outcome gradient_check() {
  Rng rng(303);
  std::size_t failures = 0, draws = 0, pooled = 0, attention = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto config = oracle::random_config(rng);
    config.kind = t % 2 ? EncoderKind::SelfAttentive : EncoderKind::PooledEmbedding;
    (config.kind == EncoderKind::SelfAttentive ? attention : pooled)++;
    auto state = oracle::random_model(rng, config);
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
      ++draws;
      const auto fwd = forward_batch(state, sp, pp);
      const Matrix dscores = global ? global_loss(fwd.scores).grad : local_loss(fwd.scores).grad;
      const auto analytic = oracle::flatten(state, backward_batch(state, fwd, dscores));
      const auto numeric = oracle::numeric_gradient(state, [&] {
        const auto f = forward_batch(state, sp, pp);
        return global ? global_loss(f.scores).loss : local_loss(f.scores).loss;
      });
      double draw_worst = 0.0;
      for (std::size_t k = 0; k < analytic.size(); ++k) {
        draw_worst = std::max(draw_worst, oracle::relative_error(analytic[k], numeric[k]));
      }
      worst = std::max(worst, draw_worst);
      if (draw_worst >= 1e-4) ++failures;
    }
  }
  return {failures == 0, std::to_string(draws) + " loss draws (" + std::to_string(pooled) + " pooled, " +
                             std::to_string(attention) + " attention models), worst relative error " +
                             fmt("%.2e", worst)};
}

// 4. Loss values and the structured cost.
Outcome loss_sanity() {
  const double zero = local_loss(Matrix(2, 2)).loss;
  bool ok = std::abs(zero - 2.0 * std::log(2.0)) <= 1e-9;
  ok = ok && structured_cost(Assignment::identity(7)) == 0;
  Rng rng(404);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    Assignment a = Assignment::identity(1 + rng.below(12));
    rng.shuffle(std::span(a.proof_of));
    std::size_t misplaced = 0;
    double formula = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      misplaced += a.proof_of[i] != i;
      for (std::size_t j = 0; j < a.size(); ++j) {
        formula += std::max(0.0, (a.proof_of[i] == j ? 1.0 : 0.0) - (i == j ? 1.0 : 0.0));
      }
    }
    const auto cost = structured_cost(a);
    if (cost != misplaced || static_cast<double>(cost) != formula) ++mismatches;
  }
  ok = ok && mismatches == 0;
  return {ok, "local_loss(0_2x2) = " + fmt("%.12f", zero) + ", " + std::to_string(mismatches) +
                  " cost mismatches over 1000 permutations"};
}

// 5. Memorization of a separable corpus.
Outcome memorization() {
  const auto corpus = oracle::separable_corpus(8);
  TrainConfig cfg;
  cfg.objective = Objective::Local;
  cfg.batch_size = 4;
  cfg.epochs = 200;
  cfg.lr = 5e-3;
  cfg.lr_decay = 0.996;
  cfg.eval_every = 1;
  cfg.seed = 0;
  EncoderConfig enc;
  enc.kind = EncoderKind::PooledEmbedding;
  enc.d = 16;

  const auto t0 = Clock::now();
  const auto a = train(corpus, corpus, init_model(build_vocab(corpus, 1), enc, 0), cfg);
  const double secs = seconds_since(t0);
  const auto b = train(corpus, corpus, init_model(build_vocab(corpus, 1), enc, 0), cfg);
  const auto report = evaluate_local(a.best, corpus);
  const bool same = format_history(a.history) == format_history(b.history) && a.best.same_parameters(b.best);
  const bool ok = report.accuracy == 1.0 && report.mrr && *report.mrr == 1.0 && secs < 30.0 && same &&
                  a.history.epoch_loss(200) < a.history.epoch_loss(1);
  return {ok, "accuracy " + fmt("%.3f", report.accuracy) + ", MRR " + fmt("%.3f", report.mrr.value_or(0.0)) +
                  ", best epoch " + std::to_string(a.history.best_epoch) + ", " + fmt("%.2f s", secs) +
                  (same ? ", deterministic" : ", NOT deterministic")};
}

// 6. Global decoding beats local decoding where one proof attracts many statements.
Outcome local_vs_global() {
  Rng rng(606);
  bool dominant_ok = true;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 5 + rng.below(20);
    Matrix m = oracle::random_real_matrix(rng, n);
    for (auto& v : m.values()) v *= 0.1;
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 1.0;
    const std::size_t col = rng.below(n);
    for (std::size_t i = 0; i < n; ++i) m(i, col) += 2.0;
    dominant_ok = dominant_ok && accuracy_local(decode_local(m, false)) < accuracy_global(decode_global(m));
  }
  std::size_t wins = 0;
  double local_sum = 0.0, global_sum = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 20;
    Matrix m = oracle::random_real_matrix(rng, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 3.0;
    const double local = accuracy_local(decode_local(m, false));
    const double global = accuracy_global(decode_global(m));
    local_sum += local;
    global_sum += global;
    wins += global >= local;
  }
  return {dominant_ok && wins >= 95, std::string(dominant_ok ? "dominant column: local < global; " : "dominant column FAILED; ") +
                                         "noisy diagonal: global >= local in " + std::to_string(wins) +
                                         "/100 (mean " + fmt("%.3f", local_sum / 100) + " -> " +
                                         fmt("%.3f", global_sum / 100) + ")"};
}

// Pairs are told apart only by their single-letter symbols; a topic word
// shared by a group of pairs is the only symbol-free signal.
Corpus symbol_corpus(std::size_t n, std::size_t offset, Rng& rng) {
  static const char* kLetters[] = {"a", "b", "c", "d", "f", "g", "h", "k", "m", "n", "p", "q",
                                   "r", "s", "t", "u", "v", "w", "x", "y", "z", "j", "l", "o"};
  constexpr std::size_t kTopics = 8;
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> idx(std::size(kLetters));
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span(idx));
    const std::string topic = "topic" + std::to_string((offset + i) % kTopics);
    TokenList s = {Token::text("let"), Token::text(topic), Token::text("be"), Token::text("given")};
    TokenList p = {Token::text("we"), Token::text("show"), Token::text(topic), Token::text("holds")};
    for (std::size_t k = 0; k < 3; ++k) {
      s.push_back(Token::math(kLetters[idx[k]]));
      s.push_back(Token::math("="));
      p.push_back(Token::math(kLetters[idx[k]]));
      p.push_back(Token::math("+"));
    }
    c.pairs.push_back(oracle::make_pair("sym" + std::to_string(offset + i), "a", s, p));
  }
  return c;
}

// 7. Conservation-trained models collapse on Full-replaced test data.
Outcome cross_replacement() {
  Rng rng(707);
  const auto train_corpus = symbol_corpus(800, 0, rng);
  const auto dev = symbol_corpus(100, 800, rng);
  const auto test = symbol_corpus(200, 900, rng);
  const std::vector<GridLevel> levels = {{"conservation", ReplacementLevel::conservation()},
                                         {"full", ReplacementLevel::full()}};
  EncoderConfig enc;
  enc.kind = EncoderKind::PooledEmbedding;
  enc.d = 32;
  TrainConfig cfg;
  cfg.batch_size = 20;
  cfg.epochs = 40;
  cfg.lr = 0.05;
  cfg.lr_decay = 0.99;
  cfg.eval_every = 5;
  cfg.seed = 1;
  const auto grid = run_grid(train_corpus, dev, test, levels, enc, 1, cfg, GridSeeds{7, 7});
  const double cc = 100.0 * grid.cells[0][0].accuracy, cf = 100.0 * grid.cells[0][1].accuracy;
  const double fc = 100.0 * grid.cells[1][0].accuracy, ff = 100.0 * grid.cells[1][1].accuracy;
  const bool ok = cc - cf >= 20.0 && std::abs(fc - ff) < 10.0;
  return {ok, "conservation-trained " + fmt("%.1f", cc) + " -> " + fmt("%.1f", cf) + " on full; full-trained " +
                  fmt("%.1f", fc) + " (conservation test) vs " + fmt("%.1f", ff) + " (full test)"};
}

// 8. Worked replacement examples and fuzzed invariants.
Outcome replacement_correctness() {
  auto math = [](std::initializer_list<const char*> xs) {
    TokenList out;
    for (const char* x : xs) out.push_back(Token::math(x));
    return out;
  };
  const TokenList proof = math({"a", "n", "=", "a", "n", "-", "1", "+", "a", "n", "-", "2"});
  const auto pair = oracle::make_pair("fib", "a", math({"a", "n"}), proof);
  const auto shared = extract_shared_symbols(pair);
  const ProtectedSet none;
  bool examples = apply_replacement(proof, build_replacement_map(shared, ReplacementLevel::conservation(), none, 0,
                                                                 {"x", "i"})) == proof;
  examples = examples &&
             apply_replacement(proof, build_replacement_map(shared, ReplacementLevel::full(), none, 0, {"x", "i"})) ==
                 math({"x", "i", "=", "x", "i", "-", "1", "+", "x", "i", "-", "2"});
  examples = examples && apply_replacement(proof, build_replacement_map(shared, ReplacementLevel::transposition(),
                                                                        none, 0, {"x", "i"})) ==
                             math({"n", "a", "=", "n", "a", "-", "1", "+", "n", "a", "-", "2"});

  Rng rng(808);
  const auto prob = ProtectedSet::probability();
  const ReplacementLevel levels[] = {ReplacementLevel::partial(0.5), ReplacementLevel::full(),
                                     ReplacementLevel::transposition()};
  std::size_t violations = 0;
  for (std::size_t t = 0; t < 10000; ++t) {
    const auto p = oracle::random_symbol_pair(rng, t);
    const auto& level = levels[t % 3];
    const ProtectedSet& protect = t % 2 ? prob : none;
    const auto map = build_replacement_map(p, extract_shared_symbols(p, &protect), level, protect, t);
    std::set<SymbolKey> images;
    for (const auto& [from, to] : map.entries) {
      if (!images.insert(to).second || from == to || protect.contains(from) || protect.contains(to) ||
          is_constant_key(from) || is_constant_key(to) || from.font == Font::DoubleStruck) {
        ++violations;
      }
    }
    const auto out = replace_pair(p, level, protect, t);
    if (out.statement != p.statement || out.proof.size() != p.proof.size()) ++violations;
    const auto before = oracle::math_counts(p.proof), after = oracle::math_counts(out.proof);
    for (const auto& k : protect.keys) {
      for (const auto& surface : {k.base, to_upper_letter(k.base)}) {
        const std::pair<std::string, Font> id{surface, k.font};
        const std::size_t was = before.count(id) ? before.at(id) : 0;
        const std::size_t now = after.count(id) ? after.at(id) : 0;
        if (was != now) ++violations;
      }
    }
  }
  return {examples && violations == 0, std::string(examples ? "worked examples reproduced" : "worked examples FAILED") +
                                           ", " + std::to_string(violations) + " invariant violations over 10000 pairs"};
}

// 9. Metric identities.
Outcome metric_identities() {
  const std::vector<std::uint32_t> ranks = {1, 2, 4};
  const double m = mrr(ranks);
  bool ok = std::abs(m - 0.583333) <= 1e-6 && std::abs(m - 7.0 / 12.0) <= 1e-9;
  Rng rng(909);
  std::size_t violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(30);
    const auto scores = oracle::random_int_matrix(rng, n, -4, 4);
    const auto report = report_local(decode_local(scores, false));
    if (*report.mrr < report.accuracy) ++violations;
    const double a = 0.1 + 5.0 * rng.uniform(), b = 20.0 * rng.normal();
    Matrix affine = scores;
    for (auto& v : affine.values()) v = a * v + b;
    if (!(report_local(decode_local(affine, false)) == report)) ++violations;
  }
  ok = ok && violations == 0;
  return {ok, "mrr([1,2,4]) = " + fmt("%.9f", m) + ", " + std::to_string(violations) + " violations over 1000 results"};
}

// 10. Corpus and model files round-trip; the linearizer matches a reference traversal.
Outcome format_round_trips() {
  Rng rng(1010);
  std::size_t corpus_bad = 0, model_bad = 0, mathml_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    Corpus c;
    c.split_tag = static_cast<SplitTag>(rng.below(4));
    const std::size_t n = 1 + rng.below(5);
    for (std::size_t i = 0; i < n; ++i) c.pairs.push_back(oracle::random_record(rng, i));
    std::stringstream io;
    write_corpus(c, io);
    const std::string bytes = io.str();
    const auto back = parse_corpus(io);
    std::ostringstream again;
    write_corpus(back, again);
    if (!(back == c) || again.str() != bytes) ++corpus_bad;
  }
  const auto path = std::filesystem::temp_directory_path() / "pmatch_acceptance.pmc";
  for (int t = 0; t < 1000; ++t) {
    auto state = oracle::random_model(rng, oracle::random_config(rng), 1 + rng.below(10));
    state.rng_seed = rng.next();
    OptimizerSnapshot opt;
    opt.lr = rng.uniform();
    opt.step = rng.next();
    opt.epoch = rng.below(1000);
    opt.average_count = rng.below(50);
    if (rng.below(2)) opt.average = oracle::random_model(rng, state.config, state.vocab.size() - 1);
    save_checkpoint(path, state, opt);
    const auto [s2, o2] = load_checkpoint(path);
    bool same = s2.same_parameters(state) && o2.lr == opt.lr && o2.step == opt.step && o2.epoch == opt.epoch &&
                o2.average_count == opt.average_count && o2.average.has_value() == opt.average.has_value();
    if (same && opt.average) same = o2.average->same_parameters(*opt.average);
    if (!same || !deserialize_model(serialize_model(state)).same_parameters(state)) ++model_bad;
  }
  std::filesystem::remove(path);
  for (int t = 0; t < 500; ++t) {
    oracle::MathNode root;
    root.tag = "math";
    const std::size_t kids = 1 + rng.below(3);
    for (std::size_t i = 0; i < kids; ++i) root.children.push_back(oracle::random_math_tree(rng, 4));
    TokenList expected;
    oracle::reference_dfs(root, "", expected);
    if (linearize_mathml(oracle::to_xml(root)) != expected) ++mathml_bad;
  }
  return {corpus_bad + model_bad + mathml_bad == 0,
          "corpus mismatches " + std::to_string(corpus_bad) + "/1000, checkpoint mismatches " +
              std::to_string(model_bad) + "/1000, linearizer mismatches " + std::to_string(mathml_bad) + "/500"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"LAP oracle equivalence", lap_oracle},
      {"sparse solver consistency", sparse_consistency},
      {"gradient correctness", gradient_check},
      {"loss sanity", loss_sanity},
      {"memorization run", memorization},
      {"local vs global decoding", local_vs_global},
      {"cross-replacement decline", cross_replacement},
      {"replacement correctness", replacement_correctness},
      {"metric identities", metric_identities},
      {"format round-trips", format_round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
