#include "pmatch/eval.hpp"

#include <cstdio>
#include <numeric>

#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"
#include "pmatch/vocab.hpp"

namespace pmatch {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

double mrr(std::span<const std::uint32_t> gold_ranks) {
  if (gold_ranks.empty()) throw Error(ErrorCode::EmptyInput, "MRR of an empty ranking list");
  double sum = 0.0;
  for (auto r : gold_ranks) {
    if (r < 1) throw Error(ErrorCode::EmptyInput, "ranks are 1-based");
    sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(gold_ranks.size());
}

double accuracy_local(const RankingResult& result) {
  if (result.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (auto r : result.gold_rank) hits += r == 1;
  return static_cast<double>(hits) / static_cast<double>(result.size());
}

double accuracy_global(const MatchResult& result) {
  const std::size_t n = result.assignment.size();
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += result.assignment.proof_of[i] == i;
  return static_cast<double>(hits) / static_cast<double>(n);
}

MetricReport report_local(const RankingResult& result) {
  return {mrr(result.gold_rank), accuracy_local(result), result.size()};
}

MetricReport report_global(const MatchResult& result) {
  return {std::nullopt, accuracy_global(result), result.assignment.size()};
}

AssignHistogram assignment_distribution(const RankingResult& result) {
  AssignHistogram h;
  h.n = result.size();
  h.chosen_by.assign(h.n, 0);
  for (std::size_t i = 0; i < h.n; ++i) ++h.chosen_by[result.top1(i)];
  for (auto c : h.chosen_by) {
    for (std::size_t t = 0; t < 4; ++t) h.at_least[t] += c >= AssignHistogram::kThresholds[t];
    h.exactly_one += c == 1;
    h.none += c == 0;
  }
  return h;
}

std::vector<std::size_t> AssignHistogram::non_cumulative() const {
  return {at_least[3] - at_least[2], at_least[2] - at_least[1], at_least[1] - at_least[0], at_least[0]};
}

std::string AssignHistogram::format() const {
  const char* labels[6] = {">=20", ">=10", ">=5", ">=2", "=1", "<1"};
  const std::size_t counts[6] = {at_least[0], at_least[1], at_least[2], at_least[3], exactly_one, none};
  std::string out = "statements  proofs      %\n";
  for (std::size_t i = 0; i < 6; ++i) {
    const double pct = n == 0 ? 0.0 : 100.0 * static_cast<double>(counts[i]) / static_cast<double>(n);
    out += pad_right(labels[i], 10) + pad_left(std::to_string(counts[i]), 8) + pad_left(fixed(pct, 1), 7) + "\n";
  }
  return out;
}

MetricReport evaluate_local(const ModelState& state, const Corpus& test) {
  std::vector<TokenList> statements, proofs;
  for (const auto& p : test.pairs) {
    statements.push_back(p.statement);
    proofs.push_back(p.proof);
  }
  return report_local(decode_local(build_score_matrix(state, statements, proofs), false));
}

std::vector<GridLevel> standard_grid_levels(double partial_alpha) {
  return {{"conservation", ReplacementLevel::conservation()},
          {"partial", ReplacementLevel::partial(partial_alpha)},
          {"full", ReplacementLevel::full()},
          {"transposition", ReplacementLevel::transposition()}};
}

std::uint64_t grid_replace_seed(std::uint64_t seed, const std::string& split_name, const std::string& level_name) {
  return derive_seed(derive_seed(seed, split_name), level_name);
}

GridReport run_grid(const Corpus& train_corpus, const Corpus& dev, const Corpus& test,
                    std::span<const GridLevel> levels, const EncoderConfig& encoder, std::uint32_t min_freq,
                    const TrainConfig& train_config, const GridSeeds& seeds, const ProtectedSet& protect) {
  if (levels.empty()) throw Error(ErrorCode::ConfigError, "grid needs at least one level");
  GridReport report;
  std::vector<Corpus> targets;
  for (const auto& level : levels) {
    report.sources.push_back(level.name);
    report.targets.push_back(level.name);
    targets.push_back(
        replace_corpus(test, level.level, protect, grid_replace_seed(seeds.replace_seed, "test", level.name)));
  }

  for (const auto& source : levels) {
    std::vector<MetricReport> row;
    if (encoder.kind == EncoderKind::TfIdf) {
      for (const auto& target : targets) {
        const auto stats = TfIdfStats::from_corpus(target);
        std::vector<TokenList> s, p;
        for (const auto& pair : target.pairs) {
          s.push_back(pair.statement);
          p.push_back(pair.proof);
        }
        row.push_back(report_local(decode_local(build_tfidf_score_matrix(stats, s, p), false)));
      }
    } else {
      const Corpus tr = replace_corpus(train_corpus, source.level, protect,
                                       grid_replace_seed(seeds.replace_seed, "train", source.name));
      const Corpus dv =
          replace_corpus(dev, source.level, protect, grid_replace_seed(seeds.replace_seed, "dev", source.name));
      ModelState state = init_model(build_vocab(tr, min_freq), encoder, seeds.model_seed);
      const TrainResult trained = train(tr, dv, std::move(state), train_config);
      for (const auto& target : targets) row.push_back(evaluate_local(trained.best, target));
    }
    report.cells.push_back(std::move(row));
  }
  return report;
}

std::string GridReport::format_table() const {
  std::size_t label_width = 14;
  for (const auto& s : sources) label_width = std::max(label_width, s.size() + 2);
  std::string out = pad_right("train \\ test", label_width);
  for (const auto& t : targets) out += pad_left(t, 16);
  out += "\n" + std::string(label_width, ' ');
  for (std::size_t j = 0; j < targets.size(); ++j) out += pad_left("MRR", 8) + pad_left("Acc", 8);
  out += "\n";
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out += pad_right(sources[i], label_width);
    for (const auto& cell : cells[i]) {
      out += pad_left(cell.mrr ? fixed(100.0 * *cell.mrr, 1) : "-", 8);
      out += pad_left(fixed(100.0 * cell.accuracy, 1), 8);
    }
    out += "\n";
  }
  return out;
}

std::string GridReport::format_records() const {
  std::string out;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const auto& c = cells[i][j];
      out += sources[i] + "\t" + targets[j] + "\t" + (c.mrr ? fixed(*c.mrr, 6) : "-") + "\t" +
             fixed(c.accuracy, 6) + "\t" + std::to_string(c.n) + "\n";
    }
  }
  return out;
}

}  // namespace pmatch
