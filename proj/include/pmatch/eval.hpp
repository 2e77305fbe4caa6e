// eval.hpp - ranking metrics, assignment histograms and cross-replacement grids.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmatch/corpus.hpp"
#include "pmatch/decoding.hpp"
#include "pmatch/model.hpp"
#include "pmatch/symbols.hpp"
#include "pmatch/training.hpp"

namespace pmatch {

struct MetricReport {
  std::optional<double> mrr;  // absent for global decoding
  double accuracy = 0.0;
  std::size_t n = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// EmptyInput on an empty list.
double mrr(std::span<const std::uint32_t> gold_ranks);

double accuracy_local(const RankingResult& result);
double accuracy_global(const MatchResult& result);

MetricReport report_local(const RankingResult& result);
MetricReport report_global(const MatchResult& result);

/// Proofs counted by how many statements ranked them first.
struct AssignHistogram {
  static constexpr std::size_t kThresholds[4] = {20, 10, 5, 2};

  std::size_t n = 0;
  std::size_t at_least[4] = {0, 0, 0, 0};  // cumulative >=20, >=10, >=5, >=2
  std::size_t exactly_one = 0;
  std::size_t none = 0;
  std::vector<std::size_t> chosen_by;  // per proof

  /// Proofs chosen by 2..4, 5..9, 10..19 and >=20 statements.
  std::vector<std::size_t> non_cumulative() const;
  /// Aligned table with counts and one-decimal percentages.
  std::string format() const;
};

AssignHistogram assignment_distribution(const RankingResult& result);

/// Evaluates a trained model on `test` with local decoding.
MetricReport evaluate_local(const ModelState& state, const Corpus& test);

struct GridLevel {
  std::string name;
  ReplacementLevel level;
};

std::vector<GridLevel> standard_grid_levels(double partial_alpha = 0.5);

struct GridReport {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::vector<std::vector<MetricReport>> cells;  // [source][target]

  /// Aligned MRR/accuracy table, percentages to one decimal.
  std::string format_table() const;
  /// `source<TAB>target<TAB>mrr<TAB>accuracy<TAB>n` per cell.
  std::string format_records() const;

  friend bool operator==(const GridReport&, const GridReport&) = default;
};

struct GridSeeds {
  std::uint64_t replace_seed = 0;
  std::uint64_t model_seed = 0;
};

/// One model per source level trained on the source-replaced train split,
/// evaluated on every target-replaced test split.
GridReport run_grid(const Corpus& train, const Corpus& dev, const Corpus& test, std::span<const GridLevel> levels,
                    const EncoderConfig& encoder, std::uint32_t min_freq, const TrainConfig& train_config,
                    const GridSeeds& seeds, const ProtectedSet& protect = {});

/// Sub-seed used for replacing split `split_name` at `level_name`.
std::uint64_t grid_replace_seed(std::uint64_t seed, const std::string& split_name, const std::string& level_name);

}  // namespace pmatch
