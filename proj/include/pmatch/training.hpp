// training.hpp - in-batch softmax loss, structured max-margin loss and the
// SGD / averaged-SGD training loop.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmatch/assignment.hpp"
#include "pmatch/corpus.hpp"
#include "pmatch/matrix.hpp"
#include "pmatch/model.hpp"

namespace pmatch {

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d scores
};

struct GlobalLossResult {
  double loss = 0.0;
  Matrix grad;
  Assignment predicted;  // cost-augmented argmax
};

/// sum_i [ -m_ii + logsumexp_j m_ij ]; gradient softmax(row) - onehot.
/// DegenerateBatch when b < 2.
LossResult local_loss(const Matrix& scores);

/// Number of rows assigned away from their gold column.
std::size_t structured_cost(const Assignment& predicted);

/// max(0, cost(A) + score(A) - score(I)) with A the argmax of
/// score(A) + cost(A), i.e. the LAP over m_ij + [i != j].
GlobalLossResult global_loss(const Matrix& scores);

enum class Objective : std::uint8_t { Local, Hybrid };
enum class OptimizerKind : std::uint8_t { Sgd, AveragedSgd };

const char* objective_name(Objective objective);
Objective parse_objective(std::string_view name);
const char* optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  Objective objective = Objective::Local;
  std::size_t batch_size = 60;
  std::size_t epochs = 400;
  double lr = 5e-3;
  OptimizerKind optimizer = OptimizerKind::AveragedSgd;
  double lr_decay = 0.996;
  std::size_t eval_every = 20;
  double clip_norm = 5.0;  // global gradient norm cap, <= 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

/// Learning rate in effect during `epoch` (0-based).
double scheduled_lr(const TrainConfig& config, std::size_t epoch);

struct LossReport {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // global step counter, 1-based
  Objective objective = Objective::Local;  // Local or Hybrid's global half
  bool global_step = false;
  double loss = 0.0;
  double lr = 0.0;
  std::vector<double> grad_norms;  // embeddings, attention, head
  std::vector<std::string> batch_ids;
};

struct DevEval {
  std::size_t epoch = 0;
  double accuracy = 0.0;
  double mrr = 0.0;
};

struct TrainHistory {
  std::vector<LossReport> steps;
  std::vector<DevEval> dev;
  std::size_t best_epoch = 0;
  double best_accuracy = -1.0;

  /// Mean loss of the local steps of `epoch`.
  double epoch_loss(std::size_t epoch) const;
};

/// Model file followed by an "OPT1" appendix (lr, step, epoch, averaged
/// parameters) and its own checksum.
struct OptimizerSnapshot {
  double lr = 0.0;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::uint64_t average_count = 0;
  std::optional<ModelState> average;
};

struct TrainResult {
  ModelState best;
  ModelState last;  // raw SGD parameters after the final epoch (average in optimizer)
  TrainHistory history;
  OptimizerSnapshot optimizer;
};

/// Optional hooks; on_epoch runs after every epoch with the live state.
struct TrainCallbacks {
  std::function<void(std::size_t epoch, const ModelState& state)> on_epoch;
};

/// Trains `state` on `train`; evaluates local accuracy on `dev` every
/// eval_every epochs (and after the last one) and returns the best model.
TrainResult train(const Corpus& train, const Corpus& dev, ModelState state, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

/// `epoch<TAB>step<TAB>objective<TAB>loss<TAB>lr` per step.
std::string format_history(const TrainHistory& history);

void save_checkpoint(const std::filesystem::path& path, const ModelState& state, const OptimizerSnapshot& opt);
std::pair<ModelState, OptimizerSnapshot> load_checkpoint(const std::filesystem::path& path);

}  // namespace pmatch
