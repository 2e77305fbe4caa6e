#include "pmatch/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "binio.hpp"
#include "pmatch/decoding.hpp"
#include "pmatch/error.hpp"
#include "pmatch/eval.hpp"
#include "pmatch/model_io.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void apply_sgd(ModelState& state, const Gradients& grads, double lr) {
  const std::size_t d = state.config.d;
  for (const auto& [row, values] : grads.embedding_rows) {
    auto dst = state.embeddings.row(row);
    for (std::size_t j = 0; j < d; ++j) dst[j] -= lr * values[j];
  }
  auto step = [lr](Matrix& param, const Matrix& grad) {
    auto p = param.values();
    const auto g = grad.values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  };
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    auto& layer = state.layers[l];
    const auto& g = grads.layers[l];
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      step(layer.wq[h], g.wq[h]);
      step(layer.wk[h], g.wk[h]);
      step(layer.wv[h], g.wv[h]);
    }
    step(layer.wo, g.wo);
  }
  step(state.head.w, grads.w);
  state.head.b -= lr * grads.b;
  ++state.generation;
}

// Running mean of parameters: avg += (param - avg) / count.
void update_average(ModelState& average, const ModelState& state, std::uint64_t count) {
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<std::span<const double>> src;
  for_each_parameter(state, [&](const std::string&, std::span<const double> v) { src.push_back(v); });
  std::size_t t = 0;
  for_each_parameter(average, [&](const std::string&, std::span<double> v) {
    const auto s = src[t++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += (s[i] - v[i]) * inv;
  });
  ++average.generation;
}

// Chunk `index` of the permutation; a trailing chunk smaller than two pairs
// is topped up from the start of the permutation.
std::vector<std::size_t> make_batch(const std::vector<std::size_t>& perm, std::size_t index, std::size_t b) {
  const std::size_t start = index * b;
  const std::size_t end = std::min(start + b, perm.size());
  std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                 perm.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t fill = 0; batch.size() < 2 && fill < start; ++fill) batch.push_back(perm[fill]);
  return batch;
}

struct EncodedCorpus {
  std::vector<TokenIds> statements, proofs;
};

EncodedCorpus encode_corpus(const Vocabulary& vocab, const Corpus& corpus) {
  EncodedCorpus out;
  for (const auto& p : corpus.pairs) {
    out.statements.push_back(vocab.encode(p.statement));
    out.proofs.push_back(vocab.encode(p.proof));
    if (out.statements.back().empty() || out.proofs.back().empty()) {
      throw Error(ErrorCode::EmptyDocument, "pair '" + p.pair_id + "' has an empty statement or proof");
    }
  }
  return out;
}

}  // namespace

LossResult local_loss(const Matrix& scores) {
  const std::size_t b = scores.rows();
  if (scores.cols() != b) throw Error(ErrorCode::SizeMismatch, "in-batch score matrix must be square");
  if (b < 2) throw Error(ErrorCode::DegenerateBatch, "the in-batch softmax needs at least two pairs");
  LossResult out{0.0, Matrix(b, b)};
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = scores.row(i);
    const double hi = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - hi);
    const double lse = hi + std::log(sum);
    out.loss += lse - row[i];
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < b; ++j) g[j] = std::exp(row[j] - lse);
    g[i] -= 1.0;
  }
  return out;
}

std::size_t structured_cost(const Assignment& predicted) {
  std::size_t cost = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) cost += predicted.proof_of[i] != i;
  return cost;
}

GlobalLossResult global_loss(const Matrix& scores) {
  const std::size_t b = scores.rows();
  if (scores.cols() != b) throw Error(ErrorCode::SizeMismatch, "in-batch score matrix must be square");
  Matrix augmented = scores;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) augmented(i, j) += i == j ? 0.0 : 1.0;

  GlobalLossResult out;
  out.predicted = solve_dense(augmented).assignment;
  out.grad = Matrix(b, b);
  const double margin = static_cast<double>(structured_cost(out.predicted));
  const double value =
      margin + assignment_score(scores, out.predicted) - assignment_score(scores, Assignment::identity(b));
  out.loss = std::max(0.0, value);
  if (out.loss > 0.0) {
    for (std::size_t i = 0; i < b; ++i) {
      out.grad(i, out.predicted.proof_of[i]) += 1.0;
      out.grad(i, i) -= 1.0;
    }
  }
  return out;
}

const char* objective_name(Objective objective) { return objective == Objective::Local ? "local" : "hybrid"; }

Objective parse_objective(std::string_view name) {
  if (name == "local") return Objective::Local;
  if (name == "hybrid" || name == "global") return Objective::Hybrid;
  throw Error(ErrorCode::ConfigError, "unknown objective '" + std::string(name) + "'");
}

const char* optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "asgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "asgd" || name == "averaged-sgd") return OptimizerKind::AveragedSgd;
  throw Error(ErrorCode::ConfigError, "unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error(ErrorCode::ConfigError, "batch_size must be at least 2");
  if (!(lr > 0.0)) throw Error(ErrorCode::ConfigError, "lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error(ErrorCode::ConfigError, "lr_decay must be in (0, 1]");
  if (epochs == 0) throw Error(ErrorCode::ConfigError, "epochs must be positive");
  if (eval_every == 0) throw Error(ErrorCode::ConfigError, "eval_every must be positive");
}

double scheduled_lr(const TrainConfig& config, std::size_t epoch) {
  return config.lr * std::pow(config.lr_decay, static_cast<double>(epoch));
}

double TrainHistory::epoch_loss(std::size_t epoch) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : steps) {
    if (s.epoch == epoch && !s.global_step) {
      sum += s.loss;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

TrainResult train(const Corpus& train_corpus, const Corpus& dev, ModelState state, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  config.validate();
  if (train_corpus.empty() || dev.empty()) throw Error(ErrorCode::EmptyCorpus, "training needs train and dev pairs");
  const std::size_t n = train_corpus.size();
  if (n < 2) throw Error(ErrorCode::DegenerateBatch, "training needs at least two pairs");
  const std::size_t b = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + b - 1) / b;
  const std::size_t averaging_start = config.epochs / 2;

  const EncodedCorpus data = encode_corpus(state.vocab, train_corpus);
  std::vector<TokenList> dev_statements, dev_proofs;
  for (const auto& p : dev.pairs) {
    dev_statements.push_back(p.statement);
    dev_proofs.push_back(p.proof);
  }

  Rng rng(config.seed);
  TrainResult result;
  std::optional<ModelState> average;
  std::uint64_t average_count = 0;
  std::uint64_t step_counter = 0;

  auto run_step = [&](const std::vector<std::size_t>& batch, bool global_step, std::size_t epoch, double lr) {
    std::vector<const TokenIds*> s, p;
    for (auto idx : batch) {
      s.push_back(&data.statements[idx]);
      p.push_back(&data.proofs[idx]);
    }
    const BatchForward fwd = forward_batch(state, s, p);
    double loss = 0.0;
    Matrix dscores;
    if (global_step) {
      auto g = global_loss(fwd.scores);
      loss = g.loss;
      dscores = std::move(g.grad);
    } else {
      auto l = local_loss(fwd.scores);
      loss = l.loss;
      dscores = std::move(l.grad);
    }

    LossReport report;
    report.epoch = epoch + 1;
    report.step = ++step_counter;
    report.objective = config.objective;
    report.global_step = global_step;
    report.loss = loss;
    report.lr = lr;
    for (auto idx : batch) report.batch_ids.push_back(train_corpus.pairs[idx].pair_id);

    if (!std::isfinite(loss)) {
      std::string ids;
      for (const auto& id : report.batch_ids) ids += (ids.empty() ? "" : ",") + id;
      throw Error(ErrorCode::NonFiniteLoss, "non-finite loss on batch [" + ids + "]");
    }

    Gradients grads = backward_batch(state, fwd, dscores);
    for (double sq : grads.group_norms()) report.grad_norms.push_back(std::sqrt(sq));
    const double norm = std::sqrt(grads.squared_norm());
    if (config.clip_norm > 0.0 && norm > config.clip_norm) grads.scale(config.clip_norm / norm);
    apply_sgd(state, grads, lr);

    if (config.optimizer == OptimizerKind::AveragedSgd && epoch >= averaging_start) {
      if (!average) average = state;
      update_average(*average, state, ++average_count);
    }
    result.history.steps.push_back(std::move(report));
  };

  std::vector<std::size_t> local_perm(n), global_perm(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = scheduled_lr(config, epoch);
    std::iota(local_perm.begin(), local_perm.end(), 0);
    rng.shuffle(std::span(local_perm));
    if (config.objective == Objective::Hybrid) {
      std::iota(global_perm.begin(), global_perm.end(), 0);
      rng.shuffle(std::span(global_perm));
    }
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      run_step(make_batch(local_perm, s, b), false, epoch, lr);
      if (config.objective == Objective::Hybrid) run_step(make_batch(global_perm, s, b), true, epoch, lr);
    }

    const ModelState& current = average ? *average : state;
    if (callbacks.on_epoch) callbacks.on_epoch(epoch + 1, current);
    const bool last = epoch + 1 == config.epochs;
    if ((epoch + 1) % config.eval_every == 0 || last) {
      const Matrix scores = build_score_matrix(current, dev_statements, dev_proofs);
      const RankingResult ranking = decode_local(scores, false);
      DevEval eval{epoch + 1, accuracy_local(ranking), mrr(ranking.gold_rank)};
      result.history.dev.push_back(eval);
      if (eval.accuracy > result.history.best_accuracy) {
        result.history.best_accuracy = eval.accuracy;
        result.history.best_epoch = epoch + 1;
        result.best = current;
      }
    }
    if (last) {
      result.last = state;
      result.optimizer.lr = lr;
      result.optimizer.step = step_counter;
      result.optimizer.epoch = epoch + 1;
      result.optimizer.average_count = average_count;
      result.optimizer.average = average;
    }
  }
  return result;
}

std::string format_history(const TrainHistory& history) {
  std::string out;
  for (const auto& s : history.steps) {
    out += std::to_string(s.epoch);
    out += '\t';
    out += std::to_string(s.step);
    out += '\t';
    out += s.global_step ? "global" : "local";
    out += '\t';
    out += shortest(s.loss);
    out += '\t';
    out += shortest(s.lr);
    out += '\n';
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state, const OptimizerSnapshot& opt) {
  std::string bytes = serialize_model(state);
  binio::Writer w;
  w.put_bytes("OPT1");
  w.put<double>(opt.lr);
  w.put<std::uint64_t>(opt.step);
  w.put<std::uint64_t>(opt.epoch);
  w.put<std::uint64_t>(opt.average_count);
  w.put<std::uint8_t>(opt.average ? 1 : 0);
  if (opt.average) w.put_string(serialize_model(*opt.average));
  w.put<std::uint64_t>(fnv1a64(w.bytes()));
  bytes += w.bytes();
  write_file_bytes(path, bytes);
}

std::pair<ModelState, OptimizerSnapshot> load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  std::size_t consumed = 0;
  ModelState state = deserialize_model(bytes, &consumed);
  const std::string_view appendix = std::string_view(bytes).substr(consumed);
  binio::Reader r(appendix);
  if (r.get_bytes(4) != "OPT1") throw Error(ErrorCode::FormatError, "checkpoint has no optimizer appendix");
  OptimizerSnapshot opt;
  opt.lr = r.get<double>();
  opt.step = r.get<std::uint64_t>();
  opt.epoch = r.get<std::uint64_t>();
  opt.average_count = r.get<std::uint64_t>();
  if (r.get<std::uint8_t>() != 0) opt.average = deserialize_model(r.get_string());
  const std::size_t body = r.position();
  if (r.get<std::uint64_t>() != fnv1a64(appendix.substr(0, body))) {
    throw Error(ErrorCode::FormatError, "optimizer appendix checksum mismatch");
  }
  return {std::move(state), std::move(opt)};
}

}  // namespace pmatch
