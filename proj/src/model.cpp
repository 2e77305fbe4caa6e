#include "pmatch/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

std::string lowercase(std::string_view s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void fill_uniform(Matrix& m, Rng& rng, double bound) {
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
}

// Row-wise softmax in place.
void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double hi = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - hi);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

// Dense copy of a column block [c0, c0 + width) of m.
Matrix column_block(const Matrix& m, std::size_t c0, std::size_t width) {
  Matrix out(m.rows(), width);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = m(i, c0 + j);
  return out;
}

void check_cache(const ModelState& state, const EncodeCache& cache) {
  if (!cache.valid) throw Error(ErrorCode::StaleCache, "backward called without a forward pass");
  if (cache.generation != state.generation) {
    throw Error(ErrorCode::StaleCache, "forward cache predates the latest parameter update");
  }
}

}  // namespace

const char* encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::TfIdf: return "tfidf";
    case EncoderKind::PooledEmbedding: return "pooled";
    case EncoderKind::SelfAttentive: return "attention";
  }
  return "attention";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "tfidf" || s == "tf-idf") return EncoderKind::TfIdf;
  if (s == "pooled" || s == "pooledembedding" || s == "embedding") return EncoderKind::PooledEmbedding;
  if (s == "attention" || s == "selfattentive" || s == "npt") return EncoderKind::SelfAttentive;
  throw Error(ErrorCode::ConfigError, "unknown encoder '" + std::string(name) + "'");
}

const char* pooling_name(Pooling pooling) { return pooling == Pooling::Max ? "max" : "mean"; }

Pooling parse_pooling(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "max") return Pooling::Max;
  if (s == "mean") return Pooling::Mean;
  throw Error(ErrorCode::ConfigError, "unknown pooling '" + std::string(name) + "'");
}

EncoderConfig EncoderConfig::reference() {
  EncoderConfig c;
  c.kind = EncoderKind::SelfAttentive;
  c.d = 300;
  c.layers = 2;
  c.heads = 4;
  c.d_k = 128;
  c.pooling = Pooling::Max;
  return c;
}

void EncoderConfig::validate() const {
  if (d == 0) throw Error(ErrorCode::ConfigError, "d must be positive");
  if (kind == EncoderKind::SelfAttentive) {
    if (heads == 0 || d_k == 0) throw Error(ErrorCode::ConfigError, "heads and d_k must be positive");
    if (d % heads != 0) throw Error(ErrorCode::ConfigError, "d must be divisible by heads");
  }
}

bool ModelState::same_parameters(const ModelState& other) const {
  return vocab == other.vocab && config == other.config && embeddings == other.embeddings &&
         layers == other.layers && head == other.head && rng_seed == other.rng_seed;
}

ModelState init_model(Vocabulary vocab, const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.kind == EncoderKind::TfIdf) throw Error(ErrorCode::ConfigError, "TF-IDF has no trainable state");
  ModelState state;
  state.vocab = std::move(vocab);
  state.config = config;
  state.rng_seed = seed;
  const std::size_t d = config.d;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(seed);

  // Unit-variance embeddings; with the 1/sqrt(d) scale the initial scores
  // are too flat for SGD at lr 5e-3 to move in a few hundred steps.
  state.embeddings = Matrix(state.vocab.size(), d);
  for (double& v : state.embeddings.values()) v = rng.normal();
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    AttentionParams layer;
    for (std::size_t h = 0; h < config.heads; ++h) {
      layer.wq.emplace_back(d, config.d_k);
      layer.wk.emplace_back(d, config.d_k);
      layer.wv.emplace_back(d, config.value_dim());
      fill_uniform(layer.wq.back(), rng, bound);
      fill_uniform(layer.wk.back(), rng, bound);
      fill_uniform(layer.wv.back(), rng, bound);
    }
    layer.wo = Matrix(d, d);
    fill_uniform(layer.wo, rng, bound);
    state.layers.push_back(std::move(layer));
  }
  state.head.w = Matrix::identity(d, bound);
  state.head.b = 0.0;
  return state;
}

double position_encoding(std::size_t position, std::size_t dim, std::size_t d) {
  const double exponent = static_cast<double>(dim - dim % 2) / static_cast<double>(d);
  const double angle = static_cast<double>(position) / std::pow(10000.0, exponent);
  return dim % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

std::vector<double> encode_ids(const ModelState& state, const TokenIds& ids, EncodeCache* cache) {
  if (ids.empty()) throw Error(ErrorCode::EmptyDocument, "cannot encode an empty document");
  const std::size_t d = state.config.d;
  const std::size_t T = ids.size();

  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const auto id = ids[t] < state.embeddings.rows() ? ids[t] : Vocabulary::kUnk;
    std::copy_n(state.embeddings.row(id).begin(), d, x.row(t).begin());
  }

  if (cache != nullptr) {
    cache->valid = false;
    cache->ids = ids;
    cache->layers.clear();
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(state.config.d_k));
  for (const auto& layer : state.layers) {
    Matrix u = x;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) u(t, j) += position_encoding(t, j, d);

    const std::size_t heads = layer.wq.size();
    const std::size_t dv = state.config.value_dim();
    Matrix concat(T, d);
    EncodeCache::Layer record;
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix q = matmul(u, layer.wq[h]);
      Matrix k = matmul(u, layer.wk[h]);
      Matrix v = matmul(u, layer.wv[h]);
      Matrix attn = matmul_nt(q, k);
      for (double& s : attn.values()) s *= inv_sqrt_dk;
      softmax_rows(attn);
      const Matrix z = matmul(attn, v);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < dv; ++j) concat(t, h * dv + j) = z(t, j);
      if (cache != nullptr) {
        record.q.push_back(std::move(q));
        record.k.push_back(std::move(k));
        record.v.push_back(std::move(v));
        record.attn.push_back(std::move(attn));
      }
    }
    const Matrix out = matmul(concat, layer.wo);
    if (cache != nullptr) {
      record.input = x;
      record.attn_in = std::move(u);
      record.concat = std::move(concat);
      cache->layers.push_back(std::move(record));
    }
    for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] += out.values()[i];
  }

  std::vector<double> pooled(d);
  std::vector<std::uint32_t> argmax;
  if (state.config.pooling == Pooling::Max) {
    argmax.assign(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
      double best = x(0, j);
      for (std::size_t t = 1; t < T; ++t) {
        if (x(t, j) > best) {  // strict: ties keep the lowest position
          best = x(t, j);
          argmax[j] = static_cast<std::uint32_t>(t);
        }
      }
      pooled[j] = best;
    }
  } else {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) pooled[j] += x(t, j);
    for (double& v : pooled) v /= static_cast<double>(T);
  }

  if (cache != nullptr) {
    cache->output = std::move(x);
    cache->argmax = std::move(argmax);
    cache->generation = state.generation;
    cache->valid = true;
  }
  return pooled;
}

std::vector<double> encode(const ModelState& state, const TokenList& doc) {
  if (doc.empty()) throw Error(ErrorCode::EmptyDocument, "cannot encode an empty document");
  return encode_ids(state, state.vocab.encode(doc));
}

double score(const BilinearHead& head, std::span<const double> s, std::span<const double> p) {
  const std::size_t d = head.w.rows();
  if (s.size() != d || p.size() != d || head.w.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "score expects vectors of dimension " + std::to_string(d));
  }
  // Same order of operations as the projected score-matrix kernels.
  std::vector<double> wp(d);
  for (std::size_t i = 0; i < d; ++i) wp[i] = dot(head.w.row(i), p);
  return dot(s, wp) + head.b;
}

double score(const ModelState& state, std::span<const double> s, std::span<const double> p) {
  return score(state.head, s, p);
}

Gradients Gradients::zeros_like(const ModelState& state) {
  Gradients g;
  for (const auto& layer : state.layers) {
    AttentionParams z;
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      z.wq.emplace_back(layer.wq[h].rows(), layer.wq[h].cols());
      z.wk.emplace_back(layer.wk[h].rows(), layer.wk[h].cols());
      z.wv.emplace_back(layer.wv[h].rows(), layer.wv[h].cols());
    }
    z.wo = Matrix(layer.wo.rows(), layer.wo.cols());
    g.layers.push_back(std::move(z));
  }
  g.w = Matrix(state.head.w.rows(), state.head.w.cols());
  return g;
}

void Gradients::add(const Gradients& other) {
  for (const auto& [row, values] : other.embedding_rows) {
    auto& dst = embedding_rows[row];
    if (dst.empty()) dst.assign(values.size(), 0.0);
    for (std::size_t j = 0; j < values.size(); ++j) dst[j] += values[j];
  }
  auto add_to = [](Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += b.values()[i];
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t h = 0; h < layers[l].wq.size(); ++h) {
      add_to(layers[l].wq[h], other.layers[l].wq[h]);
      add_to(layers[l].wk[h], other.layers[l].wk[h]);
      add_to(layers[l].wv[h], other.layers[l].wv[h]);
    }
    add_to(layers[l].wo, other.layers[l].wo);
  }
  add_to(w, other.w);
  b += other.b;
}

void Gradients::scale(double factor) {
  for (auto& [_, values] : embedding_rows)
    for (double& v : values) v *= factor;
  for (auto& layer : layers) {
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      for (double& v : layer.wq[h].values()) v *= factor;
      for (double& v : layer.wk[h].values()) v *= factor;
      for (double& v : layer.wv[h].values()) v *= factor;
    }
    for (double& v : layer.wo.values()) v *= factor;
  }
  for (double& v : w.values()) v *= factor;
  b *= factor;
}

std::vector<double> Gradients::group_norms() const {
  double emb = 0.0, att = 0.0, hd = 0.0;
  for (const auto& [_, values] : embedding_rows)
    for (double v : values) emb += v * v;
  for (const auto& layer : layers) {
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      for (double v : layer.wq[h].values()) att += v * v;
      for (double v : layer.wk[h].values()) att += v * v;
      for (double v : layer.wv[h].values()) att += v * v;
    }
    for (double v : layer.wo.values()) att += v * v;
  }
  for (double v : w.values()) hd += v * v;
  hd += b * b;
  return {emb, att, hd};
}

double Gradients::squared_norm() const {
  const auto groups = group_norms();
  return groups[0] + groups[1] + groups[2];
}

void backward_encode(const ModelState& state, const EncodeCache& cache, std::span<const double> upstream,
                     Gradients& grads) {
  check_cache(state, cache);
  const std::size_t d = state.config.d;
  if (upstream.size() != d) throw Error(ErrorCode::DimensionMismatch, "upstream gradient has wrong dimension");
  const std::size_t T = cache.ids.size();

  // Pooling.
  Matrix dx(T, d);
  if (state.config.pooling == Pooling::Max) {
    for (std::size_t j = 0; j < d; ++j) dx(cache.argmax[j], j) = upstream[j];
  } else {
    const double inv = 1.0 / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) dx(t, j) = upstream[j] * inv;
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(state.config.d_k));
  const std::size_t dv = state.config.value_dim();
  for (std::size_t l = state.layers.size(); l-- > 0;) {
    const auto& layer = state.layers[l];
    const auto& rec = cache.layers[l];
    auto& g = grads.layers[l];

    // x_out = x_in + concat * wo; dx is d(x_out).
    add_matmul_tn(g.wo, rec.concat, dx);
    const Matrix dconcat = matmul_nt(dx, layer.wo);
    Matrix du(T, d);
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      const Matrix dz = column_block(dconcat, h * dv, dv);
      const Matrix& attn = rec.attn[h];
      // z = attn * v
      Matrix dattn = matmul_nt(dz, rec.v[h]);
      const Matrix dv_h = matmul_tn(attn, dz);
      // softmax backward, then the 1/sqrt(d_k) scaling.
      Matrix dscores(T, T);
      for (std::size_t i = 0; i < T; ++i) {
        const double inner = dot(dattn.row(i), attn.row(i));
        for (std::size_t j = 0; j < T; ++j) dscores(i, j) = attn(i, j) * (dattn(i, j) - inner) * inv_sqrt_dk;
      }
      // scores = q * k^T
      const Matrix dq = matmul(dscores, rec.k[h]);
      const Matrix dk = matmul_tn(dscores, rec.q[h]);
      add_matmul_tn(g.wq[h], rec.attn_in, dq);
      add_matmul_tn(g.wk[h], rec.attn_in, dk);
      add_matmul_tn(g.wv[h], rec.attn_in, dv_h);
      const Matrix from_q = matmul_nt(dq, layer.wq[h]);
      const Matrix from_k = matmul_nt(dk, layer.wk[h]);
      const Matrix from_v = matmul_nt(dv_h, layer.wv[h]);
      for (std::size_t i = 0; i < du.size(); ++i)
        du.values()[i] += from_q.values()[i] + from_k.values()[i] + from_v.values()[i];
    }
    // The position encoding is a constant, so d(x_in) = dx + du.
    for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] += du.values()[i];
  }

  for (std::size_t t = 0; t < T; ++t) {
    const auto id = cache.ids[t] < state.embeddings.rows() ? cache.ids[t] : Vocabulary::kUnk;
    auto& row = grads.embedding_rows[id];
    if (row.empty()) row.assign(d, 0.0);
    const auto src = dx.row(t);
    for (std::size_t j = 0; j < d; ++j) row[j] += src[j];
  }
}

BatchForward forward_batch(const ModelState& state, std::span<const TokenIds* const> statements,
                           std::span<const TokenIds* const> proofs) {
  if (statements.size() != proofs.size()) throw Error(ErrorCode::SizeMismatch, "batch sides differ in size");
  const std::size_t b = statements.size();
  const std::size_t d = state.config.d;
  BatchForward fwd;
  fwd.statement_cache.resize(b);
  fwd.proof_cache.resize(b);
  fwd.statements = Matrix(b, d);
  fwd.proofs = Matrix(b, d);

  const auto total = static_cast<std::ptrdiff_t>(2 * b);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) if (total >= 16)
  for (std::ptrdiff_t n = 0; n < total; ++n) {
    try {
      const auto i = static_cast<std::size_t>(n) % b;
      const bool is_proof = static_cast<std::size_t>(n) >= b;
      auto& cache = is_proof ? fwd.proof_cache[i] : fwd.statement_cache[i];
      const auto vec = encode_ids(state, is_proof ? *proofs[i] : *statements[i], &cache);
      auto dst = is_proof ? fwd.proofs.row(i) : fwd.statements.row(i);
      std::copy(vec.begin(), vec.end(), dst.begin());
    } catch (...) {
#pragma omp critical(pmatch_forward_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // scores = S W P^T + b
  const Matrix sw = matmul(fwd.statements, state.head.w);
  fwd.scores = matmul_nt(sw, fwd.proofs);
  for (double& v : fwd.scores.values()) v += state.head.b;
  return fwd;
}

Gradients backward_batch(const ModelState& state, const BatchForward& fwd, const Matrix& dscores) {
  const std::size_t b = fwd.statements.rows();
  if (dscores.rows() != b || dscores.cols() != b) {
    throw Error(ErrorCode::DimensionMismatch, "score gradient does not match the batch");
  }
  Gradients grads = Gradients::zeros_like(state);
  for (double v : dscores.values()) grads.b += v;
  // dW = S^T G P
  const Matrix gp = matmul(dscores, fwd.proofs);
  add_matmul_tn(grads.w, fwd.statements, gp);
  // dS = G P W^T, dP = G^T S W
  const Matrix ds = matmul_nt(gp, state.head.w);
  const Matrix dp = matmul(matmul_tn(dscores, fwd.statements), state.head.w);

  for (std::size_t i = 0; i < b; ++i) backward_encode(state, fwd.statement_cache[i], ds.row(i), grads);
  for (std::size_t i = 0; i < b; ++i) backward_encode(state, fwd.proof_cache[i], dp.row(i), grads);
  return grads;
}

}  // namespace pmatch
