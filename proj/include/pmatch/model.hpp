// model.hpp - trainable encoders (pooled embeddings, multi-head
// self-attention) and the bilinear score head, with exact manual gradients.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmatch/matrix.hpp"
#include "pmatch/token.hpp"
#include "pmatch/vocab.hpp"

namespace pmatch {

enum class EncoderKind : std::uint8_t { TfIdf = 0, PooledEmbedding = 1, SelfAttentive = 2 };
enum class Pooling : std::uint8_t { Max = 0, Mean = 1 };

const char* encoder_kind_name(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);
const char* pooling_name(Pooling pooling);
Pooling parse_pooling(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::SelfAttentive;
  std::uint32_t d = 64;
  std::uint32_t layers = 1;
  std::uint32_t heads = 2;
  std::uint32_t d_k = 32;
  Pooling pooling = Pooling::Max;

  /// Two layers, four heads, d = 300, d_k = 128.
  static EncoderConfig reference();

  std::uint32_t value_dim() const { return heads == 0 ? 0 : d / heads; }
  std::size_t num_layers() const { return kind == EncoderKind::SelfAttentive ? layers : 0; }

  /// ConfigError on zero sizes or d not divisible by heads.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Per-layer projections; wq/wk are d x d_k, wv is d x (d/H), wo is d x d.
struct AttentionParams {
  std::vector<Matrix> wq, wk, wv;
  Matrix wo;

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

struct BilinearHead {
  Matrix w;
  double b = 0.0;

  friend bool operator==(const BilinearHead&, const BilinearHead&) = default;
};

struct ModelState {
  Vocabulary vocab;
  EncoderConfig config;
  Matrix embeddings;  // |V| x d
  std::vector<AttentionParams> layers;
  BilinearHead head;
  std::uint64_t rng_seed = 0;
  // Bumped on every parameter update; forward caches remember it.
  std::uint64_t generation = 0;

  std::size_t dim() const noexcept { return config.d; }

  /// Parameters only (generation is runtime bookkeeping).
  bool same_parameters(const ModelState& other) const;
};

/// Embeddings ~ N(0, 1), projections ~ U(-1/sqrt(d), 1/sqrt(d)), W = I / sqrt(d), b = 0.
ModelState init_model(Vocabulary vocab, const EncoderConfig& config, std::uint64_t seed);

/// Calls fn(name, values) for every parameter tensor in serialization order:
/// embeddings, then per layer and head wq, wk, wv, then wo, then W, then b.
template <typename State, typename Fn>
void for_each_parameter(State& state, Fn&& fn) {
  fn(std::string("embeddings"), state.embeddings.values());
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    auto& layer = state.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      const std::string hp = prefix + "head" + std::to_string(h) + ".";
      fn(hp + "wq", layer.wq[h].values());
      fn(hp + "wk", layer.wk[h].values());
      fn(hp + "wv", layer.wv[h].values());
    }
    fn(prefix + "wo", layer.wo.values());
  }
  fn(std::string("head.w"), state.head.w.values());
  fn(std::string("head.b"), std::span(&state.head.b, 1));
}

using TokenIds = std::vector<std::uint32_t>;

/// Sinusoidal position encoding added to attention inputs.
double position_encoding(std::size_t position, std::size_t dim, std::size_t d);

/// Activations retained by a forward pass for the matching backward pass.
struct EncodeCache {
  struct Layer {
    Matrix input;  // residual stream entering the layer, T x d
    Matrix attn_in;  // input + position encoding
    std::vector<Matrix> q, k, v, attn;  // per head
    Matrix concat;  // T x d
  };

  bool valid = false;
  std::uint64_t generation = 0;
  TokenIds ids;
  std::vector<Layer> layers;
  Matrix output;  // final residual stream, T x d
  std::vector<std::uint32_t> argmax;  // max pooling winner per dimension
};

/// Encodes a token-id sequence; fills `cache` when non-null.
std::vector<double> encode_ids(const ModelState& state, const TokenIds& ids, EncodeCache* cache = nullptr);

/// EmptyDocument for an empty list. Unknown tokens map to UNK.
std::vector<double> encode(const ModelState& state, const TokenList& doc);

/// s^T W p + b; DimensionMismatch on wrong sizes.
double score(const ModelState& state, std::span<const double> s, std::span<const double> p);
double score(const BilinearHead& head, std::span<const double> s, std::span<const double> p);

/// Gradients with the same layout as ModelState. Embedding gradients only
/// hold touched rows.
struct Gradients {
  std::map<std::uint32_t, std::vector<double>> embedding_rows;
  std::vector<AttentionParams> layers;
  Matrix w;
  double b = 0.0;

  static Gradients zeros_like(const ModelState& state);

  void add(const Gradients& other);
  void scale(double factor);
  double squared_norm() const;
  /// Squared norms per group: embeddings, attention, head.
  std::vector<double> group_norms() const;
};

/// Accumulates d(loss)/d(params) given d(loss)/d(encoding) into `grads`.
/// Throws StaleCache when the cache is empty or predates a parameter update.
void backward_encode(const ModelState& state, const EncodeCache& cache, std::span<const double> upstream,
                     Gradients& grads);

/// Forward pass over a batch of statements and proofs with the in-batch
/// score matrix m[i][j] = score(s_i, p_j).
struct BatchForward {
  std::vector<EncodeCache> statement_cache, proof_cache;
  Matrix statements;  // b x d
  Matrix proofs;      // b x d
  Matrix scores;      // b x b
};

BatchForward forward_batch(const ModelState& state, std::span<const TokenIds* const> statements,
                           std::span<const TokenIds* const> proofs);

/// Gradients of a loss given d(loss)/d(scores).
Gradients backward_batch(const ModelState& state, const BatchForward& forward, const Matrix& dscores);

}  // namespace pmatch
