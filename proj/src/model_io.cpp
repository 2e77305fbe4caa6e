#include "pmatch/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

void put_matrix(binio::Writer& w, std::span<const double> values, std::size_t rows, std::size_t cols) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rows));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cols));
  for (double v : values) w.put<double>(v);
}

void get_matrix(binio::Reader& r, Matrix& into, const std::string& name) {
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  if (rows != into.rows() || cols != into.cols()) {
    throw Error(ErrorCode::FormatError, "tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                                            std::to_string(cols) + ", expected " + std::to_string(into.rows()) +
                                            "x" + std::to_string(into.cols()));
  }
  for (double& v : into.values()) {
    v = r.get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::FormatError, "tensor '" + name + "' holds a non-finite value");
  }
}

}  // namespace

std::string serialize_model(const ModelState& state) {
  binio::Writer w;
  w.put_bytes(std::string_view(kModelMagic, 4));
  w.put<std::uint32_t>(kModelFormatVersion);
  const auto& c = state.config;
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.kind));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.pooling));
  w.put<std::uint32_t>(c.d);
  w.put<std::uint32_t>(c.layers);
  w.put<std::uint32_t>(c.heads);
  w.put<std::uint32_t>(c.d_k);
  w.put<std::uint64_t>(state.rng_seed);

  const auto& tokens = state.vocab.tokens();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.kind));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.font));
    w.put_string(t.surface);
  }
  w.put<std::uint32_t>(state.vocab.min_freq());

  const ModelState& s = state;
  std::uint32_t count = 0;
  for_each_parameter(s, [&](const std::string&, std::span<const double>) { ++count; });
  w.put<std::uint32_t>(count);
  put_matrix(w, state.embeddings.values(), state.embeddings.rows(), state.embeddings.cols());
  for (const auto& layer : state.layers) {
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      put_matrix(w, layer.wq[h].values(), layer.wq[h].rows(), layer.wq[h].cols());
      put_matrix(w, layer.wk[h].values(), layer.wk[h].rows(), layer.wk[h].cols());
      put_matrix(w, layer.wv[h].values(), layer.wv[h].rows(), layer.wv[h].cols());
    }
    put_matrix(w, layer.wo.values(), layer.wo.rows(), layer.wo.cols());
  }
  put_matrix(w, state.head.w.values(), state.head.w.rows(), state.head.w.cols());
  put_matrix(w, std::span(&state.head.b, 1), 1, 1);

  w.put<std::uint64_t>(fnv1a64(w.bytes()));
  return w.take();
}

ModelState deserialize_model(std::string_view bytes, std::size_t* consumed) {
  binio::Reader r(bytes);
  if (r.get_bytes(4) != std::string_view(kModelMagic, 4)) throw Error(ErrorCode::FormatError, "bad model magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::FormatError, "unsupported model format version " + std::to_string(version));
  }
  EncoderConfig config;
  const auto kind = r.get<std::uint8_t>();
  const auto pooling = r.get<std::uint8_t>();
  if (kind > 2 || pooling > 1) throw Error(ErrorCode::FormatError, "bad encoder config");
  config.kind = static_cast<EncoderKind>(kind);
  config.pooling = static_cast<Pooling>(pooling);
  config.d = r.get<std::uint32_t>();
  config.layers = r.get<std::uint32_t>();
  config.heads = r.get<std::uint32_t>();
  config.d_k = r.get<std::uint32_t>();
  const auto seed = r.get<std::uint64_t>();
  try {
    config.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, e.what());
  }

  const auto vocab_size = r.get<std::uint32_t>();
  std::vector<Token> tokens;
  tokens.reserve(std::min<std::size_t>(vocab_size, r.remaining()));
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    Token t;
    const auto tk = r.get<std::uint8_t>();
    const auto font = r.get<std::uint8_t>();
    if (tk > 1 || font > static_cast<std::uint8_t>(Font::Other)) throw Error(ErrorCode::FormatError, "bad token");
    t.kind = static_cast<TokenKind>(tk);
    t.font = static_cast<Font>(font);
    t.surface = r.get_string();
    tokens.push_back(std::move(t));
  }
  const auto min_freq = r.get<std::uint32_t>();

  // Allocate the declared shapes, then read into them.
  ModelState state = init_model(Vocabulary::from_tokens(std::move(tokens), min_freq), config, seed);
  std::uint32_t expected = 0;
  for_each_parameter(state, [&](const std::string&, std::span<double>) { ++expected; });
  const auto count = r.get<std::uint32_t>();
  if (count != expected) throw Error(ErrorCode::FormatError, "unexpected tensor count");
  get_matrix(r, state.embeddings, "embeddings");
  for (auto& layer : state.layers) {
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      get_matrix(r, layer.wq[h], "wq");
      get_matrix(r, layer.wk[h], "wk");
      get_matrix(r, layer.wv[h], "wv");
    }
    get_matrix(r, layer.wo, "wo");
  }
  get_matrix(r, state.head.w, "head.w");
  Matrix bias(1, 1);
  get_matrix(r, bias, "head.b");
  state.head.b = bias(0, 0);

  const std::size_t body = r.position();
  const auto checksum = r.get<std::uint64_t>();
  if (checksum != fnv1a64(bytes.substr(0, body))) throw Error(ErrorCode::FormatError, "model checksum mismatch");
  if (consumed != nullptr) *consumed = r.position();
  return state;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

void save_model(const ModelState& state, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_model(state));
}

ModelState load_model(const std::filesystem::path& path) { return deserialize_model(read_file_bytes(path)); }

}  // namespace pmatch
