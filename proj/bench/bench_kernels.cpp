// bench_kernels - wall-clock comparison of the serial and OpenMP kernels.
//
// usage: bench_kernels [n_docs] [d] [k]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "pmatch/kernels.hpp"
#include "pmatch/model.hpp"
#include "pmatch/rng.hpp"
#include "pmatch/vocab.hpp"

using namespace pmatch;

namespace {

template <typename Fn>
double time_ms(Fn&& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-14s %10.2f %10.2f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const std::size_t d = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 64;
  const std::size_t k = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 50;

  std::vector<Token> tokens;
  for (int i = 0; i < 500; ++i) tokens.push_back(Token::text("w" + std::to_string(i)));
  EncoderConfig config;
  config.kind = EncoderKind::SelfAttentive;
  config.d = d;
  config.heads = 2;
  config.d_k = d / 2;
  const auto state = init_model(Vocabulary::from_tokens(tokens), config, 1);

  Rng rng(7);
  std::vector<TokenIds> docs(n);
  for (auto& doc : docs) {
    doc.resize(20 + rng.below(40));
    for (auto& id : doc) id = static_cast<std::uint32_t>(1 + rng.below(500));
  }

  std::printf("threads %d, docs %zu, d %zu, k %zu\n", kernels::max_threads(), n, d, k);
  std::printf("%-14s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  Matrix enc_s, enc_p;
  const double e_s = time_ms([&] { enc_s = kernels::encode_all_serial(state, docs); }, 1);
  const double e_p = time_ms([&] { enc_p = kernels::encode_all_parallel(state, docs); }, 1);
  row("encode_all", e_s, e_p, enc_s == enc_p);

  Matrix proj_s, proj_p;
  const double p_s = time_ms([&] { proj_s = kernels::project_rows_serial(enc_s, state.head.w); });
  const double p_p = time_ms([&] { proj_p = kernels::project_rows_parallel(enc_s, state.head.w); });
  row("project_rows", p_s, p_p, proj_s == proj_p);

  Matrix sc_s, sc_p;
  const double s_s = time_ms([&] { sc_s = kernels::score_block_serial(enc_s, proj_s, state.head.b); });
  const double s_p = time_ms([&] { sc_p = kernels::score_block_parallel(enc_s, proj_s, state.head.b); });
  row("score_block", s_s, s_p, sc_s == sc_p);

  SparseScoreMatrix tk_s, tk_p;
  const double t_s = time_ms([&] { tk_s = kernels::prune_topk_serial(sc_s, k); });
  const double t_p = time_ms([&] { tk_p = kernels::prune_topk_parallel(sc_s, k); });
  row("prune_topk", t_s, t_p, tk_s.rows == tk_p.rows);
  return 0;
}
