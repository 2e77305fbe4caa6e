#include "pmatch/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pmatch/error.hpp"

namespace pmatch::kernels {
namespace {

void check_k(const Matrix& scores, std::size_t k) {
  if (scores.rows() != scores.cols()) throw Error(ErrorCode::SizeMismatch, "score matrix must be square");
  if (k < 1 || k > scores.cols()) {
    throw Error(ErrorCode::BadK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(scores.cols()) + "]");
  }
}

std::vector<SparseEntry> top_row(std::span<const double> row, std::size_t k, std::vector<std::uint32_t>& idx) {
  idx.resize(row.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  std::vector<SparseEntry> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back({idx[r], row[idx[r]]});
  return out;
}

void project_row(const Matrix& proofs, const Matrix& w, std::size_t j, Matrix& out) {
  const auto p = proofs.row(j);
  auto dst = out.row(j);
  for (std::size_t i = 0; i < w.rows(); ++i) dst[i] = dot(w.row(i), p);
}

void score_row(const Matrix& statements, const Matrix& projected, double bias, std::size_t i, Matrix& out) {
  const auto s = statements.row(i);
  auto dst = out.row(i);
  for (std::size_t j = 0; j < projected.rows(); ++j) dst[j] = dot(s, projected.row(j)) + bias;
}

}  // namespace

void configure_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("MATCH_THREADS")) {
    const int threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);
  }
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix project_rows_serial(const Matrix& proofs, const Matrix& w) {
  Matrix out(proofs.rows(), w.rows());
  for (std::size_t j = 0; j < proofs.rows(); ++j) project_row(proofs, w, j, out);
  return out;
}

Matrix project_rows_parallel(const Matrix& proofs, const Matrix& w) {
  Matrix out(proofs.rows(), w.rows());
  const auto n = static_cast<std::ptrdiff_t>(proofs.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) project_row(proofs, w, static_cast<std::size_t>(j), out);
  return out;
}

Matrix score_block_serial(const Matrix& statements, const Matrix& projected, double bias) {
  Matrix out(statements.rows(), projected.rows());
  for (std::size_t i = 0; i < statements.rows(); ++i) score_row(statements, projected, bias, i, out);
  return out;
}

Matrix score_block_parallel(const Matrix& statements, const Matrix& projected, double bias) {
  Matrix out(statements.rows(), projected.rows());
  const auto n = static_cast<std::ptrdiff_t>(statements.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) score_row(statements, projected, bias, static_cast<std::size_t>(i), out);
  return out;
}

SparseScoreMatrix prune_topk_serial(const Matrix& scores, std::size_t k) {
  check_k(scores, k);
  SparseScoreMatrix out;
  out.n = scores.rows();
  out.k = k;
  out.rows.resize(out.n);
  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < out.n; ++i) out.rows[i] = top_row(scores.row(i), k, idx);
  return out;
}

SparseScoreMatrix prune_topk_parallel(const Matrix& scores, std::size_t k) {
  check_k(scores, k);
  SparseScoreMatrix out;
  out.n = scores.rows();
  out.k = k;
  out.rows.resize(out.n);
  const auto n = static_cast<std::ptrdiff_t>(out.n);
#pragma omp parallel
  {
    std::vector<std::uint32_t> idx;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out.rows[static_cast<std::size_t>(i)] = top_row(scores.row(static_cast<std::size_t>(i)), k, idx);
    }
  }
  return out;
}

Matrix encode_all_serial(const ModelState& state, std::span<const TokenIds> docs) {
  Matrix out(docs.size(), state.dim());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto v = encode_ids(state, docs[i]);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

Matrix encode_all_parallel(const ModelState& state, std::span<const TokenIds> docs) {
  Matrix out(docs.size(), state.dim());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto v = encode_ids(state, docs[static_cast<std::size_t>(i)]);
      std::copy(v.begin(), v.end(), out.row(static_cast<std::size_t>(i)).begin());
    } catch (...) {
#pragma omp critical(pmatch_encode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace pmatch::kernels
