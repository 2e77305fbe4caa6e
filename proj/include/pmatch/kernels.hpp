// kernels.hpp - data-parallel kernels and their serial references.
//
// The parallel versions use OpenMP over independent rows/documents and keep
// each output cell's summation order identical to the serial version, so
// results are bitwise equal. Tests and bench_kernels compare the two.
#pragma once

#include <span>

#include "pmatch/assignment.hpp"
#include "pmatch/matrix.hpp"
#include "pmatch/model.hpp"

namespace pmatch::kernels {

/// Sets the OpenMP thread cap from MATCH_THREADS when present.
void configure_threads_from_env();
int max_threads();

/// projected[j] = W * p_j for every proof row.
Matrix project_rows_serial(const Matrix& proofs, const Matrix& w);
Matrix project_rows_parallel(const Matrix& proofs, const Matrix& w);

/// out[i][j] = dot(statements[i], projected[j]) + bias.
Matrix score_block_serial(const Matrix& statements, const Matrix& projected, double bias);
Matrix score_block_parallel(const Matrix& statements, const Matrix& projected, double bias);

SparseScoreMatrix prune_topk_serial(const Matrix& scores, std::size_t k);
SparseScoreMatrix prune_topk_parallel(const Matrix& scores, std::size_t k);

/// Encodes every document into one row of the result.
Matrix encode_all_serial(const ModelState& state, std::span<const TokenIds> docs);
Matrix encode_all_parallel(const ModelState& state, std::span<const TokenIds> docs);

}  // namespace pmatch::kernels
