#pragma once

#include <cstddef>

namespace ggan::detail {

// Row-major accumulating products. For every output element the sum runs over
// the inner index in increasing order, whatever the blocking, so results do
// not depend on matrix sizes.

/// C (m x n) += A (m x k) * B (k x n).
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc);

/// C (k x n) += A^T * B with A (m x k) and B (m x n).
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc);

}  // namespace ggan::detail
