#include "gemm.hpp"

#include <vector>

// AVX2 clones where the CPU has them. Contraction stays off (no FMA), so the
// clones produce the same bits as the baseline path.
#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define GGAN_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define GGAN_KERNEL
#endif

namespace ggan::detail {

namespace {
constexpr std::size_t kRows = 4;
constexpr std::size_t kCols = 8;
}  // namespace

GGAN_KERNEL void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda,
                         const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    const std::size_t m_full = m - m % kRows;
    const std::size_t n_full = n - n % kCols;
    std::vector<double> panel(k * kRows);
    for (std::size_t i = 0; i < m_full; i += kRows) {
        // Rows i..i+3 of A interleaved, so the inner loop reads them contiguously.
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t r = 0; r < kRows; ++r) panel[p * kRows + r] = a[(i + r) * lda + p];
        for (std::size_t j = 0; j < n_full; j += kCols) {
            double acc[kRows][kCols];
            for (std::size_t r = 0; r < kRows; ++r)
                for (std::size_t q = 0; q < kCols; ++q) acc[r][q] = c[(i + r) * ldc + j + q];
            for (std::size_t p = 0; p < k; ++p) {
                const double* brow = b + p * ldb + j;
                const double* arow = panel.data() + p * kRows;
                for (std::size_t r = 0; r < kRows; ++r) {
                    const double av = arow[r];
                    for (std::size_t q = 0; q < kCols; ++q) acc[r][q] += av * brow[q];
                }
            }
            for (std::size_t r = 0; r < kRows; ++r)
                for (std::size_t q = 0; q < kCols; ++q) c[(i + r) * ldc + j + q] = acc[r][q];
        }
        for (std::size_t r = i; r < i + kRows; ++r) {
            for (std::size_t j = n_full; j < n; ++j) {
                double s = c[r * ldc + j];
                for (std::size_t p = 0; p < k; ++p) s += a[r * lda + p] * b[p * ldb + j];
                c[r * ldc + j] = s;
            }
        }
    }
    for (std::size_t r = m_full; r < m; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[r * lda + p];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

GGAN_KERNEL void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda,
                         const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    const std::size_t k_full = k - k % kRows;
    const std::size_t n_full = n - n % kCols;
    for (std::size_t i = 0; i < k_full; i += kRows) {
        for (std::size_t j = 0; j < n_full; j += kCols) {
            double acc[kRows][kCols];
            for (std::size_t r = 0; r < kRows; ++r)
                for (std::size_t q = 0; q < kCols; ++q) acc[r][q] = c[(i + r) * ldc + j + q];
            for (std::size_t p = 0; p < m; ++p) {
                const double* brow = b + p * ldb + j;
                const double* arow = a + p * lda + i;
                for (std::size_t r = 0; r < kRows; ++r) {
                    const double av = arow[r];
                    for (std::size_t q = 0; q < kCols; ++q) acc[r][q] += av * brow[q];
                }
            }
            for (std::size_t r = 0; r < kRows; ++r)
                for (std::size_t q = 0; q < kCols; ++q) c[(i + r) * ldc + j + q] = acc[r][q];
        }
        for (std::size_t r = i; r < i + kRows; ++r) {
            for (std::size_t j = n_full; j < n; ++j) {
                double s = c[r * ldc + j];
                for (std::size_t p = 0; p < m; ++p) s += a[p * lda + r] * b[p * ldb + j];
                c[r * ldc + j] = s;
            }
        }
    }
    for (std::size_t r = k_full; r < k; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t p = 0; p < m; ++p) {
            const double av = a[p * lda + r];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace ggan::detail
