#include "gemm.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <vector>

namespace dbp::detail {

namespace {

constexpr std::size_t kRows = 6;    // micro-tile rows
constexpr std::size_t kCols = 16;   // micro-tile columns
constexpr std::size_t kDepth = 512; // k-block held in the packed panel

// GCC/Clang vector extension; lowers to the widest SIMD the target offers.
typedef double Lane __attribute__((vector_size(64)));
constexpr std::size_t kLane = sizeof(Lane) / sizeof(double);
static_assert(kCols == 2 * kLane);

// The tile is loaded from C, advanced over one k-block, and stored back, so the
// per-element summation order is k = 0, 1, ..., K-1 regardless of blocking.
void micro_tile(std::size_t depth, const double* const* a_rows, const double* panel, double* c,
                std::size_t ldc, std::size_t rows, std::size_t cols) {
    alignas(64) double tile[kRows][kCols] = {};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) tile[r][j] = c[r * ldc + j];

    Lane acc[kRows][2];
    for (std::size_t r = 0; r < kRows; ++r) {
        std::memcpy(&acc[r][0], &tile[r][0], sizeof(Lane));
        std::memcpy(&acc[r][1], &tile[r][kLane], sizeof(Lane));
    }

    for (std::size_t p = 0; p < depth; ++p) {
        Lane b0, b1;
        std::memcpy(&b0, panel + p * kCols, sizeof(Lane));
        std::memcpy(&b1, panel + p * kCols + kLane, sizeof(Lane));
#pragma GCC unroll 8
        for (std::size_t r = 0; r < kRows; ++r) {
            const double av = a_rows[r][p];
            acc[r][0] += av * b0;
            acc[r][1] += av * b1;
        }
    }

    for (std::size_t r = 0; r < kRows; ++r) {
        std::memcpy(&tile[r][0], &acc[r][0], sizeof(Lane));
        std::memcpy(&tile[r][kLane], &acc[r][1], sizeof(Lane));
    }
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] = tile[r][j];
}

template <bool kTransposedB>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    std::fill(c, c + m * n, 0.0);
    if (m == 0 || n == 0 || k == 0) return;

    thread_local std::vector<double> panel(kDepth * kCols);
    thread_local std::vector<double> zeros(kDepth, 0.0);

    for (std::size_t k0 = 0; k0 < k; k0 += kDepth) {
        const std::size_t depth = std::min(kDepth, k - k0);
        for (std::size_t j0 = 0; j0 < n; j0 += kCols) {
            const std::size_t cols = std::min(kCols, n - j0);
            double* dst = panel.data();
            if constexpr (kTransposedB) {
                std::fill(dst, dst + depth * kCols, 0.0);
                for (std::size_t j = 0; j < cols; ++j) {
                    const double* src = b + (j0 + j) * k + k0;
                    for (std::size_t p = 0; p < depth; ++p) dst[p * kCols + j] = src[p];
                }
            } else {
                for (std::size_t p = 0; p < depth; ++p) {
                    const double* src = b + (k0 + p) * n + j0;
                    std::size_t j = 0;
                    for (; j < cols; ++j) dst[p * kCols + j] = src[j];
                    for (; j < kCols; ++j) dst[p * kCols + j] = 0.0;
                }
            }
            for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
                const std::size_t rows = std::min(kRows, m - i0);
                std::array<const double*, kRows> a_rows{};
                for (std::size_t r = 0; r < kRows; ++r) {
                    a_rows[r] = r < rows ? a + (i0 + r) * k + k0 : zeros.data();
                }
                micro_tile(depth, a_rows.data(), panel.data(), c + i0 * n + j0, n, rows, cols);
            }
        }
    }
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    gemm_impl<false>(m, n, k, a, b, c);
}

void gemm_bt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    gemm_impl<true>(m, n, k, a, b, c);
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
    constexpr std::size_t kBlock = 32;
    for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
        const std::size_t i1 = std::min(rows, i0 + kBlock);
        for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
            const std::size_t j1 = std::min(cols, j0 + kBlock);
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = in[i * cols + j];
        }
    }
}

}  // namespace dbp::detail
