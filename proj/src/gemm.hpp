#pragma once

#include <cstddef>

namespace dbp::detail {

/// C (m x n) = A (m x k) * B (k x n), all row-major and densely packed.
///
/// Every output element is accumulated over k in ascending order starting from
/// zero, independent of tiling, so results do not depend on matrix position or
/// on how callers partition work.
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

/// C (m x n) = A (m x k) * B^T, with B stored row-major as (n x k). Same
/// summation order guarantee as gemm().
void gemm_bt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

/// out (cols x rows) = transpose of in (rows x cols).
void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);

}  // namespace dbp::detail
