#pragma once

#include <cstdint>

namespace ynetr::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C, where op(A) is m x k and
// op(B) is k x n. Leading dimensions are row strides of the stored matrices.
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
          std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c, std::int64_t ldc);

}  // namespace ynetr::detail
