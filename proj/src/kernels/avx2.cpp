// AVX2 + FMA float kernels. This translation unit is compiled with
// -mavx2 -mfma and must only be entered after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "shadowae/kernels.hpp"

namespace shadowae::kernels::avx2 {
namespace {

constexpr std::size_t kRows = 4;
constexpr std::size_t kCols = 16;
constexpr std::size_t kDepth = 256;

struct PackBuffers {
  std::vector<float> a;
  std::vector<float> b;
};

PackBuffers& buffers() {
  thread_local PackBuffers bufs;
  return bufs;
}

// c[4 x 16] += a[4 x kc] * b[kc x 16]; a rows have stride lda, b rows stride ldb.
inline void micro_4x16(std::size_t kc, const float* a, std::size_t lda, const float* b,
                       std::size_t ldb, float* c, std::size_t ldc) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
    const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
    __m256 av = _mm256_broadcast_ss(a + p);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a + lda + p);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a + 2 * lda + p);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a + 3 * lda + p);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
  }
  auto store = [](float* dst, __m256 lo, __m256 hi) {
    _mm256_storeu_ps(dst, _mm256_add_ps(_mm256_loadu_ps(dst), lo));
    _mm256_storeu_ps(dst + 8, _mm256_add_ps(_mm256_loadu_ps(dst + 8), hi));
  };
  store(c, c00, c01);
  store(c + ldc, c10, c11);
  store(c + 2 * ldc, c20, c21);
  store(c + 3 * ldc, c30, c31);
}

inline void micro_1x16(std::size_t kc, const float* a, const float* b, std::size_t ldb,
                       float* c) {
  __m256 c0 = _mm256_setzero_ps(), c1 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 av = _mm256_broadcast_ss(a + p);
    c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * ldb), c0);
    c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * ldb + 8), c1);
  }
  _mm256_storeu_ps(c, _mm256_add_ps(_mm256_loadu_ps(c), c0));
  _mm256_storeu_ps(c + 8, _mm256_add_ps(_mm256_loadu_ps(c + 8), c1));
}

}  // namespace

void gemm(const GemmArgs& g, const float* a, const float* b, float* c) {
  const std::size_t m = g.m, n = g.n, k = g.k;
  if (m == 0 || n == 0) return;
  if (!g.accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * g.ldc, n, 0.0f);
  }
  if (k == 0) return;

  // Pack op(A) as m x k and op(B) as k x n_pad, both contiguous row-major.
  const std::size_t n_pad = (n + kCols - 1) / kCols * kCols;
  auto& bufs = buffers();
  bufs.a.resize(m * k);
  bufs.b.assign(k * n_pad, 0.0f);
  float* ap = bufs.a.data();
  float* bp = bufs.b.data();
  if (g.trans_a) {
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) ap[i * k + p] = a[p * g.lda + i];
  } else {
    for (std::size_t i = 0; i < m; ++i) std::memcpy(ap + i * k, a + i * g.lda, k * sizeof(float));
  }
  if (g.trans_b) {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bp[p * n_pad + j] = b[j * g.ldb + p];
  } else {
    for (std::size_t p = 0; p < k; ++p) std::memcpy(bp + p * n_pad, b + p * g.ldb, n * sizeof(float));
  }

  // Output tiles that run past n go through a padded scratch tile.
  alignas(32) float tile[kRows * kCols];
  const std::size_t m_main = m / kRows * kRows;
  for (std::size_t p0 = 0; p0 < k; p0 += kDepth) {
    const std::size_t kc = std::min(kDepth, k - p0);
    for (std::size_t j = 0; j < n_pad; j += kCols) {
      const float* bblk = bp + p0 * n_pad + j;
      const bool full = j + kCols <= n;
      const std::size_t width = full ? kCols : n - j;
      for (std::size_t i = 0; i < m_main; i += kRows) {
        const float* ablk = ap + i * k + p0;
        if (full) {
          micro_4x16(kc, ablk, k, bblk, n_pad, c + i * g.ldc + j, g.ldc);
        } else {
          std::fill_n(tile, kRows * kCols, 0.0f);
          micro_4x16(kc, ablk, k, bblk, n_pad, tile, kCols);
          for (std::size_t r = 0; r < kRows; ++r)
            for (std::size_t q = 0; q < width; ++q) c[(i + r) * g.ldc + j + q] += tile[r * kCols + q];
        }
      }
      for (std::size_t i = m_main; i < m; ++i) {
        const float* arow = ap + i * k + p0;
        if (full) {
          micro_1x16(kc, arow, bblk, n_pad, c + i * g.ldc + j);
        } else {
          std::fill_n(tile, kCols, 0.0f);
          micro_1x16(kc, arow, bblk, n_pad, tile);
          for (std::size_t q = 0; q < width; ++q) c[i * g.ldc + j + q] += tile[q];
        }
      }
    }
  }
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_mul_ps(va, _mm256_loadu_ps(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void leaky_relu(std::size_t n, float slope, const float* in, float* out) {
  const __m256 vs = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(in + i);
    const __m256 neg = _mm256_cmp_ps(v, zero, _CMP_LT_OQ);
    _mm256_storeu_ps(out + i, _mm256_blendv_ps(v, _mm256_mul_ps(v, vs), neg));
  }
  for (; i < n; ++i) out[i] = in[i] >= 0.0f ? in[i] : slope * in[i];
}

void leaky_relu_backward(std::size_t n, float slope, const float* in, const float* gout,
                         float* gin) {
  const __m256 vs = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(in + i);
    const __m256 go = _mm256_loadu_ps(gout + i);
    const __m256 neg = _mm256_cmp_ps(v, zero, _CMP_LT_OQ);
    const __m256 contrib = _mm256_blendv_ps(go, _mm256_mul_ps(go, vs), neg);
    _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), contrib));
  }
  for (; i < n; ++i) gin[i] += in[i] >= 0.0f ? gout[i] : slope * gout[i];
}

void momentum_step(std::size_t n, float lr, float mu, const float* g, float* v, float* p) {
  const __m256 vmu = _mm256_set1_ps(mu);
  const __m256 vlr = _mm256_set1_ps(lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // Same rounding sequence as the scalar loop: two products, one subtract.
    const __m256 nv = _mm256_sub_ps(_mm256_mul_ps(vmu, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(vlr, _mm256_loadu_ps(g + i)));
    _mm256_storeu_ps(v + i, nv);
    _mm256_storeu_ps(p + i, _mm256_add_ps(_mm256_loadu_ps(p + i), nv));
  }
  for (; i < n; ++i) {
    v[i] = mu * v[i] - lr * g[i];
    p[i] += v[i];
  }
}

}  // namespace shadowae::kernels::avx2
