#include "shadowae/kernels.hpp"

namespace shadowae::kernels {
namespace {

template <typename T>
void gemm_ref(const GemmArgs& g, const T* a, const T* b, T* c) {
  if (!g.accumulate) {
    for (std::size_t i = 0; i < g.m; ++i)
      for (std::size_t j = 0; j < g.n; ++j) c[i * g.ldc + j] = T{0};
  }
  // i-p-j order keeps the inner loop contiguous in B and C for the common
  // non-transposed B.
  for (std::size_t i = 0; i < g.m; ++i) {
    T* crow = c + i * g.ldc;
    for (std::size_t p = 0; p < g.k; ++p) {
      const T av = g.trans_a ? a[p * g.lda + i] : a[i * g.lda + p];
      if (av == T{0}) continue;
      if (g.trans_b) {
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += av * b[j * g.ldb + p];
      } else {
        const T* brow = b + p * g.ldb;
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
void axpy_ref(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void mul_ref(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void leaky_ref(std::size_t n, T slope, const T* in, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] >= T{0} ? in[i] : slope * in[i];
}

template <typename T>
void leaky_back_ref(std::size_t n, T slope, const T* in, const T* gout, T* gin) {
  for (std::size_t i = 0; i < n; ++i) gin[i] += in[i] >= T{0} ? gout[i] : slope * gout[i];
}

}  // namespace

namespace scalar {

void gemm(const GemmArgs& args, const float* a, const float* b, float* c) {
  gemm_ref(args, a, b, c);
}
void axpy(std::size_t n, float alpha, const float* x, float* y) { axpy_ref(n, alpha, x, y); }
void mul(std::size_t n, const float* a, const float* b, float* out) { mul_ref(n, a, b, out); }
void leaky_relu(std::size_t n, float slope, const float* in, float* out) {
  leaky_ref(n, slope, in, out);
}
void leaky_relu_backward(std::size_t n, float slope, const float* in, const float* gout,
                         float* gin) {
  leaky_back_ref(n, slope, in, gout, gin);
}
void momentum_step(std::size_t n, float lr, float mu, const float* g, float* v, float* p) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] - lr * g[i];
    p[i] += v[i];
  }
}

}  // namespace scalar

void gemm(const GemmArgs& args, const double* a, const double* b, double* c) {
  gemm_ref(args, a, b, c);
}
void axpy(std::size_t n, double alpha, const double* x, double* y) { axpy_ref(n, alpha, x, y); }
void mul(std::size_t n, const double* a, const double* b, double* out) {
  mul_ref(n, a, b, out);
}
void leaky_relu(std::size_t n, double slope, const double* in, double* out) {
  leaky_ref(n, slope, in, out);
}
void leaky_relu_backward(std::size_t n, double slope, const double* in, const double* gout,
                         double* gin) {
  leaky_back_ref(n, slope, in, gout, gin);
}

}  // namespace shadowae::kernels
