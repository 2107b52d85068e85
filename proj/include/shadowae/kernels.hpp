#pragma once

// Data-parallel inner loops used by the differentiable core.
//
// Every kernel has a portable scalar reference implementation. Float kernels
// additionally have an AVX2+FMA variant, chosen at runtime from the CPU
// feature bits. Double kernels always take the scalar path.

#include <cstddef>
#include <string_view>

namespace shadowae::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b);

/// Whether this binary was built with the AVX2 variants and the CPU supports them.
bool avx2_available();

/// Backend currently used for float kernels.
Backend active_backend();

/// Force a backend. Requesting Avx2 on an unsupported CPU throws.
void set_backend(Backend b);

/// Restores the automatic choice (AVX2 when available, unless the
/// SHADOWAE_KERNELS environment variable is set to "scalar").
void reset_backend();

/// C[m x n] (+)= op(A) * op(B), row-major with explicit leading dimensions.
/// op(A) is m x k; op(B) is k x n. When accumulate is false C is overwritten.
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0, n = 0, k = 0;
  std::size_t lda = 0, ldb = 0, ldc = 0;
  bool accumulate = false;
};

void gemm(const GemmArgs& args, const float* a, const float* b, float* c);
void gemm(const GemmArgs& args, const double* a, const double* b, double* c);

// y += alpha * x
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);

// out = a * b
void mul(std::size_t n, const float* a, const float* b, float* out);
void mul(std::size_t n, const double* a, const double* b, double* out);

// out = v >= 0 ? v : slope * v
void leaky_relu(std::size_t n, float slope, const float* in, float* out);
void leaky_relu(std::size_t n, double slope, const double* in, double* out);

// gin += gout * (v >= 0 ? 1 : slope), using the forward input v
void leaky_relu_backward(std::size_t n, float slope, const float* in, const float* gout,
                         float* gin);
void leaky_relu_backward(std::size_t n, double slope, const double* in, const double* gout,
                         double* gin);

/// Momentum update: v = mu * v - lr * g; p += v.
void momentum_step(std::size_t n, float lr, float mu, const float* g, float* v, float* p);

namespace scalar {
void gemm(const GemmArgs& args, const float* a, const float* b, float* c);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void mul(std::size_t n, const float* a, const float* b, float* out);
void leaky_relu(std::size_t n, float slope, const float* in, float* out);
void leaky_relu_backward(std::size_t n, float slope, const float* in, const float* gout,
                         float* gin);
void momentum_step(std::size_t n, float lr, float mu, const float* g, float* v, float* p);
}  // namespace scalar

#if defined(SHADOWAE_HAVE_AVX2)
namespace avx2 {
void gemm(const GemmArgs& args, const float* a, const float* b, float* c);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void mul(std::size_t n, const float* a, const float* b, float* out);
void leaky_relu(std::size_t n, float slope, const float* in, float* out);
void leaky_relu_backward(std::size_t n, float slope, const float* in, const float* gout,
                         float* gin);
void momentum_step(std::size_t n, float lr, float mu, const float* g, float* v, float* p);
}  // namespace avx2
#endif

}  // namespace shadowae::kernels
