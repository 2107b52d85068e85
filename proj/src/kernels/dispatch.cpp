#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "shadowae/kernels.hpp"

namespace shadowae::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SHADOWAE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend automatic_backend() {
  if (const char* env = std::getenv("SHADOWAE_KERNELS"); env && std::string(env) == "scalar") {
    return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{automatic_backend()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

bool avx2_available() {
  static const bool available = cpu_has_avx2();
  return available;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_available()) {
    throw std::runtime_error("kernels: AVX2 backend requested but not available on this CPU/build");
  }
  current().store(b, std::memory_order_relaxed);
}

void reset_backend() { current().store(automatic_backend(), std::memory_order_relaxed); }

#if defined(SHADOWAE_HAVE_AVX2)
#define SHADOWAE_DISPATCH(fn, ...)                           \
  do {                                                       \
    if (active_backend() == Backend::Avx2) return avx2::fn(__VA_ARGS__); \
    return scalar::fn(__VA_ARGS__);                          \
  } while (0)
#else
#define SHADOWAE_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void gemm(const GemmArgs& args, const float* a, const float* b, float* c) {
  SHADOWAE_DISPATCH(gemm, args, a, b, c);
}
void axpy(std::size_t n, float alpha, const float* x, float* y) {
  SHADOWAE_DISPATCH(axpy, n, alpha, x, y);
}
void mul(std::size_t n, const float* a, const float* b, float* out) {
  SHADOWAE_DISPATCH(mul, n, a, b, out);
}
void leaky_relu(std::size_t n, float slope, const float* in, float* out) {
  SHADOWAE_DISPATCH(leaky_relu, n, slope, in, out);
}
void leaky_relu_backward(std::size_t n, float slope, const float* in, const float* gout,
                         float* gin) {
  SHADOWAE_DISPATCH(leaky_relu_backward, n, slope, in, gout, gin);
}
void momentum_step(std::size_t n, float lr, float mu, const float* g, float* v, float* p) {
  SHADOWAE_DISPATCH(momentum_step, n, lr, mu, g, v, p);
}

}  // namespace shadowae::kernels
