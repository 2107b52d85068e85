#pragma once

// Differentiable operators over Graph<T>. Instantiated for float (training
// and inference) and double (gradient checking).

#include <span>

#include "shadowae/graph.hpp"

namespace shadowae {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Output extent of a cross-correlation along one axis. Throws when the
/// window does not tile the padded input exactly.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, ConvGeometry g);

/// Output extent of a transposed convolution along one axis.
std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, ConvGeometry g);

/// Cross-correlation. input [N,C,H,W], weight [K,C,kh,kw], bias [K].
template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, ConvGeometry geom);

/// Transposed convolution, the adjoint of conv2d with respect to its input.
/// input [N,C,H,W], weight [C,K,kh,kw], bias [K].
template <typename T>
Var deconv2d(Graph<T>& g, Var input, Var weight, Var bias, ConvGeometry geom);

template <typename T>
Var sigmoid(Graph<T>& g, Var input);

template <typename T>
Var hadamard(Graph<T>& g, Var a, Var b);

template <typename T>
Var leaky_relu(Graph<T>& g, Var input, T slope);

/// Sum of all elements, accumulated in double.
template <typename T>
Var sum(Graph<T>& g, Var input);

/// sum_i weights[i] * terms[i] over scalar terms.
template <typename T>
Var weighted_sum(Graph<T>& g, std::span<const Var> terms, std::span<const double> weights);

/// Numerically stable logistic function, clamped to the open interval (0, 1).
template <typename T>
T stable_sigmoid(T v);

// Forward-only building blocks shared with tests.
namespace detail {

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, ConvGeometry geom, std::size_t out_h,
            std::size_t out_w, T* columns);

/// Scatter-add columns back onto an image (adjoint of im2col).
template <typename T>
void col2im(const T* columns, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, ConvGeometry geom, std::size_t out_h,
            std::size_t out_w, T* image);

}  // namespace detail

}  // namespace shadowae
