#pragma once

// Training objective:
//
//   total = lambda_ae * l_ae(x~, recon) + lambda_s * l_s(x_s, shadow)
//         + lambda_sreg * l_sreg(shadow) + lambda_c * l_c(content)
//
// l_ae, l_s and l_sreg are per-pixel means; l_c is a per-pixel sum of the
// beta negative log-likelihood. All four are averaged over the batch.

#include <nlohmann/json.hpp>

#include "shadowae/graph.hpp"
#include "shadowae/shadow_synth.hpp"

namespace shadowae {

struct LossWeights {
  double lambda_ae = 1.0;
  double lambda_s = 10.0;
  double lambda_sreg = 1.0;
  double lambda_c = 1e-4;
  double alpha = 2.0;
  double beta = 2.0;
  double eps = 1e-6;

  void validate() const;
};

struct LossBreakdown {
  double l_ae = 0.0;
  double l_s = 0.0;
  double l_sreg = 0.0;
  double l_c = 0.0;
  double total = 0.0;

  bool finite() const;
};

/// Mean squared error between the injected input and the reconstruction.
template <typename T>
Var loss_ae(Graph<T>& g, Var x_tilde, Var recon);

/// Squared error restricted to the synthetic-shadow region (x_s < 1),
/// normalised by the full pixel count.
template <typename T>
Var loss_shadow(Graph<T>& g, Var x_s, Var shadow_pred);

/// Mean of |1 - shadow|.
template <typename T>
Var loss_sreg(Graph<T>& g, Var shadow_pred);

/// -sum ln Beta(c | alpha, beta) with c clamped to [eps, 1 - eps].
template <typename T>
Var loss_content(Graph<T>& g, Var content_pred, double alpha, double beta, double eps);

/// ln B(alpha, beta) via log-gamma.
double log_beta_function(double alpha, double beta);

struct LossVars {
  Var l_ae, l_s, l_sreg, l_c, total;
};

/// Records all four terms and their weighted sum.
template <typename T>
LossVars loss_total(Graph<T>& g, Var x_tilde, Var x_s, Var shadow, Var content, Var recon,
                    const LossWeights& w);

/// Reads the recorded terms back; total is recomputed in double from them.
template <typename T>
LossBreakdown breakdown(const Graph<T>& g, const LossVars& v, const LossWeights& w);

/// Weighted sum of already-computed components (fills in total).
LossBreakdown combine(LossBreakdown parts, const LossWeights& w);

// Convenience forms on plain single-image tensors.
double loss_ae(const Tensor<float>& x_tilde, const Tensor<float>& recon);
double loss_shadow(const ShadowMask& x_s, const Tensor<float>& shadow_pred);
double loss_sreg(const Tensor<float>& shadow_pred);
double loss_content(const Tensor<float>& content_pred, double alpha, double beta, double eps = 1e-6);

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

}  // namespace shadowae
