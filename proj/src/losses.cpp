#include "shadowae/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "shadowae/json_util.hpp"
#include "shadowae/ops.hpp"

namespace shadowae {

void LossWeights::validate() const {
  if (!(lambda_ae >= 0 && lambda_s >= 0 && lambda_sreg >= 0 && lambda_c >= 0)) {
    throw ConfigError("loss weights: every lambda must be >= 0");
  }
  if (!(alpha > 0 && beta > 0)) throw ConfigError("loss weights: alpha and beta must be > 0");
  if (!(eps > 0 && eps < 0.5)) throw ConfigError("loss weights: eps must lie in (0, 0.5)");
}

bool LossBreakdown::finite() const {
  return std::isfinite(l_ae) && std::isfinite(l_s) && std::isfinite(l_sreg) &&
         std::isfinite(l_c) && std::isfinite(total);
}

double log_beta_function(double alpha, double beta) {
  return std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
}

namespace {

std::size_t batch_of(const Shape& s) { return s.size() == 4 ? s[0] : 1; }

}  // namespace

template <typename T>
Var loss_ae(Graph<T>& g, Var x_tilde, Var recon) {
  const auto& x = g.value(x_tilde);
  const auto& r = g.value(recon);
  require_same_shape(x.shape(), r.shape(), "loss_ae");
  const double scale = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(r[i]) - static_cast<double>(x[i]);
    acc += d * d;
  }
  return g.record(Tensor<T>::scalar(static_cast<T>(acc * scale)), {x_tilde, recon},
                  [=](Graph<T>& gr, std::size_t self) {
                    const double go = static_cast<double>(gr.out_grad(self)[0]) * 2.0 * scale;
                    const auto& xv = gr.value(x_tilde);
                    const auto& rv = gr.value(recon);
                    std::span<T> gx, grc;
                    if (gr.requires_grad(x_tilde)) gx = gr.grad_buffer(x_tilde);
                    if (gr.requires_grad(recon)) grc = gr.grad_buffer(recon);
                    for (std::size_t i = 0; i < xv.size(); ++i) {
                      const double d = static_cast<double>(rv[i]) - static_cast<double>(xv[i]);
                      if (!grc.empty()) grc[i] += static_cast<T>(go * d);
                      if (!gx.empty()) gx[i] -= static_cast<T>(go * d);
                    }
                  });
}

template <typename T>
Var loss_shadow(Graph<T>& g, Var x_s, Var shadow_pred) {
  const auto& m = g.value(x_s);
  const auto& p = g.value(shadow_pred);
  require_same_shape(m.shape(), p.shape(), "loss_shadow");
  const double scale = 1.0 / static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(m[i] < T{1})) continue;
    const double d = static_cast<double>(p[i]) - static_cast<double>(m[i]);
    acc += d * d;
  }
  return g.record(Tensor<T>::scalar(static_cast<T>(acc * scale)), {x_s, shadow_pred},
                  [=](Graph<T>& gr, std::size_t self) {
                    if (!gr.requires_grad(shadow_pred)) return;
                    const double go = static_cast<double>(gr.out_grad(self)[0]) * 2.0 * scale;
                    const auto& mv = gr.value(x_s);
                    const auto& pv = gr.value(shadow_pred);
                    auto gp = gr.grad_buffer(shadow_pred);
                    for (std::size_t i = 0; i < pv.size(); ++i) {
                      if (!(mv[i] < T{1})) continue;
                      gp[i] += static_cast<T>(go * (static_cast<double>(pv[i]) - static_cast<double>(mv[i])));
                    }
                  });
}

template <typename T>
Var loss_sreg(Graph<T>& g, Var shadow_pred) {
  const auto& p = g.value(shadow_pred);
  const double scale = 1.0 / static_cast<double>(p.size());
  double acc = 0.0;
  for (T v : p.storage()) acc += std::abs(1.0 - static_cast<double>(v));
  return g.record(Tensor<T>::scalar(static_cast<T>(acc * scale)), {shadow_pred},
                  [=](Graph<T>& gr, std::size_t self) {
                    const double go = static_cast<double>(gr.out_grad(self)[0]) * scale;
                    const auto& pv = gr.value(shadow_pred);
                    auto gp = gr.grad_buffer(shadow_pred);
                    for (std::size_t i = 0; i < pv.size(); ++i) {
                      // d|1 - v|/dv = -sign(1 - v)
                      if (pv[i] < T{1}) gp[i] -= static_cast<T>(go);
                      else if (pv[i] > T{1}) gp[i] += static_cast<T>(go);
                    }
                  });
}

template <typename T>
Var loss_content(Graph<T>& g, Var content_pred, double alpha, double beta, double eps) {
  if (!(alpha > 0 && beta > 0)) throw std::invalid_argument("loss_content: alpha and beta must be > 0");
  if (!(eps > 0 && eps < 0.5)) throw std::invalid_argument("loss_content: eps must lie in (0, 0.5)");
  const auto& c = g.value(content_pred);
  const double inv_batch = 1.0 / static_cast<double>(batch_of(c.shape()));
  const double log_b = log_beta_function(alpha, beta);
  double acc = 0.0;
  for (T v : c.storage()) {
    const double x = std::clamp(static_cast<double>(v), eps, 1.0 - eps);
    acc -= (alpha - 1.0) * std::log(x) + (beta - 1.0) * std::log1p(-x) - log_b;
  }
  return g.record(Tensor<T>::scalar(static_cast<T>(acc * inv_batch)), {content_pred},
                  [=](Graph<T>& gr, std::size_t self) {
                    const double go = static_cast<double>(gr.out_grad(self)[0]) * inv_batch;
                    const auto& cv = gr.value(content_pred);
                    auto gc = gr.grad_buffer(content_pred);
                    for (std::size_t i = 0; i < cv.size(); ++i) {
                      const double x = static_cast<double>(cv[i]);
                      if (x < eps || x > 1.0 - eps) continue;  // clamped: flat
                      gc[i] += static_cast<T>(go * (-(alpha - 1.0) / x + (beta - 1.0) / (1.0 - x)));
                    }
                  });
}

template <typename T>
LossVars loss_total(Graph<T>& g, Var x_tilde, Var x_s, Var shadow, Var content, Var recon,
                    const LossWeights& w) {
  w.validate();
  LossVars v;
  v.l_ae = loss_ae(g, x_tilde, recon);
  v.l_s = loss_shadow(g, x_s, shadow);
  v.l_sreg = loss_sreg(g, shadow);
  v.l_c = loss_content(g, content, w.alpha, w.beta, w.eps);
  const std::array<Var, 4> terms{v.l_ae, v.l_s, v.l_sreg, v.l_c};
  const std::array<double, 4> weights{w.lambda_ae, w.lambda_s, w.lambda_sreg, w.lambda_c};
  v.total = weighted_sum(g, std::span<const Var>(terms), std::span<const double>(weights));
  return v;
}

template <typename T>
LossBreakdown breakdown(const Graph<T>& g, const LossVars& v, const LossWeights& w) {
  LossBreakdown b;
  b.l_ae = static_cast<double>(g.value(v.l_ae)[0]);
  b.l_s = static_cast<double>(g.value(v.l_s)[0]);
  b.l_sreg = static_cast<double>(g.value(v.l_sreg)[0]);
  b.l_c = static_cast<double>(g.value(v.l_c)[0]);
  return combine(b, w);
}

LossBreakdown combine(LossBreakdown parts, const LossWeights& w) {
  parts.total = w.lambda_ae * parts.l_ae + w.lambda_s * parts.l_s + w.lambda_sreg * parts.l_sreg +
                w.lambda_c * parts.l_c;
  return parts;
}

#define SHADOWAE_LOSSES(T)                                                                   \
  template Var loss_ae<T>(Graph<T>&, Var, Var);                                              \
  template Var loss_shadow<T>(Graph<T>&, Var, Var);                                          \
  template Var loss_sreg<T>(Graph<T>&, Var);                                                 \
  template Var loss_content<T>(Graph<T>&, Var, double, double, double);                      \
  template LossVars loss_total<T>(Graph<T>&, Var, Var, Var, Var, Var, const LossWeights&);   \
  template LossBreakdown breakdown<T>(const Graph<T>&, const LossVars&, const LossWeights&);

SHADOWAE_LOSSES(float)
SHADOWAE_LOSSES(double)

double loss_ae(const Tensor<float>& x_tilde, const Tensor<float>& recon) {
  Graph<float> g;
  return g.value(loss_ae(g, g.input(x_tilde), g.input(recon)))[0];
}

double loss_shadow(const ShadowMask& x_s, const Tensor<float>& shadow_pred) {
  Graph<float> g;
  Tensor<float> m = x_s.to_tensor();
  m.reshape(shadow_pred.shape());
  return g.value(loss_shadow(g, g.input(std::move(m)), g.input(shadow_pred)))[0];
}

double loss_sreg(const Tensor<float>& shadow_pred) {
  Graph<float> g;
  return g.value(loss_sreg(g, g.input(shadow_pred)))[0];
}

double loss_content(const Tensor<float>& content_pred, double alpha, double beta, double eps) {
  Graph<float> g;
  return g.value(loss_content(g, g.input(content_pred), alpha, beta, eps))[0];
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_ae", w.lambda_ae}, {"lambda_s", w.lambda_s}, {"lambda_sreg", w.lambda_sreg},
       {"lambda_c", w.lambda_c},   {"alpha", w.alpha},       {"beta", w.beta},
       {"eps", w.eps}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  check_keys(j, {"lambda_ae", "lambda_s", "lambda_sreg", "lambda_c", "alpha", "beta", "eps"},
             "loss weights");
  read_opt(j, "lambda_ae", w.lambda_ae);
  read_opt(j, "lambda_s", w.lambda_s);
  read_opt(j, "lambda_sreg", w.lambda_sreg);
  read_opt(j, "lambda_c", w.lambda_c);
  read_opt(j, "alpha", w.alpha);
  read_opt(j, "beta", w.beta);
  read_opt(j, "eps", w.eps);
}

}  // namespace shadowae
