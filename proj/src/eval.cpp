#include "shadowae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace shadowae {
namespace {

void require_same(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": mask shapes differ (" +
                                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
  }
}

struct Counts {
  std::size_t inter = 0, pred = 0, truth = 0;
};

Counts count(const BinaryMask& pred, const BinaryMask& truth) {
  Counts c;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool p = pred.pixels[i] != 0, t = truth.pixels[i] != 0;
    c.inter += p && t;
    c.pred += p;
    c.truth += t;
  }
  return c;
}

std::pair<std::size_t, std::size_t> plane_dims(const Tensor<float>& t, const char* what) {
  const auto& s = t.shape();
  if (s.size() < 2) throw std::invalid_argument(std::string(what) + ": expected an image tensor");
  for (std::size_t i = 0; i + 2 < s.size(); ++i)
    if (s[i] != 1) throw std::invalid_argument(std::string(what) + ": expected a single image plane");
  return {s[s.size() - 1], s[s.size() - 2]};
}

}  // namespace

BinaryMask binarize(const Tensor<float>& shadow_pred, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("binarize: tau must lie in (0, 1)");
  const auto [w, h] = plane_dims(shadow_pred, "binarize");
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < shadow_pred.size(); ++i) m.pixels[i] = static_cast<double>(shadow_pred[i]) < tau;
  return m;
}

double iou(const BinaryMask& pred, const BinaryMask& truth) {
  require_same(pred, truth, "iou");
  const Counts c = count(pred, truth);
  const std::size_t uni = c.pred + c.truth - c.inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.inter) / static_cast<double>(uni);
}

double dice(const BinaryMask& pred, const BinaryMask& truth) {
  require_same(pred, truth, "dice");
  const Counts c = count(pred, truth);
  if (c.pred + c.truth == 0) return 1.0;
  return 2.0 * static_cast<double>(c.inter) / static_cast<double>(c.pred + c.truth);
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

EvalReport evaluate_masks(const std::vector<BinaryMask>& preds,
                          const std::vector<BinaryMask>& truths, double threshold,
                          std::string method) {
  if (preds.empty()) throw std::invalid_argument("evaluate: no images");
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(truths.size()) + " ground-truth masks");
  }
  EvalReport r;
  r.method = std::move(method);
  r.threshold = threshold;
  std::vector<double> ious, dices;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ImageScore s;
    s.iou = iou(preds[i], truths[i]);
    s.dice = dice(preds[i], truths[i]);
    s.degenerate = preds[i].empty_region() && truths[i].empty_region();
    r.degenerate_images += s.degenerate;
    ious.push_back(s.iou);
    dices.push_back(s.dice);
    r.per_image.push_back(s);
  }
  r.iou = mean_std(ious);
  r.dice = mean_std(dices);
  return r;
}

EvalReport evaluate(const std::vector<Tensor<float>>& preds, const std::vector<BinaryMask>& truths,
                    double tau) {
  std::vector<BinaryMask> bin;
  bin.reserve(preds.size());
  for (const auto& p : preds) bin.push_back(binarize(p, tau));
  return evaluate_masks(bin, truths, tau);
}

BinaryMask threshold_baseline(const Tensor<float>& image, double t, const FanGeometry& fan) {
  if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("threshold_baseline: t must lie in [0, 1)");
  const auto [w, h] = plane_dims(image, "threshold_baseline");
  BinaryMask m(w, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const bool dark = static_cast<double>(image[r * w + c]) < t;
      m.set(r, c, dark && fan.contains(static_cast<double>(r), static_cast<double>(c)));
    }
  return m;
}

std::vector<double> default_tau_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 9; ++i) g.push_back(i / 10.0);
  return g;
}

namespace {

template <typename MakeMask>
ThresholdChoice grid_search(std::size_t n, const std::vector<BinaryMask>& truths,
                            const std::vector<double>& grid, MakeMask make) {
  if (grid.empty()) throw std::invalid_argument("select_threshold: empty grid");
  if (n != truths.size() || n == 0) {
    throw std::invalid_argument("select_threshold: need one ground-truth mask per prediction");
  }
  ThresholdChoice best;
  bool first = true;
  for (double tau : grid) {
    std::vector<BinaryMask> masks;
    masks.reserve(n);
    for (std::size_t i = 0; i < n; ++i) masks.push_back(make(i, tau));
    const double m = evaluate_masks(masks, truths, tau).iou.mean;
    best.curve.emplace_back(tau, m);
    if (first || m > best.mean_iou || (m == best.mean_iou && tau < best.tau)) {
      best.tau = tau;
      best.mean_iou = m;
      first = false;
    }
  }
  return best;
}

}  // namespace

ThresholdChoice select_threshold(const std::vector<Tensor<float>>& preds,
                                 const std::vector<BinaryMask>& truths,
                                 const std::vector<double>& grid) {
  return grid_search(preds.size(), truths, grid,
                     [&](std::size_t i, double tau) { return binarize(preds[i], tau); });
}

ThresholdChoice select_baseline_threshold(const std::vector<Tensor<float>>& images,
                                          const std::vector<BinaryMask>& truths,
                                          const FanGeometry& fan, const std::vector<double>& grid) {
  return grid_search(images.size(), truths, grid, [&](std::size_t i, double t) {
    return threshold_baseline(images[i], t, fan);
  });
}

std::size_t cavity_false_positives(const BinaryMask& pred, const BinaryMask& truth,
                                   const BinaryMask& cavity) {
  require_same(pred, truth, "cavity_false_positives");
  require_same(pred, cavity, "cavity_false_positives");
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i)
    n += pred.pixels[i] && cavity.pixels[i] && !truth.pixels[i];
  return n;
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.per_image) per.push_back({{"iou", s.iou}, {"dice", s.dice}, {"degenerate", s.degenerate}});
  return {{"method", r.method},
          {"threshold", r.threshold},
          {"images", r.per_image.size()},
          {"iou", {{"mean", r.iou.mean}, {"std", r.iou.std}}},
          {"dice", {{"mean", r.dice.mean}, {"std", r.dice.std}}},
          {"degenerate_images", r.degenerate_images},
          {"per_image", per}};
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "method,threshold,iou_mean,iou_std,dice_mean,dice_std\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.6f,%.6f,%.6f,%.6f\n", r.method.c_str(), r.threshold,
                  r.iou.mean, r.iou.std, r.dice.mean, r.dice.std);
    out << buf;
  }
  return out.str();
}

imageio::RgbImage make_overlay(const Tensor<float>& image, const BinaryMask& pred,
                               const BinaryMask* truth, const BinaryMask* cavity) {
  const auto [w, h] = plane_dims(image, "make_overlay");
  if (pred.width != w || pred.height != h || (truth && !truth->same_shape(pred)) ||
      (cavity && !cavity->same_shape(pred))) {
    throw std::invalid_argument("make_overlay: mask and image sizes differ");
  }
  imageio::RgbImage o{w, h, std::vector<std::uint8_t>(3 * w * h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    const double clamped = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    const auto v = static_cast<std::uint8_t>(std::lround(255.0 * clamped));
    const auto dim = static_cast<std::uint8_t>(v / 2);
    const bool p = pred.pixels[i] != 0;
    const bool t = truth && truth->pixels[i] != 0;
    const bool cav = cavity && cavity->pixels[i] != 0;
    std::uint8_t* px = &o.pixels[3 * i];
    if (p && t) {
      px[0] = 255, px[1] = 255, px[2] = dim;
    } else if (p && cav) {
      px[0] = 255, px[1] = 0, px[2] = 255;
    } else if (p) {
      px[0] = 255, px[1] = dim, px[2] = dim;
    } else if (t) {
      px[0] = dim, px[1] = 255, px[2] = dim;
    } else {
      px[0] = px[1] = px[2] = v;
    }
  }
  return o;
}

}  // namespace shadowae
