#pragma once

// Shadow segmentation scoring: binarisation of predicted shadow maps,
// per-image IoU / DICE, mean and standard deviation across images, and the
// intensity-thresholding baseline.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowae/binary_mask.hpp"
#include "shadowae/imageio.hpp"
#include "shadowae/shadow_synth.hpp"
#include "shadowae/tensor.hpp"

namespace shadowae {

/// Pixel is shadow iff the predicted attenuation is below tau, tau in (0, 1).
BinaryMask binarize(const Tensor<float>& shadow_pred, double tau);

/// |pred & truth| / |pred | truth|; 1 when both are empty.
double iou(const BinaryMask& pred, const BinaryMask& truth);

/// 2 |pred & truth| / (|pred| + |truth|); 1 when both are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

struct ImageScore {
  double iou = 0.0;
  double dice = 0.0;
  bool degenerate = false;  // both masks empty
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across images
};

struct EvalReport {
  std::string method;
  double threshold = 0.0;
  std::vector<ImageScore> per_image;
  MeanStd iou;
  MeanStd dice;
  std::size_t degenerate_images = 0;
};

MeanStd mean_std(const std::vector<double>& values);

/// Scores already-binarised predictions.
EvalReport evaluate_masks(const std::vector<BinaryMask>& preds,
                          const std::vector<BinaryMask>& truths, double threshold,
                          std::string method = "proposed");

/// Binarises each prediction at tau and scores it.
EvalReport evaluate(const std::vector<Tensor<float>>& preds, const std::vector<BinaryMask>& truths,
                    double tau);

/// Dark pixels inside the fan: intensity < t, t in (0, 1); t = 0 gives an
/// empty mask.
BinaryMask threshold_baseline(const Tensor<float>& image, double t, const FanGeometry& fan);

/// Default grid {0.1, 0.2, ..., 0.9}.
std::vector<double> default_tau_grid();

struct ThresholdChoice {
  double tau = 0.0;
  double mean_iou = 0.0;
  std::vector<std::pair<double, double>> curve;  // (tau, mean IoU) for every grid point
};

/// Exhaustive search for the tau with the highest mean IoU; ties go to the
/// smaller tau.
ThresholdChoice select_threshold(const std::vector<Tensor<float>>& preds,
                                 const std::vector<BinaryMask>& truths,
                                 const std::vector<double>& grid);

/// Same search for the intensity-thresholding baseline.
ThresholdChoice select_baseline_threshold(const std::vector<Tensor<float>>& images,
                                          const std::vector<BinaryMask>& truths,
                                          const FanGeometry& fan, const std::vector<double>& grid);

/// Dark non-shadow pixels wrongly flagged: |pred & cavity & !truth|.
std::size_t cavity_false_positives(const BinaryMask& pred, const BinaryMask& truth,
                                   const BinaryMask& cavity);

// Report serialisation --------------------------------------------------------

nlohmann::json report_json(const EvalReport& r);

/// Table layout: header plus one row per method (method, IoU mean±std,
/// DICE mean±std).
std::string report_csv(const std::vector<EvalReport>& reports);

/// Input in gray with prediction in red. Truth, when given, is green and
/// overlap yellow; predicted shadow on cavity pixels outside the truth is
/// magenta when a cavity mask is given.
imageio::RgbImage make_overlay(const Tensor<float>& image, const BinaryMask& pred,
                               const BinaryMask* truth = nullptr,
                               const BinaryMask* cavity = nullptr);

}  // namespace shadowae
