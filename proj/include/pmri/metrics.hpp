#pragma once

#include <string>
#include <vector>

#include "pmri/tensor.hpp"

namespace pmri {

/// Signal-to-noise ratio in dB: 20*log10(|org| / |org - rec|) over the
/// real parts of the two images. Identical inputs return +infinity.
double snr_db(const ComplexImage& rec, const ComplexImage& org);

/// Mean local structural similarity with an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03 and dynamic range max(org).
/// Windows slide fully inside the image; images smaller than the window
/// use a single truncated window.
double ssim(const ComplexImage& rec, const ComplexImage& org);

/// Dice overlap for one class: 2|A and B| / (|A| + |B|); defined as 1
/// when both sets are empty.
double dice(const LabelMap& pred, const LabelMap& ref, int cls);

/// Per-dataset evaluation row.
struct EvalRow {
  std::string dataset_id;
  std::string method;
  double snr = 0.0;
  double ssim_v = 0.0;
  bool has_dice = false;
  double dice_csf = 0.0, dice_gm = 0.0, dice_wm = 0.0;
};

/// Evaluation report: rows plus aggregation and the CSV form
/// (columns dataset_id, method, snr_db, ssim, dice_csf, dice_gm,
/// dice_wm; infinite SNR prints as "inf", missing Dice prints empty).
struct EvalReport {
  std::vector<EvalRow> rows;

  std::string to_csv() const;
  static EvalReport from_csv(const std::string& text);

  struct MethodMean {
    std::string method;
    double snr = 0.0;
    double ssim_v = 0.0;
    double dice_mean = 0.0;
    bool has_dice = false;
    int count = 0;
  };
  /// Per-method means, sorted by mean SNR descending.
  std::vector<MethodMean> method_means() const;
};

}  // namespace pmri
