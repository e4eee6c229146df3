#pragma once

#include <string>
#include <vector>

#include "octdn/image.hpp"

namespace octdn {

// 10*log10(MAX^2 / MSE) with MAX = 1.0 on [0,1] images; inputs are clamped to
// [0,1] first. A zero MSE returns +infinity, the documented sentinel; report
// aggregation excludes it from means with a warning.
double psnr(const Image& reference, const Image& test);

// 100 * matches / n.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

// Row-major K x K counts, row = true class, column = predicted.
std::vector<int> confusion_matrix(const std::vector<int>& predicted,
                                  const std::vector<int>& truth, int k);

struct MetricReport {
  std::string method;
  double psnr_mean = 0.0;  // dB, over finite per-image values
  double psnr_std = 0.0;   // population std, dB
  double accuracy = 0.0;   // percent
  double mean_ms_per_image = 0.0;
  int n_images = 0;
};

}  // namespace octdn
