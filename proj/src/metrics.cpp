#include "octdn/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace octdn {

double psnr(const Image& reference, const Image& test) {
  if (reference.height != test.height || reference.width != test.width)
    throw std::invalid_argument("psnr: image dimensions differ");
  if (reference.size() == 0) throw std::invalid_argument("psnr: empty image");
  double acc = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double d = clip01(reference.pixels[i]) - clip01(test.pixels[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("accuracy: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
  size_t hits = 0;
  for (size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<int> confusion_matrix(const std::vector<int>& predicted,
                                  const std::vector<int>& truth, int k) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("confusion_matrix: length mismatch");
  if (k <= 0) throw std::invalid_argument("confusion_matrix: k must be positive");
  std::vector<int> m(static_cast<size_t>(k) * k, 0);
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k)
      throw std::invalid_argument("confusion_matrix: label out of range");
    m[static_cast<size_t>(truth[i]) * k + predicted[i]] += 1;
  }
  return m;
}

}  // namespace octdn
