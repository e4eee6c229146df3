#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace octdn {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grayscale image, row-major, values in [0,1]. Every producer in this module
// (load, corrupt, resize) clips back into [0,1] before returning.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0);

  double at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
  double& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return pixels.size(); }
};

// Reads an 8-bit grayscale PNG or binary PGM (P5); pixel v maps to v/255.
// RGB(A) PNG inputs are converted by channel mean. 16-bit inputs are rejected.
Image load_image(const std::string& path);

// Writes 8-bit grayscale; pixels quantized by round(v*255). The PNG encoder is
// deterministic: identical pixels always produce identical bytes.
void save_png(const Image& img, const std::string& path);
void save_pgm(const Image& img, const std::string& path);

// Dispatches on extension (.png or .pgm).
void save_image(const Image& img, const std::string& path);

// Additive i.i.d. Gaussian noise, standard deviation sigma per pixel, then
// clipping to [0,1]. Deterministic per seed. The conventional working point
// is sigma = 0.1 on [0,1]-normalized pixels (noise variance 0.01), which puts
// the corrupted image near 20 dB PSNR before clipping.
Image corrupt(const Image& img, double sigma, uint64_t seed);

// Bilinear resample to size x size. Half-pixel center convention with edge
// clamping: src = (dst + 0.5) * (in/out) - 0.5.
Image resize_to(const Image& img, int size);

double clip01(double v);

}  // namespace octdn
