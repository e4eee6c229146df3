#pragma once

#include <array>
#include <vector>

#include "octdn/image.hpp"

namespace octdn {

// ---------------------------------------------------------------------------
// Total-variation minimization (ROF model, Chambolle's dual projection).
// Solves min_u TV(u) + ||u - f||^2 / (2*lambda) via
//   p <- (p + tau * grad(div p - f/lambda)) / (1 + tau * |grad(div p - f/lambda)|)
//   u  = f - lambda * div p
// Forward-difference gradient, backward-difference divergence, Neumann
// boundaries. The dual step requires tau <= 0.25 for convergence.
// ---------------------------------------------------------------------------

struct TvParams {
  double lambda = 0.12;  // fidelity weight; larger smooths more
  int max_iter = 200;
  double tol = 1e-5;  // stop when the sup-norm change of u drops below this
  double tau = 0.248;
};

struct TvResult {
  Image image;
  int iterations = 0;
  double max_dual_norm = 0.0;  // max |p| seen over all iterates (must stay <= 1)
  double final_change = 0.0;   // last sup-norm change of u
};

Image tv_denoise(const Image& img, const TvParams& params = {});
TvResult tv_denoise_ex(const Image& img, const TvParams& params = {});

// ---------------------------------------------------------------------------
// Orthonormal separable 2-D wavelet transform + BayesShrink soft thresholding.
// Images are symmetric-padded up front to a multiple of 2^levels, then each
// level applies the periodized orthonormal filter pair, so the transform is
// exactly energy preserving and idwt2(dwt2(x)) == x on the padded domain.
// ---------------------------------------------------------------------------

enum class WaveletBasis { Haar, Daubechies4 };

struct WaveletParams {
  int levels = 3;
  WaveletBasis basis = WaveletBasis::Haar;
};

struct WaveletPyramid {
  struct Band {
    int h = 0, w = 0;
    std::vector<double> c;
  };
  int levels = 0;
  WaveletBasis basis = WaveletBasis::Haar;
  int orig_h = 0, orig_w = 0;
  int padded_h = 0, padded_w = 0;
  // details[l] holds {LH, HL, HH} for level l+1 (finest first).
  // LH = horizontal detail, HL = vertical detail, HH = diagonal detail.
  std::vector<std::array<Band, 3>> details;
  Band approx;  // coarsest approximation band
};

WaveletPyramid dwt2(const Image& img, int levels, WaveletBasis basis);
Image idwt2(const WaveletPyramid& pyr);

// sign(c) * max(|c| - t, 0)
std::vector<double> soft_threshold(std::vector<double> coeffs, double t);

// BayesShrink subband threshold T = sigma_noise^2 / sigma_x with
// sigma_x = sqrt(max(second_moment(subband) - sigma_noise^2, 0)); a vanishing
// sigma_x returns max|c| so the whole subband is killed.
double bayes_threshold(const std::vector<double>& subband, double sigma_noise);

// Noise scale estimate: median(|finest diagonal subband|) / 0.6745.
double estimate_noise_sigma(const WaveletPyramid& pyr);

// dwt2 -> per-detail-subband BayesShrink soft threshold (approximation band
// untouched) -> idwt2 -> clip to [0,1].
Image wavelet_denoise(const Image& img, const WaveletParams& params = {});

// ---------------------------------------------------------------------------
// Perona-Malik anisotropic diffusion, explicit 4-neighbor scheme with
// Neumann boundaries:  I += step * sum_d g(|grad_d I|) * grad_d I.
// step <= 0.25 keeps the explicit update stable (maximum principle).
// ---------------------------------------------------------------------------

enum class Conductance { Exponential, Rational };

struct DiffusionParams {
  int iterations = 20;
  double kappa = 0.15;  // edge threshold
  double step = 0.25;
  Conductance conductance = Conductance::Exponential;
};

// g(d) for gradient magnitude d: exp(-(d/kappa)^2) or 1/(1+(d/kappa)^2).
double conductance_value(Conductance g, double grad_mag, double kappa);

Image anisotropic_diffusion(const Image& img, const DiffusionParams& params = {});

}  // namespace octdn
