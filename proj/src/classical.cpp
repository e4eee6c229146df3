#include "octdn/classical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace octdn {

// ---------------------------------------------------------------------------
// TV
// ---------------------------------------------------------------------------

namespace {

void validate(const TvParams& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("tv: lambda must be positive");
  if (p.max_iter < 1) throw std::invalid_argument("tv: max_iter must be positive");
  if (!(p.tol > 0.0)) throw std::invalid_argument("tv: tol must be positive");
  if (!(p.tau > 0.0) || p.tau > 0.25)
    throw std::invalid_argument("tv: tau must lie in (0, 0.25]");
}

}  // namespace

TvResult tv_denoise_ex(const Image& img, const TvParams& params) {
  validate(params);
  const int h = img.height, w = img.width;
  const size_t n = img.size();
  const double lam = params.lambda;

  std::vector<double> p1(n, 0.0), p2(n, 0.0);  // dual field
  std::vector<double> div_p(n, 0.0), g(n, 0.0), u(img.pixels), u_prev;

  TvResult res;
  auto idx = [w](int y, int x) { return static_cast<size_t>(y) * w + x; };

  for (int it = 0; it < params.max_iter; ++it) {
    // g = div p - f / lambda
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double d = 0.0;
        if (x == 0) {
          d += p1[idx(y, x)];
        } else if (x == w - 1) {
          d += -p1[idx(y, x - 1)];
        } else {
          d += p1[idx(y, x)] - p1[idx(y, x - 1)];
        }
        if (y == 0) {
          d += p2[idx(y, x)];
        } else if (y == h - 1) {
          d += -p2[idx(y - 1, x)];
        } else {
          d += p2[idx(y, x)] - p2[idx(y - 1, x)];
        }
        div_p[idx(y, x)] = d;
        g[idx(y, x)] = d - img.pixels[idx(y, x)] / lam;
      }
    }

    // p <- (p + tau * grad g) / (1 + tau * |grad g|), forward differences
    double max_norm2 = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gx = (x < w - 1) ? g[idx(y, x + 1)] - g[idx(y, x)] : 0.0;
        const double gy = (y < h - 1) ? g[idx(y + 1, x)] - g[idx(y, x)] : 0.0;
        const double denom = 1.0 + params.tau * std::sqrt(gx * gx + gy * gy);
        const double np1 = (p1[idx(y, x)] + params.tau * gx) / denom;
        const double np2 = (p2[idx(y, x)] + params.tau * gy) / denom;
        p1[idx(y, x)] = np1;
        p2[idx(y, x)] = np2;
        max_norm2 = std::max(max_norm2, np1 * np1 + np2 * np2);
      }
    }
    res.max_dual_norm = std::max(res.max_dual_norm, std::sqrt(max_norm2));

    // u = f - lambda * div p (recompute div with the updated field)
    u_prev = u;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double d = 0.0;
        if (x == 0) {
          d += p1[idx(y, x)];
        } else if (x == w - 1) {
          d += -p1[idx(y, x - 1)];
        } else {
          d += p1[idx(y, x)] - p1[idx(y, x - 1)];
        }
        if (y == 0) {
          d += p2[idx(y, x)];
        } else if (y == h - 1) {
          d += -p2[idx(y - 1, x)];
        } else {
          d += p2[idx(y, x)] - p2[idx(y - 1, x)];
        }
        u[idx(y, x)] = img.pixels[idx(y, x)] - lam * d;
      }
    }

    res.iterations = it + 1;
    double change = 0.0;
    for (size_t i = 0; i < n; ++i) change = std::max(change, std::abs(u[i] - u_prev[i]));
    res.final_change = change;
    if (change < params.tol) break;
  }

  res.image = Image(h, w);
  for (size_t i = 0; i < n; ++i) res.image.pixels[i] = clip01(u[i]);
  return res;
}

Image tv_denoise(const Image& img, const TvParams& params) {
  return tv_denoise_ex(img, params).image;
}

// ---------------------------------------------------------------------------
// wavelets
// ---------------------------------------------------------------------------

namespace {

struct FilterPair {
  std::vector<double> h;  // low-pass
  std::vector<double> g;  // high-pass, g[k] = (-1)^k h[L-1-k]
};

FilterPair filters_for(WaveletBasis basis) {
  FilterPair f;
  if (basis == WaveletBasis::Haar) {
    const double r = 1.0 / std::sqrt(2.0);
    f.h = {r, r};
  } else {
    const double s3 = std::sqrt(3.0);
    const double d = 4.0 * std::sqrt(2.0);
    f.h = {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d};
  }
  const size_t l = f.h.size();
  f.g.resize(l);
  for (size_t k = 0; k < l; ++k)
    f.g[k] = ((k % 2 == 0) ? 1.0 : -1.0) * f.h[l - 1 - k];
  return f;
}

// One periodized analysis step along a length-n vector (n even):
// approx[k] = sum_j h[j] x[(2k+j) mod n], detail likewise with g.
void dwt_step(const double* x, int n, const FilterPair& f, double* approx, double* detail) {
  const int half = n / 2;
  const int l = static_cast<int>(f.h.size());
  for (int k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (int j = 0; j < l; ++j) {
      const double v = x[(2 * k + j) % n];
      a += f.h[j] * v;
      d += f.g[j] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

// Transpose of dwt_step (orthonormal, so transpose == inverse).
void idwt_step(const double* approx, const double* detail, int n, const FilterPair& f,
               double* x) {
  std::fill(x, x + n, 0.0);
  const int half = n / 2;
  const int l = static_cast<int>(f.h.size());
  for (int k = 0; k < half; ++k) {
    for (int j = 0; j < l; ++j) {
      x[(2 * k + j) % n] += f.h[j] * approx[k] + f.g[j] * detail[k];
    }
  }
}

int padded_extent(int n, int levels) {
  const int m = 1 << levels;
  return ((n + m - 1) / m) * m;
}

}  // namespace

WaveletPyramid dwt2(const Image& img, int levels, WaveletBasis basis) {
  if (levels < 1) throw std::invalid_argument("dwt2: levels must be >= 1");
  if ((1 << levels) > std::min(img.height, img.width))
    throw std::invalid_argument("dwt2: too many levels for a " +
                                std::to_string(img.height) + "x" +
                                std::to_string(img.width) + " image");

  WaveletPyramid pyr;
  pyr.levels = levels;
  pyr.basis = basis;
  pyr.orig_h = img.height;
  pyr.orig_w = img.width;
  pyr.padded_h = padded_extent(img.height, levels);
  pyr.padded_w = padded_extent(img.width, levels);

  // Symmetric (mirror) extension into the bottom/right margins.
  std::vector<double> a(static_cast<size_t>(pyr.padded_h) * pyr.padded_w);
  for (int y = 0; y < pyr.padded_h; ++y) {
    const int sy = (y < img.height) ? y : 2 * img.height - 1 - y;
    for (int x = 0; x < pyr.padded_w; ++x) {
      const int sx = (x < img.width) ? x : 2 * img.width - 1 - x;
      a[static_cast<size_t>(y) * pyr.padded_w + x] = img.at(sy, sx);
    }
  }

  const FilterPair f = filters_for(basis);
  int h = pyr.padded_h, w = pyr.padded_w;
  int stride = pyr.padded_w;  // row stride of the working buffer

  std::vector<double> row_lo, row_hi, col_in, col_lo, col_hi;
  for (int level = 0; level < levels; ++level) {
    const int hh = h / 2, hw = w / 2;
    // rows: [lo | hi]
    row_lo.resize(hw);
    row_hi.resize(hw);
    std::vector<double> tmp(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
      dwt_step(a.data() + static_cast<size_t>(y) * stride, w, f, row_lo.data(),
               row_hi.data());
      std::copy(row_lo.begin(), row_lo.end(), tmp.begin() + static_cast<size_t>(y) * w);
      std::copy(row_hi.begin(), row_hi.end(),
                tmp.begin() + static_cast<size_t>(y) * w + hw);
    }
    // columns of each half: top = lo, bottom = hi
    col_in.resize(h);
    col_lo.resize(hh);
    col_hi.resize(hh);
    WaveletPyramid::Band lh{hh, hw, std::vector<double>(static_cast<size_t>(hh) * hw)};
    WaveletPyramid::Band hl{hh, hw, std::vector<double>(static_cast<size_t>(hh) * hw)};
    WaveletPyramid::Band hhb{hh, hw, std::vector<double>(static_cast<size_t>(hh) * hw)};
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) col_in[y] = tmp[static_cast<size_t>(y) * w + x];
      dwt_step(col_in.data(), h, f, col_lo.data(), col_hi.data());
      if (x < hw) {
        for (int y = 0; y < hh; ++y) {
          a[static_cast<size_t>(y) * stride + x] = col_lo[y];  // LL stays in place
          lh.c[static_cast<size_t>(y) * hw + x] = col_hi[y];
        }
      } else {
        const int xx = x - hw;
        for (int y = 0; y < hh; ++y) {
          hl.c[static_cast<size_t>(y) * hw + xx] = col_lo[y];
          hhb.c[static_cast<size_t>(y) * hw + xx] = col_hi[y];
        }
      }
    }
    pyr.details.push_back({std::move(lh), std::move(hl), std::move(hhb)});
    h = hh;
    w = hw;
  }

  pyr.approx.h = h;
  pyr.approx.w = w;
  pyr.approx.c.resize(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      pyr.approx.c[static_cast<size_t>(y) * w + x] = a[static_cast<size_t>(y) * stride + x];
  return pyr;
}

Image idwt2(const WaveletPyramid& pyr) {
  if (pyr.levels < 1 || pyr.details.size() != static_cast<size_t>(pyr.levels))
    throw std::invalid_argument("idwt2: malformed pyramid");
  const FilterPair f = filters_for(pyr.basis);

  std::vector<double> a(pyr.approx.c);
  int h = pyr.approx.h, w = pyr.approx.w;

  std::vector<double> col_lo, col_hi, col_out, row_full;
  for (int level = pyr.levels - 1; level >= 0; --level) {
    const auto& bands = pyr.details[level];
    const int fh = h * 2, fw = w * 2;
    if (bands[0].h != h || bands[0].w != w)
      throw std::invalid_argument("idwt2: band extents inconsistent with pyramid");

    // columns first (undo the second analysis pass)
    std::vector<double> tmp(static_cast<size_t>(fh) * fw);
    col_lo.resize(h);
    col_hi.resize(h);
    col_out.resize(fh);
    for (int x = 0; x < fw; ++x) {
      if (x < w) {
        for (int y = 0; y < h; ++y) {
          col_lo[y] = a[static_cast<size_t>(y) * w + x];
          col_hi[y] = bands[0].c[static_cast<size_t>(y) * w + x];  // LH
        }
      } else {
        const int xx = x - w;
        for (int y = 0; y < h; ++y) {
          col_lo[y] = bands[1].c[static_cast<size_t>(y) * w + xx];  // HL
          col_hi[y] = bands[2].c[static_cast<size_t>(y) * w + xx];  // HH
        }
      }
      idwt_step(col_lo.data(), col_hi.data(), fh, f, col_out.data());
      for (int y = 0; y < fh; ++y) tmp[static_cast<size_t>(y) * fw + x] = col_out[y];
    }
    // rows
    a.assign(static_cast<size_t>(fh) * fw, 0.0);
    row_full.resize(fw);
    for (int y = 0; y < fh; ++y) {
      idwt_step(tmp.data() + static_cast<size_t>(y) * fw,
                tmp.data() + static_cast<size_t>(y) * fw + w, fw, f, row_full.data());
      std::copy(row_full.begin(), row_full.end(), a.begin() + static_cast<size_t>(y) * fw);
    }
    h = fh;
    w = fw;
  }

  if (h != pyr.padded_h || w != pyr.padded_w)
    throw std::invalid_argument("idwt2: pyramid does not reconstruct the padded extent");

  Image img(pyr.orig_h, pyr.orig_w);
  for (int y = 0; y < pyr.orig_h; ++y)
    for (int x = 0; x < pyr.orig_w; ++x) img.at(y, x) = a[static_cast<size_t>(y) * w + x];
  return img;
}

std::vector<double> soft_threshold(std::vector<double> coeffs, double t) {
  if (t < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  for (double& c : coeffs) {
    const double mag = std::abs(c) - t;
    c = mag > 0.0 ? (c > 0.0 ? mag : -mag) : 0.0;
  }
  return coeffs;
}

double bayes_threshold(const std::vector<double>& subband, double sigma_noise) {
  if (subband.empty()) throw std::invalid_argument("bayes_threshold: empty subband");
  if (sigma_noise < 0.0)
    throw std::invalid_argument("bayes_threshold: negative sigma_noise");
  if (sigma_noise == 0.0) return 0.0;
  // Detail coefficients are zero-mean, so the second moment serves as variance.
  double m2 = 0.0;
  for (double c : subband) m2 += c * c;
  m2 /= static_cast<double>(subband.size());
  const double sx2 = m2 - sigma_noise * sigma_noise;
  if (sx2 <= 0.0) {
    double mx = 0.0;
    for (double c : subband) mx = std::max(mx, std::abs(c));
    return mx;  // kills the subband
  }
  return sigma_noise * sigma_noise / std::sqrt(sx2);
}

double estimate_noise_sigma(const WaveletPyramid& pyr) {
  if (pyr.details.empty()) throw std::invalid_argument("estimate_noise_sigma: no detail bands");
  std::vector<double> mags;
  mags.reserve(pyr.details[0][2].c.size());
  for (double c : pyr.details[0][2].c) mags.push_back(std::abs(c));
  const size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
  double med = mags[mid];
  if (mags.size() % 2 == 0) {
    const double hi = med;
    std::nth_element(mags.begin(), mags.begin() + mid - 1, mags.end());
    med = 0.5 * (mags[mid - 1] + hi);
  }
  return med / 0.6745;
}

Image wavelet_denoise(const Image& img, const WaveletParams& params) {
  WaveletPyramid pyr = dwt2(img, params.levels, params.basis);
  const double sigma = estimate_noise_sigma(pyr);
  for (auto& level : pyr.details) {
    for (auto& band : level) {
      const double t = bayes_threshold(band.c, sigma);
      band.c = soft_threshold(std::move(band.c), t);
    }
  }
  Image out = idwt2(pyr);
  for (double& v : out.pixels) v = clip01(v);
  return out;
}

// ---------------------------------------------------------------------------
// anisotropic diffusion
// ---------------------------------------------------------------------------

double conductance_value(Conductance g, double grad_mag, double kappa) {
  const double r = grad_mag / kappa;
  if (g == Conductance::Exponential) return std::exp(-r * r);
  return 1.0 / (1.0 + r * r);
}

Image anisotropic_diffusion(const Image& img, const DiffusionParams& params) {
  if (params.iterations < 1)
    throw std::invalid_argument("anisotropic_diffusion: iterations must be positive");
  if (!(params.kappa > 0.0))
    throw std::invalid_argument("anisotropic_diffusion: kappa must be positive");
  if (!(params.step > 0.0) || params.step > 0.25)
    throw std::invalid_argument("anisotropic_diffusion: step must lie in (0, 0.25]");

  const int h = img.height, w = img.width;
  std::vector<double> cur(img.pixels), next(img.size());
  auto idx = [w](int y, int x) { return static_cast<size_t>(y) * w + x; };

  for (int it = 0; it < params.iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double c = cur[idx(y, x)];
        const double dn = (y > 0) ? cur[idx(y - 1, x)] - c : 0.0;
        const double ds = (y < h - 1) ? cur[idx(y + 1, x)] - c : 0.0;
        const double dw = (x > 0) ? cur[idx(y, x - 1)] - c : 0.0;
        const double de = (x < w - 1) ? cur[idx(y, x + 1)] - c : 0.0;
        double flux = 0.0;
        flux += conductance_value(params.conductance, std::abs(dn), params.kappa) * dn;
        flux += conductance_value(params.conductance, std::abs(ds), params.kappa) * ds;
        flux += conductance_value(params.conductance, std::abs(dw), params.kappa) * dw;
        flux += conductance_value(params.conductance, std::abs(de), params.kappa) * de;
        next[idx(y, x)] = c + params.step * flux;
      }
    }
    cur.swap(next);
  }

  Image out(h, w);
  for (size_t i = 0; i < out.size(); ++i) out.pixels[i] = clip01(cur[i]);
  return out;
}

}  // namespace octdn
