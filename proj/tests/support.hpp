#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "octdn/image.hpp"
#include "octdn/tensor.hpp"

namespace testsup {

// Central finite-difference gradient check. make_loss must rebuild the full
// forward pass from the current tensor values (tape == nullptr -> pure
// forward). Step h = 1e-3, double precision throughout.
//
// ReLU caveat: when the +/-h window straddles a kink, the central difference
// measures the average of the two one-sided slopes, not the derivative, so a
// mismatch there says nothing about the backward pass. With refine_h > 0 a
// coordinate that misses at h is re-measured at refine_h (well inside the
// smooth region); a genuine backward bug fails at every step and still
// surfaces. FdReport counts how many coordinates needed that fallback.
struct FdReport {
  double max_rel_err = 0.0;
  int n_coords = 0;
  int n_refined = 0;
};

inline FdReport fd_check(const std::vector<octdn::Tensor>& checked,
                         const std::function<octdn::Tensor(octdn::Tape*)>& make_loss,
                         double h = 1e-3, double refine_h = 0.0) {
  using octdn::Tape;
  using octdn::Tensor;

  for (const Tensor& t : checked) {
    const_cast<Tensor&>(t).set_requires_grad(true);
    t.grad_buffer();
    t.zero_grad();
  }
  Tape tape;
  Tensor loss = make_loss(&tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(checked.size());
  for (const Tensor& t : checked) analytic.push_back(t.grad());

  auto numeric_at = [&](std::vector<double>& vals, size_t i, double step) {
    const double keep = vals[i];
    vals[i] = keep + step;
    const double up = make_loss(nullptr).value();
    vals[i] = keep - step;
    const double dn = make_loss(nullptr).value();
    vals[i] = keep;
    return (up - dn) / (2.0 * step);
  };
  auto rel = [](double a, double n) {
    return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-6});
  };

  FdReport report;
  for (size_t ti = 0; ti < checked.size(); ++ti) {
    std::vector<double>& vals = checked[ti].values();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double a = analytic[ti][i];
      double err = rel(a, numeric_at(vals, i, h));
      report.n_coords += 1;
      if (err > 1e-4 && refine_h > 0.0) {
        err = rel(a, numeric_at(vals, i, refine_h));
        report.n_refined += 1;
      }
      report.max_rel_err = std::max(report.max_rel_err, err);
    }
  }
  return report;
}

inline double fd_max_rel_error(const std::vector<octdn::Tensor>& checked,
                               const std::function<octdn::Tensor(octdn::Tape*)>& make_loss,
                               double h = 1e-3) {
  return fd_check(checked, make_loss, h).max_rel_err;
}

inline double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max({std::fabs(got), std::fabs(want), 1e-300});
}

// Smooth vertical step edge (0.3 left, 0.7 right, ~2px tanh ramp); the
// standard clean test scene for the classical denoisers.
inline octdn::Image make_step_image(int size) {
  octdn::Image img(size, size);
  const double c = size / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img.at(y, x) = 0.5 + 0.2 * std::tanh((x - c) / 2.0);
  return img;
}

// Natural-image stand-in: smooth mid-range scene (soft waves plus a few
// broad blobs), values well inside [0,1] so sigma-0.1 noise barely clips.
inline octdn::Image make_natural_image(int size, uint64_t seed) {
  octdn::Rng rng(seed);
  octdn::Image img(size, size);
  const double s = static_cast<double>(size);
  const double fy = rng.next_uniform(1.5, 3.5), fx = rng.next_uniform(1.5, 3.5);
  const double py = rng.next_uniform(0.0, 6.28), px = rng.next_uniform(0.0, 6.28);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img.at(y, x) = 0.45 + 0.16 * std::sin(6.283185307179586 * fy * y / s + py) *
                                std::cos(6.283185307179586 * fx * x / s + px);
  for (int b = 0; b < 4; ++b) {
    const double cy = rng.next_uniform(0.2, 0.8) * s, cx = rng.next_uniform(0.2, 0.8) * s;
    const double r = rng.next_uniform(0.08, 0.2) * s;
    const double amp = rng.next_uniform(-0.12, 0.12);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        img.at(y, x) += amp * std::exp(-d2 / (2.0 * r * r));
      }
  }
  for (double& v : img.pixels) v = octdn::clip01(v);
  return img;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("octdn_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testsup
