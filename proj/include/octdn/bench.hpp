#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "octdn/classical.hpp"
#include "octdn/dataset.hpp"
#include "octdn/metrics.hpp"
#include "octdn/models.hpp"

namespace octdn {

enum class Method { Corrupted, Tv, Wavelet, Ad, Ae };

const char* method_name(Method m);
Method method_from_name(const std::string& name);  // throws on unknown name

struct BenchConfig {
  double sigma = 0.1;
  std::vector<Method> methods = {Method::Corrupted, Method::Tv, Method::Wavelet,
                                 Method::Ad, Method::Ae};
  uint64_t seed = 0;
  TvParams tv;
  WaveletParams wavelet;
  DiffusionParams diffusion;
};

struct BenchRow {
  std::string method;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;  // population std over finite per-image values
  double acc = 0.0;       // frozen-classifier accuracy on the method's output, %
  double mean_ms = 0.0;   // wall clock per image, denoising step only
  int n = 0;
  int n_infinite_psnr = 0;  // +inf sentinels excluded from mean/std
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

// Seed of the corruption stream for test image `index`; exposed so that
// single-image runs can reproduce exactly what the harness saw.
uint64_t bench_corrupt_seed(uint64_t seed, uint64_t index);

// Runs one method on one already-corrupted image. "corrupted" returns the
// input unchanged. The classifier is not involved here.
Image denoise_with(Method m, const Image& noisy, const BenchConfig& cfg,
                   const Autoencoder* ae);

// Table 1 protocol over the test split: every image is resized to the
// classifier's input size, corrupted once with its per-index seed, then every
// requested method runs on that same corrupted image. PSNR is measured
// against the clean original, accuracy with the frozen classifier on the
// method's output. Requires the AE only when Method::Ae is requested.
BenchReport run_bench(const LabeledDataset& ds, const Classifier& classifier,
                      const Autoencoder* ae, const BenchConfig& cfg);

// CSV with header: method,psnr_mean,psnr_std,acc,mean_ms,n
std::string bench_csv(const BenchReport& report);
void write_bench_csv(const BenchReport& report, const std::string& path);

// Aligned human-readable summary table.
std::string bench_table(const BenchReport& report);

}  // namespace octdn
