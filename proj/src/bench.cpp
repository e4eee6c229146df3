#include "octdn/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace octdn {

namespace {
constexpr const char* kMethodNames[] = {"corrupted", "tv", "wavelet", "ad", "ae"};
}

const char* method_name(Method m) { return kMethodNames[static_cast<int>(m)]; }

Method method_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i)
    if (name == kMethodNames[i]) return static_cast<Method>(i);
  throw std::invalid_argument("unknown method: " + name +
                              " (expected corrupted|tv|wavelet|ad|ae)");
}

uint64_t bench_corrupt_seed(uint64_t seed, uint64_t index) {
  return mix_seed(seed, kSeedTagBench, index);
}

Image denoise_with(Method m, const Image& noisy, const BenchConfig& cfg,
                   const Autoencoder* ae) {
  switch (m) {
    case Method::Corrupted:
      return noisy;
    case Method::Tv:
      return tv_denoise(noisy, cfg.tv);
    case Method::Wavelet:
      return wavelet_denoise(noisy, cfg.wavelet);
    case Method::Ad:
      return anisotropic_diffusion(noisy, cfg.diffusion);
    case Method::Ae: {
      if (!ae) throw std::invalid_argument("method ae requires an autoencoder checkpoint");
      const int s = ae->config().input_size;
      Image in = (noisy.height == s && noisy.width == s) ? noisy : resize_to(noisy, s);
      Tensor t({1, 1, s, s}, std::vector<double>(in.pixels));
      Tensor out = ae->forward(nullptr, t);
      return image_from_tensor(out, 0);
    }
  }
  throw std::invalid_argument("unreachable method");
}

BenchReport run_bench(const LabeledDataset& ds, const Classifier& classifier,
                      const Autoencoder* ae, const BenchConfig& cfg) {
  if (ds.test.empty()) throw std::invalid_argument("bench: empty test split");
  if (cfg.methods.empty()) throw std::invalid_argument("bench: no methods requested");
  for (Method m : cfg.methods)
    if (m == Method::Ae && !ae)
      throw std::invalid_argument("bench: method ae requested without a checkpoint");
  if (ae && ae->config().input_size != classifier.config().input_size)
    throw std::invalid_argument("bench: classifier/autoencoder input size mismatch");

  const int s = classifier.config().input_size;
  const int n = static_cast<int>(ds.test.size());

  struct Acc {
    std::vector<double> psnrs;
    std::vector<int> predictions;
    double ms_total = 0.0;
    int n_inf = 0;
  };
  std::vector<Acc> acc(cfg.methods.size());
  std::vector<int> truth;
  truth.reserve(n);

  for (int i = 0; i < n; ++i) {
    const LabeledSample& sample = ds.test[i];
    truth.push_back(static_cast<int>(sample.label));
    const Image clean = (sample.image.height == s && sample.image.width == s)
                            ? sample.image
                            : resize_to(sample.image, s);
    const Image noisy = corrupt(clean, cfg.sigma, bench_corrupt_seed(cfg.seed, i));

    for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const auto t0 = std::chrono::steady_clock::now();
      const Image restored = denoise_with(cfg.methods[mi], noisy, cfg, ae);
      acc[mi].ms_total +=
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();

      const double p = psnr(clean, restored);
      if (std::isinf(p)) {
        acc[mi].n_inf += 1;
      } else {
        acc[mi].psnrs.push_back(p);
      }
      Tensor t({1, 1, s, s}, std::vector<double>(restored.pixels));
      acc[mi].predictions.push_back(classifier.predict(t)[0]);
    }
  }

  BenchReport report;
  for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    BenchRow row;
    row.method = method_name(cfg.methods[mi]);
    row.n = n;
    row.n_infinite_psnr = acc[mi].n_inf;
    if (acc[mi].n_inf > 0)
      std::fprintf(stderr,
                   "warning: %d image(s) reached infinite PSNR for method %s; "
                   "excluded from the mean\n",
                   acc[mi].n_inf, row.method.c_str());
    if (!acc[mi].psnrs.empty()) {
      double sum = 0.0;
      for (double p : acc[mi].psnrs) sum += p;
      row.psnr_mean = sum / acc[mi].psnrs.size();
      double var = 0.0;
      for (double p : acc[mi].psnrs) var += (p - row.psnr_mean) * (p - row.psnr_mean);
      row.psnr_std = std::sqrt(var / acc[mi].psnrs.size());
    }
    row.acc = accuracy(acc[mi].predictions, truth);
    row.mean_ms = acc[mi].ms_total / n;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::ostringstream os;
  os << "method,psnr_mean,psnr_std,acc,mean_ms,n\n";
  char buf[160];
  for (const BenchRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.12g,%.3f,%d\n", r.method.c_str(),
                  r.psnr_mean, r.psnr_std, r.acc, r.mean_ms, r.n);
    os << buf;
  }
  return os.str();
}

void write_bench_csv(const BenchReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing: " + path);
  out << bench_csv(report);
}

std::string bench_table(const BenchReport& report) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %12s %10s %8s %10s %6s\n", "method", "psnr[dB]",
                "std[dB]", "acc[%]", "mean[ms]", "n");
  os << buf;
  for (const BenchRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-10s %12.2f %10.2f %8.1f %10.2f %6d\n",
                  r.method.c_str(), r.psnr_mean, r.psnr_std, r.acc, r.mean_ms, r.n);
    os << buf;
  }
  return os.str();
}

}  // namespace octdn
