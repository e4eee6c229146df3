#include "octdenoise.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "octdn/bench.hpp"
#include "octdn/classical.hpp"
#include "octdn/dataset.hpp"
#include "octdn/image.hpp"
#include "octdn/metrics.hpp"
#include "octdn/models.hpp"
#include "octdn/training.hpp"

// Opaque handle definitions. Each wraps one core object by value.
struct octdn_image {
  octdn::Image img;
};
struct octdn_dataset {
  octdn::LabeledDataset ds;
  // lazily materialized borrow handles for octdn_dataset_sample
  mutable std::vector<octdn_image> borrow[3];
};
struct octdn_model {
  octdn::Checkpoint ck;
};
struct octdn_bench_report {
  octdn::BenchReport report;
};

namespace {

thread_local std::string t_last_error = "no error";

void set_error(const char* what) { t_last_error = what; }

template <typename Fn>
octdn_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return OCTDN_ERR_INVALID_ARGUMENT;
  } catch (const octdn::NumericError& e) {
    set_error(e.what());
    return OCTDN_ERR_NUMERIC;
  } catch (const octdn::IoError& e) {
    set_error(e.what());
    return OCTDN_ERR_IO;
  } catch (const std::exception& e) {
    set_error(e.what());
    return OCTDN_ERR_INTERNAL;
  }
}

octdn_status require(bool cond, const char* message) {
  if (!cond) {
    set_error(message);
    return OCTDN_ERR_INVALID_ARGUMENT;
  }
  return OCTDN_OK;
}

octdn::TrainConfig to_core(const octdn_train_config& c) {
  octdn::TrainConfig out;
  out.epochs = c.epochs;
  out.batch_size = c.batch_size;
  out.lr = c.lr;
  out.alpha = c.alpha;
  out.sigma = c.sigma;
  out.plateau_factor = c.plateau_factor;
  out.plateau_patience = c.plateau_patience;
  out.min_lr = c.min_lr;
  out.seed = c.seed;
  return out;
}

octdn::TvParams to_core(const octdn_tv_params& p) {
  return octdn::TvParams{p.lambda, p.max_iter, p.tol, p.tau};
}

octdn::WaveletParams to_core(const octdn_wavelet_params& p) {
  if (p.basis != 0 && p.basis != 1)
    throw std::invalid_argument("wavelet basis must be 0 (Haar) or 1 (Daubechies-4)");
  return octdn::WaveletParams{
      p.levels, p.basis == 0 ? octdn::WaveletBasis::Haar : octdn::WaveletBasis::Daubechies4};
}

octdn::DiffusionParams to_core(const octdn_diffusion_params& p) {
  if (p.conductance != 0 && p.conductance != 1)
    throw std::invalid_argument("conductance must be 0 (exponential) or 1 (rational)");
  return octdn::DiffusionParams{p.iterations, p.kappa, p.step,
                                p.conductance == 0 ? octdn::Conductance::Exponential
                                                   : octdn::Conductance::Rational};
}

}  // namespace

extern "C" {

const char* octdn_last_error(void) { return t_last_error.c_str(); }

const char* octdn_version(void) { return "octdenoise 1.0.0"; }

/* ------------------------------------------------------------------ */
/* images                                                               */
/* ------------------------------------------------------------------ */

octdn_status octdn_image_load(const char* path, octdn_image** out) {
  if (auto s = require(path && out, "path and out must be non-NULL")) return s;
  return guarded([&] {
    *out = new octdn_image{octdn::load_image(path)};
    return OCTDN_OK;
  });
}

octdn_status octdn_image_save(const octdn_image* img, const char* path) {
  if (auto s = require(img && path, "img and path must be non-NULL")) return s;
  return guarded([&] {
    octdn::save_image(img->img, path);
    return OCTDN_OK;
  });
}

octdn_status octdn_image_create(int height, int width, const double* pixels,
                                octdn_image** out) {
  if (auto s = require(pixels && out, "pixels and out must be non-NULL")) return s;
  return guarded([&] {
    octdn::Image img(height, width);
    for (size_t i = 0; i < img.size(); ++i) img.pixels[i] = octdn::clip01(pixels[i]);
    *out = new octdn_image{std::move(img)};
    return OCTDN_OK;
  });
}

void octdn_image_destroy(octdn_image* img) { delete img; }

int octdn_image_height(const octdn_image* img) { return img ? img->img.height : 0; }
int octdn_image_width(const octdn_image* img) { return img ? img->img.width : 0; }

const double* octdn_image_pixels(const octdn_image* img) {
  return img ? img->img.pixels.data() : nullptr;
}

octdn_status octdn_image_corrupt(const octdn_image* img, double sigma, uint64_t seed,
                                 octdn_image** out) {
  if (auto s = require(img && out, "img and out must be non-NULL")) return s;
  return guarded([&] {
    *out = new octdn_image{octdn::corrupt(img->img, sigma, seed)};
    return OCTDN_OK;
  });
}

uint64_t octdn_bench_corrupt_seed(uint64_t seed, uint64_t index) {
  return octdn::bench_corrupt_seed(seed, index);
}

octdn_status octdn_image_resize(const octdn_image* img, int size, octdn_image** out) {
  if (auto s = require(img && out, "img and out must be non-NULL")) return s;
  return guarded([&] {
    *out = new octdn_image{octdn::resize_to(img->img, size)};
    return OCTDN_OK;
  });
}

octdn_status octdn_image_psnr(const octdn_image* reference, const octdn_image* test,
                              double* out_db) {
  if (auto s = require(reference && test && out_db, "arguments must be non-NULL")) return s;
  return guarded([&] {
    *out_db = octdn::psnr(reference->img, test->img);
    return OCTDN_OK;
  });
}

/* ------------------------------------------------------------------ */
/* datasets                                                             */
/* ------------------------------------------------------------------ */

const char* octdn_label_name(int label) {
  if (label < 0 || label >= OCTDN_NUM_CLASSES) return "?";
  return octdn::label_name(static_cast<octdn::Label>(label));
}

octdn_status octdn_dataset_synthesize(int n_per_class, int size, uint64_t seed,
                                      octdn_dataset** out) {
  if (auto s = require(out != nullptr, "out must be non-NULL")) return s;
  return guarded([&] {
    auto* ds = new octdn_dataset;
    ds->ds = octdn::make_synthetic(n_per_class, size, seed);
    *out = ds;
    return OCTDN_OK;
  });
}

octdn_status octdn_dataset_ingest(const char* root, int carve_val, int carve_test,
                                  octdn_dataset** out) {
  if (auto s = require(root && out, "root and out must be non-NULL")) return s;
  return guarded([&] {
    auto* ds = new octdn_dataset;
    ds->ds = octdn::ingest_directory(root, octdn::IngestOptions{carve_val, carve_test});
    *out = ds;
    return OCTDN_OK;
  });
}

octdn_status octdn_dataset_write(const octdn_dataset* ds, const char* root) {
  if (auto s = require(ds && root, "ds and root must be non-NULL")) return s;
  return guarded([&] {
    octdn::write_dataset(ds->ds, root);
    return OCTDN_OK;
  });
}

void octdn_dataset_destroy(octdn_dataset* ds) { delete ds; }

int octdn_dataset_split_size(const octdn_dataset* ds, octdn_split split) {
  if (!ds || split < OCTDN_SPLIT_TRAIN || split > OCTDN_SPLIT_TEST) return 0;
  return static_cast<int>(ds->ds.split(static_cast<octdn::Split>(split)).size());
}

octdn_status octdn_dataset_sample(const octdn_dataset* ds, octdn_split split, int index,
                                  const octdn_image** out_image, int* out_label) {
  if (auto s = require(ds && out_image && out_label, "arguments must be non-NULL")) return s;
  if (auto s = require(split >= OCTDN_SPLIT_TRAIN && split <= OCTDN_SPLIT_TEST,
                       "invalid split"))
    return s;
  return guarded([&] {
    const auto& samples = ds->ds.split(static_cast<octdn::Split>(split));
    if (index < 0 || index >= static_cast<int>(samples.size()))
      throw std::invalid_argument("sample index out of range");
    auto& borrow = ds->borrow[static_cast<int>(split)];
    if (borrow.size() != samples.size()) {
      borrow.clear();
      borrow.reserve(samples.size());
      for (const auto& s : samples) borrow.push_back(octdn_image{s.image});
    }
    *out_image = &borrow[index];
    *out_label = static_cast<int>(samples[index].label);
    return OCTDN_OK;
  });
}

/* ------------------------------------------------------------------ */
/* models and training                                                  */
/* ------------------------------------------------------------------ */

octdn_status octdn_model_load(const char* path, octdn_model** out) {
  if (auto s = require(path && out, "path and out must be non-NULL")) return s;
  return guarded([&] {
    octdn::Checkpoint ck = octdn::load_checkpoint(path);
    // validate eagerly so a corrupt file fails here, not at first use
    if (ck.kind == octdn::ModelKind::Classifier) {
      octdn::Classifier::from_checkpoint(ck);
    } else {
      octdn::Autoencoder::from_checkpoint(ck);
    }
    *out = new octdn_model{std::move(ck)};
    return OCTDN_OK;
  });
}

octdn_status octdn_model_save(const octdn_model* model, const char* path) {
  if (auto s = require(model && path, "model and path must be non-NULL")) return s;
  return guarded([&] {
    octdn::save_checkpoint(model->ck, path);
    return OCTDN_OK;
  });
}

void octdn_model_destroy(octdn_model* model) { delete model; }

octdn_model_kind octdn_model_get_kind(const octdn_model* model) {
  return model && model->ck.kind == octdn::ModelKind::Autoencoder
             ? OCTDN_MODEL_AUTOENCODER
             : OCTDN_MODEL_CLASSIFIER;
}

int octdn_model_input_size(const octdn_model* model) {
  if (!model) return 0;
  auto it = model->ck.config.find("input_size");
  return it == model->ck.config.end() ? 0 : std::stoi(it->second);
}

int octdn_model_best_epoch(const octdn_model* model) { return model ? model->ck.epoch : 0; }

double octdn_model_best_val_loss(const octdn_model* model) {
  return model ? model->ck.best_val_loss : 0.0;
}

void octdn_train_config_init(octdn_train_config* cfg) {
  const octdn::TrainConfig d;
  cfg->epochs = d.epochs;
  cfg->batch_size = d.batch_size;
  cfg->lr = d.lr;
  cfg->alpha = d.alpha;
  cfg->sigma = d.sigma;
  cfg->plateau_factor = d.plateau_factor;
  cfg->plateau_patience = d.plateau_patience;
  cfg->min_lr = d.min_lr;
  cfg->seed = 0;
}

void octdn_classifier_arch_init(octdn_classifier_arch* arch) {
  const octdn::ClassifierConfig d;
  arch->input_size = d.input_size;
  arch->base_channels = d.base_channels;
  arch->blocks_per_stage = d.blocks_per_stage;
  arch->n_stages = d.n_stages;
}

void octdn_autoencoder_arch_init(octdn_autoencoder_arch* arch) {
  const octdn::AutoencoderConfig d;
  arch->input_size = d.input_size;
  arch->widths = nullptr;  // nullptr selects the default widths
  arch->n_stages = 0;
}

octdn_status octdn_train_classifier(const octdn_dataset* ds,
                                    const octdn_classifier_arch* arch,
                                    const octdn_train_config* cfg,
                                    const char* log_csv_path, octdn_model** out) {
  if (auto s = require(ds && arch && cfg && out, "arguments must be non-NULL")) return s;
  return guarded([&] {
    octdn::ClassifierConfig mc;
    mc.input_size = arch->input_size;
    mc.base_channels = arch->base_channels;
    mc.blocks_per_stage = arch->blocks_per_stage;
    mc.n_stages = arch->n_stages;
    octdn::TrainResult res = octdn::train_classifier(ds->ds, mc, to_core(*cfg));
    if (log_csv_path) octdn::write_epoch_log(res.log, log_csv_path);
    *out = new octdn_model{std::move(res.checkpoint)};
    return OCTDN_OK;
  });
}

octdn_status octdn_train_autoencoder(const octdn_dataset* ds, const octdn_model* classifier,
                                     const octdn_autoencoder_arch* arch,
                                     const octdn_train_config* cfg,
                                     const char* log_csv_path, octdn_model** out) {
  if (auto s = require(ds && classifier && arch && cfg && out, "arguments must be non-NULL"))
    return s;
  return guarded([&] {
    octdn::AutoencoderConfig mc;
    mc.input_size = arch->input_size;
    if (arch->widths && arch->n_stages > 0)
      mc.widths.assign(arch->widths, arch->widths + arch->n_stages);
    octdn::TrainResult res =
        octdn::train_autoencoder(ds->ds, classifier->ck, mc, to_core(*cfg));
    if (log_csv_path) octdn::write_epoch_log(res.log, log_csv_path);
    *out = new octdn_model{std::move(res.checkpoint)};
    return OCTDN_OK;
  });
}

octdn_status octdn_classifier_predict(const octdn_model* classifier, const octdn_image* img,
                                      int* out_label) {
  if (auto s = require(classifier && img && out_label, "arguments must be non-NULL"))
    return s;
  return guarded([&] {
    octdn::Classifier model = octdn::Classifier::from_checkpoint(classifier->ck);
    const int size = model.config().input_size;
    const octdn::Image& src = img->img;
    const octdn::Image use = (src.height == size && src.width == size)
                                 ? src
                                 : octdn::resize_to(src, size);
    octdn::Tensor t({1, 1, size, size}, std::vector<double>(use.pixels));
    *out_label = model.predict(t)[0];
    return OCTDN_OK;
  });
}

octdn_status octdn_denoise_ae(const octdn_model* autoencoder, const octdn_image* img,
                              octdn_image** out) {
  if (auto s = require(autoencoder && img && out, "arguments must be non-NULL")) return s;
  return guarded([&] {
    octdn::Autoencoder model = octdn::Autoencoder::from_checkpoint(autoencoder->ck);
    octdn::BenchConfig bc;
    *out = new octdn_image{
        octdn::denoise_with(octdn::Method::Ae, img->img, bc, &model)};
    return OCTDN_OK;
  });
}

/* ------------------------------------------------------------------ */
/* classical denoisers                                                  */
/* ------------------------------------------------------------------ */

void octdn_tv_params_init(octdn_tv_params* p) {
  const octdn::TvParams d;
  p->lambda = d.lambda;
  p->max_iter = d.max_iter;
  p->tol = d.tol;
  p->tau = d.tau;
}

void octdn_wavelet_params_init(octdn_wavelet_params* p) {
  const octdn::WaveletParams d;
  p->levels = d.levels;
  p->basis = d.basis == octdn::WaveletBasis::Haar ? 0 : 1;
}

void octdn_diffusion_params_init(octdn_diffusion_params* p) {
  const octdn::DiffusionParams d;
  p->iterations = d.iterations;
  p->kappa = d.kappa;
  p->step = d.step;
  p->conductance = d.conductance == octdn::Conductance::Exponential ? 0 : 1;
}

octdn_status octdn_denoise_tv(const octdn_image* img, const octdn_tv_params* p,
                              octdn_image** out) {
  if (auto s = require(img && p && out, "arguments must be non-NULL")) return s;
  return guarded([&] {
    *out = new octdn_image{octdn::tv_denoise(img->img, to_core(*p))};
    return OCTDN_OK;
  });
}

octdn_status octdn_denoise_wavelet(const octdn_image* img, const octdn_wavelet_params* p,
                                   octdn_image** out) {
  if (auto s = require(img && p && out, "arguments must be non-NULL")) return s;
  return guarded([&] {
    *out = new octdn_image{octdn::wavelet_denoise(img->img, to_core(*p))};
    return OCTDN_OK;
  });
}

octdn_status octdn_denoise_ad(const octdn_image* img, const octdn_diffusion_params* p,
                              octdn_image** out) {
  if (auto s = require(img && p && out, "arguments must be non-NULL")) return s;
  return guarded([&] {
    *out = new octdn_image{octdn::anisotropic_diffusion(img->img, to_core(*p))};
    return OCTDN_OK;
  });
}

/* ------------------------------------------------------------------ */
/* benchmark                                                            */
/* ------------------------------------------------------------------ */

void octdn_bench_options_init(octdn_bench_options* opts) {
  const octdn::BenchConfig d;
  opts->sigma = d.sigma;
  opts->seed = d.seed;
  opts->methods = nullptr;
  octdn_tv_params_init(&opts->tv);
  octdn_wavelet_params_init(&opts->wavelet);
  octdn_diffusion_params_init(&opts->diffusion);
}

octdn_status octdn_bench_run(const octdn_dataset* ds, const octdn_model* classifier,
                             const octdn_model* autoencoder,
                             const octdn_bench_options* opts, octdn_bench_report** out) {
  if (auto s = require(ds && classifier && opts && out, "arguments must be non-NULL"))
    return s;
  return guarded([&] {
    octdn::Classifier clf = octdn::Classifier::from_checkpoint(classifier->ck);
    clf.freeze();
    std::unique_ptr<octdn::Autoencoder> ae;
    if (autoencoder)
      ae = std::make_unique<octdn::Autoencoder>(
          octdn::Autoencoder::from_checkpoint(autoencoder->ck));

    octdn::BenchConfig bc;
    bc.sigma = opts->sigma;
    bc.seed = opts->seed;
    bc.tv = to_core(opts->tv);
    bc.wavelet = to_core(opts->wavelet);
    bc.diffusion = to_core(opts->diffusion);
    bc.methods.clear();
    if (opts->methods) {
      std::istringstream ms(opts->methods);
      for (std::string tok; std::getline(ms, tok, ',');)
        bc.methods.push_back(octdn::method_from_name(tok));
    } else {
      bc.methods = {octdn::Method::Corrupted, octdn::Method::Tv, octdn::Method::Wavelet,
                    octdn::Method::Ad};
      if (ae) bc.methods.push_back(octdn::Method::Ae);
    }

    octdn::BenchReport report = octdn::run_bench(ds->ds, clf, ae.get(), bc);
    *out = new octdn_bench_report{std::move(report)};
    return OCTDN_OK;
  });
}

void octdn_bench_report_destroy(octdn_bench_report* report) { delete report; }

int octdn_bench_report_size(const octdn_bench_report* report) {
  return report ? static_cast<int>(report->report.rows.size()) : 0;
}

octdn_status octdn_bench_report_row(const octdn_bench_report* report, int index,
                                    octdn_bench_row* out) {
  if (auto s = require(report && out, "report and out must be non-NULL")) return s;
  if (auto s = require(index >= 0 && index < static_cast<int>(report->report.rows.size()),
                       "row index out of range"))
    return s;
  const octdn::BenchRow& r = report->report.rows[index];
  std::snprintf(out->method, sizeof out->method, "%s", r.method.c_str());
  out->psnr_mean = r.psnr_mean;
  out->psnr_std = r.psnr_std;
  out->acc = r.acc;
  out->mean_ms = r.mean_ms;
  out->n = r.n;
  return OCTDN_OK;
}

octdn_status octdn_bench_report_write_csv(const octdn_bench_report* report,
                                          const char* path) {
  if (auto s = require(report && path, "report and path must be non-NULL")) return s;
  return guarded([&] {
    octdn::write_bench_csv(report->report, path);
    return OCTDN_OK;
  });
}

char* octdn_bench_report_table(const octdn_bench_report* report) {
  if (!report) return nullptr;
  const std::string s = octdn::bench_table(report->report);
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void octdn_string_free(char* s) { std::free(s); }

}  // extern "C"
