/*
 * octdenoise — retinal OCT denoising benchmark library.
 *
 * C API over the C++ core: opaque handles, integer status codes, and a
 * per-thread error message. Every function that can fail returns
 * octdn_status; on failure octdn_last_error() describes what went wrong.
 * Handles are created and released by matching *_destroy calls; destroying
 * NULL is a no-op.
 *
 * Images are grayscale with pixel values in [0,1], row-major doubles.
 * Checkpoint files, dataset layout and corruption seeding match the CLI's
 * conventions, so artifacts are interchangeable between the two.
 */

#ifndef OCTDENOISE_H
#define OCTDENOISE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum octdn_status {
  OCTDN_OK = 0,
  OCTDN_ERR_INVALID_ARGUMENT = 1, /* bad parameter or shape/contract violation */
  OCTDN_ERR_IO = 2,               /* file missing, unreadable or malformed */
  OCTDN_ERR_NUMERIC = 3,          /* non-finite values (training divergence) */
  OCTDN_ERR_INTERNAL = 4
} octdn_status;

/* Message describing the most recent failure on this thread. Never NULL. */
const char* octdn_last_error(void);

const char* octdn_version(void);

/* ------------------------------------------------------------------ */
/* images                                                               */
/* ------------------------------------------------------------------ */

typedef struct octdn_image octdn_image;

/* 8-bit grayscale PNG or binary PGM (P5). RGB PNGs are converted by
 * channel mean; 16-bit inputs are rejected. */
octdn_status octdn_image_load(const char* path, octdn_image** out);

/* Format chosen by extension: .png or .pgm. Pixels quantized by
 * round(v*255); the encoding is deterministic. */
octdn_status octdn_image_save(const octdn_image* img, const char* path);

octdn_status octdn_image_create(int height, int width, const double* pixels,
                                octdn_image** out);
void octdn_image_destroy(octdn_image* img);

int octdn_image_height(const octdn_image* img);
int octdn_image_width(const octdn_image* img);
/* Borrowed pointer to height*width row-major pixels; valid until destroy. */
const double* octdn_image_pixels(const octdn_image* img);

/* Additive Gaussian noise with standard deviation sigma, clipped to [0,1].
 * Deterministic per seed. */
octdn_status octdn_image_corrupt(const octdn_image* img, double sigma, uint64_t seed,
                                 octdn_image** out);

/* Seed used by the bench harness for test image `index`; corrupting with
 * this seed reproduces the harness input exactly. */
uint64_t octdn_bench_corrupt_seed(uint64_t seed, uint64_t index);

/* Bilinear resample to size x size. */
octdn_status octdn_image_resize(const octdn_image* img, int size, octdn_image** out);

/* 10*log10(1/MSE) on [0,1] images. Identical images yield +inf. */
octdn_status octdn_image_psnr(const octdn_image* reference, const octdn_image* test,
                              double* out_db);

/* ------------------------------------------------------------------ */
/* datasets                                                             */
/* ------------------------------------------------------------------ */

typedef struct octdn_dataset octdn_dataset;

typedef enum octdn_split { OCTDN_SPLIT_TRAIN = 0, OCTDN_SPLIT_VAL = 1, OCTDN_SPLIT_TEST = 2 } octdn_split;

/* Class labels: 0 NORMAL, 1 DRUSEN, 2 DME, 3 CNV. */
#define OCTDN_NUM_CLASSES 4
const char* octdn_label_name(int label);

/* Four-class synthetic layered-texture dataset, 80/10/10 split per class,
 * deterministic per seed. */
octdn_status octdn_dataset_synthesize(int n_per_class, int size, uint64_t seed,
                                      octdn_dataset** out);

/* Walks <root>/{train,val,test}/{NORMAL,DRUSEN,DME,CNV} picking up .png and
 * .pgm files. When val/ or test/ is missing, carve_val/carve_test samples are
 * split off train/ deterministically (0 leaves a missing directory as an
 * error). */
octdn_status octdn_dataset_ingest(const char* root, int carve_val, int carve_test,
                                  octdn_dataset** out);

/* Materializes the standard folder layout under root as PNGs. */
octdn_status octdn_dataset_write(const octdn_dataset* ds, const char* root);

void octdn_dataset_destroy(octdn_dataset* ds);

int octdn_dataset_split_size(const octdn_dataset* ds, octdn_split split);
/* Borrowed image handle plus label for one sample; the image stays owned by
 * the dataset (do NOT destroy it). */
octdn_status octdn_dataset_sample(const octdn_dataset* ds, octdn_split split, int index,
                                  const octdn_image** out_image, int* out_label);

/* ------------------------------------------------------------------ */
/* models and training                                                  */
/* ------------------------------------------------------------------ */

typedef struct octdn_model octdn_model;

typedef enum octdn_model_kind {
  OCTDN_MODEL_CLASSIFIER = 1,
  OCTDN_MODEL_AUTOENCODER = 2
} octdn_model_kind;

octdn_status octdn_model_load(const char* path, octdn_model** out);
octdn_status octdn_model_save(const octdn_model* model, const char* path);
void octdn_model_destroy(octdn_model* model);

octdn_model_kind octdn_model_get_kind(const octdn_model* model);
int octdn_model_input_size(const octdn_model* model);
/* Epoch whose weights the checkpoint carries and its validation loss. */
int octdn_model_best_epoch(const octdn_model* model);
double octdn_model_best_val_loss(const octdn_model* model);

/* Training hyperparameters; octdn_train_config_init fills the defaults
 * (epochs 200, batch 16, lr 1e-4, alpha 0.1, sigma 0.1, plateau factor 0.1
 * with patience 10, min lr 1e-7). */
typedef struct octdn_train_config {
  int epochs;
  int batch_size;
  double lr;
  double alpha; /* autoencoder stage only */
  double sigma; /* autoencoder stage only */
  double plateau_factor;
  int plateau_patience;
  double min_lr;
  uint64_t seed;
} octdn_train_config;

void octdn_train_config_init(octdn_train_config* cfg);

/* Residual-CNN classifier architecture. */
typedef struct octdn_classifier_arch {
  int input_size;
  int base_channels;
  int blocks_per_stage;
  int n_stages;
} octdn_classifier_arch;

void octdn_classifier_arch_init(octdn_classifier_arch* arch);

/* Convolutional encoder-decoder architecture; widths lists the encoder
 * channel widths per stride-2 stage (decoder mirrors them). */
typedef struct octdn_autoencoder_arch {
  int input_size;
  const int* widths;
  int n_stages;
} octdn_autoencoder_arch;

void octdn_autoencoder_arch_init(octdn_autoencoder_arch* arch);

/* Stage 1: trains the classifier on clean images (cross entropy, Adam,
 * reduce-on-plateau, lowest-val-loss checkpointing). log_csv_path may be
 * NULL; otherwise the per-epoch log is written there. */
octdn_status octdn_train_classifier(const octdn_dataset* ds,
                                    const octdn_classifier_arch* arch,
                                    const octdn_train_config* cfg,
                                    const char* log_csv_path, octdn_model** out);

/* Stage 2: trains the denoising autoencoder against the frozen classifier
 * with loss mse + alpha * cross-entropy(classifier(reconstruction)). */
octdn_status octdn_train_autoencoder(const octdn_dataset* ds,
                                     const octdn_model* classifier,
                                     const octdn_autoencoder_arch* arch,
                                     const octdn_train_config* cfg,
                                     const char* log_csv_path, octdn_model** out);

/* Class prediction for one image (resized to the model input if needed). */
octdn_status octdn_classifier_predict(const octdn_model* classifier,
                                      const octdn_image* img, int* out_label);

/* Autoencoder reconstruction of one image. */
octdn_status octdn_denoise_ae(const octdn_model* autoencoder, const octdn_image* img,
                              octdn_image** out);

/* ------------------------------------------------------------------ */
/* classical denoisers                                                  */
/* ------------------------------------------------------------------ */

typedef struct octdn_tv_params {
  double lambda; /* fidelity weight */
  int max_iter;
  double tol;
  double tau; /* dual step, must stay <= 0.25 */
} octdn_tv_params;

typedef struct octdn_wavelet_params {
  int levels;
  int basis; /* 0 = Haar, 1 = Daubechies-4 */
} octdn_wavelet_params;

typedef struct octdn_diffusion_params {
  int iterations;
  double kappa;
  double step;        /* explicit scheme step, must stay <= 0.25 */
  int conductance;    /* 0 = exponential, 1 = rational */
} octdn_diffusion_params;

/* Frozen defaults: TV lambda 0.12, tau 0.248, tol 1e-5, 200 iterations;
 * wavelet Haar, 3 levels; diffusion 20 iterations, kappa 0.15, step 0.25,
 * exponential conductance. */
void octdn_tv_params_init(octdn_tv_params* p);
void octdn_wavelet_params_init(octdn_wavelet_params* p);
void octdn_diffusion_params_init(octdn_diffusion_params* p);

octdn_status octdn_denoise_tv(const octdn_image* img, const octdn_tv_params* p,
                              octdn_image** out);
octdn_status octdn_denoise_wavelet(const octdn_image* img, const octdn_wavelet_params* p,
                                   octdn_image** out);
octdn_status octdn_denoise_ad(const octdn_image* img, const octdn_diffusion_params* p,
                              octdn_image** out);

/* ------------------------------------------------------------------ */
/* benchmark harness                                                    */
/* ------------------------------------------------------------------ */

typedef struct octdn_bench_report octdn_bench_report;

typedef struct octdn_bench_options {
  double sigma;
  uint64_t seed;
  /* comma-separated subset of corrupted,tv,wavelet,ad,ae; NULL runs all
   * methods the supplied models allow. */
  const char* methods;
  octdn_tv_params tv;
  octdn_wavelet_params wavelet;
  octdn_diffusion_params diffusion;
} octdn_bench_options;

void octdn_bench_options_init(octdn_bench_options* opts);

/* Runs the benchmark over the dataset's test split. classifier is required;
 * autoencoder may be NULL when method "ae" is not requested. Every method
 * sees the identical per-index corrupted image. */
octdn_status octdn_bench_run(const octdn_dataset* ds, const octdn_model* classifier,
                             const octdn_model* autoencoder,
                             const octdn_bench_options* opts, octdn_bench_report** out);

void octdn_bench_report_destroy(octdn_bench_report* report);

typedef struct octdn_bench_row {
  char method[16];
  double psnr_mean;
  double psnr_std;
  double acc;
  double mean_ms;
  int n;
} octdn_bench_row;

int octdn_bench_report_size(const octdn_bench_report* report);
octdn_status octdn_bench_report_row(const octdn_bench_report* report, int index,
                                    octdn_bench_row* out);

/* CSV with header method,psnr_mean,psnr_std,acc,mean_ms,n */
octdn_status octdn_bench_report_write_csv(const octdn_bench_report* report,
                                          const char* path);

/* Returns a malloc'd aligned summary table; free with octdn_string_free. */
char* octdn_bench_report_table(const octdn_bench_report* report);
void octdn_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* OCTDENOISE_H */
