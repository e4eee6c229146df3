#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octdn/dataset.hpp"
#include "octdn/models.hpp"
#include "octdn/tensor.hpp"

namespace octdn {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-4;           // initial Adam learning rate
  double alpha = 0.1;         // classifier-regularizer weight (autoencoder stage)
  double sigma = 0.1;         // corruption noise std (autoencoder stage)
  double plateau_factor = 0.1;
  int plateau_patience = 10;  // reduce after patience+1 consecutive non-improving epochs
  double plateau_rel_threshold = 1e-4;  // relative improvement that counts
  double min_lr = 1e-7;
  uint64_t seed = 0;

  void validate() const;
};

// Reduce-on-plateau bookkeeping. lr never increases and never drops below
// min_lr; the non-improvement counter resets on any counted improvement and
// after each reduction.
struct PlateauState {
  double best_val_loss;
  int epochs_since_improvement = 0;
  double lr;
};

PlateauState plateau_init(const TrainConfig& cfg);
PlateauState plateau_update(const PlateauState& state, double val_loss,
                            const TrainConfig& cfg);

// One CSV row per epoch: epoch,train_loss,val_loss,val_lr_term,val_lc_term,lr,seconds
// For the classifier stage val_lr_term is 0 and val_lc_term equals val_loss
// (cross entropy is the whole objective).
struct EpochLogRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_lr_term = 0.0;  // reconstruction component
  double val_lc_term = 0.0;  // cross-entropy component (unweighted)
  double lr = 0.0;
  double seconds = 0.0;
};

std::string epoch_log_csv(const std::vector<EpochLogRow>& log);
void write_epoch_log(const std::vector<EpochLogRow>& log, const std::string& path);

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the epoch with the lowest val loss
  std::vector<EpochLogRow> log;
};

// L_r + alpha * L_c: mse(x, xhat) plus alpha times the frozen classifier's
// cross entropy on the reconstruction. Gradients flow into the autoencoder
// only; the classifier must be frozen (its parameters get no gradients).
// With alpha == 0 the classifier pass is skipped and the result is exactly
// the reconstruction term.
Tensor combined_loss(Tape* tape, const Tensor& x, const Tensor& xhat,
                     const std::vector<int>& labels, const Classifier& frozen_classifier,
                     double alpha);

// Stage 1: cross entropy on clean images, Adam, reduce-on-plateau, returns
// the checkpoint of the epoch with the lowest validation loss.
TrainResult train_classifier(const LabeledDataset& ds, const ClassifierConfig& model_cfg,
                             const TrainConfig& cfg);

// Stage 2: per batch the clean images are freshly corrupted with seed
// mix(seed, epoch, sample index), reconstructed, and scored by
// combined_loss against the frozen stage-1 classifier. Validation corruption
// uses fixed per-sample seeds (no epoch term) so epoch losses are comparable.
TrainResult train_autoencoder(const LabeledDataset& ds,
                              const Checkpoint& classifier_checkpoint,
                              const AutoencoderConfig& model_cfg, const TrainConfig& cfg);

}  // namespace octdn
