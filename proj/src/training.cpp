#include "octdn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace octdn {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
  if (alpha < 0.0) throw std::invalid_argument("train config: alpha must be >= 0");
  if (sigma < 0.0) throw std::invalid_argument("train config: sigma must be >= 0");
  if (!(plateau_factor > 0.0) || plateau_factor >= 1.0)
    throw std::invalid_argument("train config: plateau_factor must lie in (0,1)");
  if (plateau_patience < 0) throw std::invalid_argument("train config: bad patience");
  if (!(min_lr > 0.0)) throw std::invalid_argument("train config: min_lr must be positive");
}

PlateauState plateau_init(const TrainConfig& cfg) {
  return PlateauState{std::numeric_limits<double>::infinity(), 0, cfg.lr};
}

PlateauState plateau_update(const PlateauState& state, double val_loss,
                            const TrainConfig& cfg) {
  if (!std::isfinite(val_loss))
    throw std::invalid_argument("plateau_update: val_loss must be finite");
  PlateauState next = state;
  if (val_loss < state.best_val_loss * (1.0 - cfg.plateau_rel_threshold)) {
    next.best_val_loss = val_loss;
    next.epochs_since_improvement = 0;
  } else {
    next.epochs_since_improvement += 1;
    if (next.epochs_since_improvement > cfg.plateau_patience) {
      next.lr = std::max(cfg.min_lr, next.lr * cfg.plateau_factor);
      next.epochs_since_improvement = 0;
    }
  }
  return next;
}

std::string epoch_log_csv(const std::vector<EpochLogRow>& log) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,val_lr_term,val_lc_term,lr,seconds\n";
  char buf[192];
  for (const EpochLogRow& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.3f\n", r.epoch,
                  r.train_loss, r.val_loss, r.val_lr_term, r.val_lc_term, r.lr, r.seconds);
    os << buf;
  }
  return os.str();
}

void write_epoch_log(const std::vector<EpochLogRow>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open log for writing: " + path);
  out << epoch_log_csv(log);
}

Tensor combined_loss(Tape* tape, const Tensor& x, const Tensor& xhat,
                     const std::vector<int>& labels, const Classifier& frozen_classifier,
                     double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("combined_loss: alpha must be >= 0");
  Tensor l_r = mse(tape, x, xhat);
  if (alpha == 0.0) return l_r;
  if (!frozen_classifier.frozen())
    throw std::invalid_argument("combined_loss: classifier must be frozen");
  Tensor logits = frozen_classifier.forward(tape, xhat);
  Tensor l_c = softmax_cross_entropy(tape, logits, labels);
  return add(tape, l_r, scale(tape, l_c, alpha));
}

namespace {

class EpochTimer {
 public:
  EpochTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void require_splits(const LabeledDataset& ds) {
  if (ds.train.empty() || ds.val.empty() || ds.test.empty())
    throw std::invalid_argument("training requires non-empty train/val/test splits");
}

struct BestTracker {
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<Tensor> snapshot;

  void offer(double val_loss, int epoch, const std::vector<Tensor>& params) {
    if (val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      snapshot.clear();
      snapshot.reserve(params.size());
      for (const Tensor& p : params) snapshot.push_back(p.clone_values());
    }
  }

  void restore(std::vector<Tensor>& params) const {
    for (size_t i = 0; i < params.size(); ++i) params[i].values() = snapshot[i].values();
  }
};

// Corruption of one tensorized batch: per-sample seeds derived from
// (seed, epoch_tag, split index), applied on the [0,1] image and re-clipped.
Tensor corrupt_batch(const Tensor& clean, const std::vector<int>& indices, double sigma,
                     uint64_t seed, uint64_t epoch_tag) {
  Tensor noisy = clean.clone_values();
  const int s = clean.shape()[2];
  const size_t plane = static_cast<size_t>(s) * s;
  for (size_t n = 0; n < indices.size(); ++n) {
    Rng rng(mix_seed(seed, epoch_tag, static_cast<uint64_t>(indices[n])));
    double* px = noisy.values().data() + n * plane;
    for (size_t i = 0; i < plane; ++i) px[i] = clip01(px[i] + rng.next_gaussian(0.0, sigma));
  }
  return noisy;
}

template <typename LossFn>
void abort_on_divergence(int epoch, LossFn&& fn) {
  try {
    fn();
  } catch (const NumericError& e) {
    throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " +
                             e.what());
  }
}

}  // namespace

TrainResult train_classifier(const LabeledDataset& ds, const ClassifierConfig& model_cfg,
                             const TrainConfig& cfg) {
  cfg.validate();
  model_cfg.validate();
  require_splits(ds);

  Classifier model(model_cfg, cfg.seed);
  std::vector<Tensor> params = model.parameters();
  AdamState opt(params, AdamConfig{cfg.lr});
  PlateauState plateau = plateau_init(cfg);
  BestTracker best;
  TrainResult result;

  // fixed, unshuffled val batches
  const std::vector<TensorBatch> val_batches =
      batch_iter(ds.val, cfg.batch_size, 0, model_cfg.input_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochTimer timer;
    double train_loss_sum = 0.0;
    int64_t train_count = 0;

    abort_on_divergence(epoch, [&] {
      const auto batches = batch_iter(ds.train, cfg.batch_size,
                                      mix_seed(cfg.seed, kSeedTagShuffle, epoch),
                                      model_cfg.input_size);
      for (const TensorBatch& batch : batches) {
        Tape tape;
        Tensor loss = softmax_cross_entropy(&tape, model.forward(&tape, batch.images),
                                            batch.labels);
        for (Tensor& p : params) {
          p.grad_buffer();
          p.zero_grad();
        }
        tape.backward(loss);
        opt.config().lr = plateau.lr;
        adam_step(params, opt);
        for (Tensor& p : params) snap_to_float(p);
        train_loss_sum += loss.value() * batch.labels.size();
        train_count += batch.labels.size();
      }
    });

    double val_loss_sum = 0.0;
    int64_t val_count = 0;
    abort_on_divergence(epoch, [&] {
      for (const TensorBatch& batch : val_batches) {
        Tensor loss =
            softmax_cross_entropy(nullptr, model.forward(nullptr, batch.images), batch.labels);
        val_loss_sum += loss.value() * batch.labels.size();
        val_count += batch.labels.size();
      }
    });

    EpochLogRow row;
    row.epoch = epoch;
    row.train_loss = train_loss_sum / static_cast<double>(train_count);
    row.val_loss = val_loss_sum / static_cast<double>(val_count);
    row.val_lr_term = 0.0;
    row.val_lc_term = row.val_loss;
    row.lr = plateau.lr;

    best.offer(row.val_loss, epoch, params);
    plateau = plateau_update(plateau, row.val_loss, cfg);

    row.seconds = timer.seconds();
    result.log.push_back(row);
  }

  best.restore(params);
  result.checkpoint = model.to_checkpoint(best.best_epoch, best.best_val);
  return result;
}

TrainResult train_autoencoder(const LabeledDataset& ds,
                              const Checkpoint& classifier_checkpoint,
                              const AutoencoderConfig& model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  model_cfg.validate();
  require_splits(ds);

  Classifier classifier = Classifier::from_checkpoint(classifier_checkpoint);
  classifier.freeze();
  if (classifier.config().input_size != model_cfg.input_size)
    throw std::invalid_argument("classifier/autoencoder input size mismatch: " +
                                std::to_string(classifier.config().input_size) + " vs " +
                                std::to_string(model_cfg.input_size));

  Autoencoder model(model_cfg, cfg.seed);
  std::vector<Tensor> params = model.parameters();
  AdamState opt(params, AdamConfig{cfg.lr});
  PlateauState plateau = plateau_init(cfg);
  BestTracker best;
  TrainResult result;

  const std::vector<TensorBatch> val_batches =
      batch_iter(ds.val, cfg.batch_size, 0, model_cfg.input_size);
  // Validation corruption is fixed across epochs (per-sample seeds without an
  // epoch component) so the early-stopping comparison is apples to apples.
  std::vector<Tensor> val_noisy;
  val_noisy.reserve(val_batches.size());
  for (const TensorBatch& b : val_batches)
    val_noisy.push_back(corrupt_batch(b.images, b.indices, cfg.sigma, cfg.seed, kSeedTagVal));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochTimer timer;
    double train_loss_sum = 0.0;
    int64_t train_count = 0;

    abort_on_divergence(epoch, [&] {
      const auto batches = batch_iter(ds.train, cfg.batch_size,
                                      mix_seed(cfg.seed, kSeedTagShuffle, epoch),
                                      model_cfg.input_size);
      for (const TensorBatch& batch : batches) {
        Tensor noisy = corrupt_batch(batch.images, batch.indices, cfg.sigma, cfg.seed,
                                     static_cast<uint64_t>(epoch));
        Tape tape;
        Tensor xhat = model.forward(&tape, noisy);
        Tensor loss = combined_loss(&tape, batch.images, xhat, batch.labels, classifier,
                                    cfg.alpha);
        for (Tensor& p : params) {
          p.grad_buffer();
          p.zero_grad();
        }
        tape.backward(loss);
        opt.config().lr = plateau.lr;
        adam_step(params, opt);
        for (Tensor& p : params) snap_to_float(p);
        train_loss_sum += loss.value() * batch.labels.size();
        train_count += batch.labels.size();
      }
    });

    double val_lr_sum = 0.0, val_lc_sum = 0.0;
    int64_t val_count = 0;
    abort_on_divergence(epoch, [&] {
      for (size_t i = 0; i < val_batches.size(); ++i) {
        const TensorBatch& batch = val_batches[i];
        Tensor xhat = model.forward(nullptr, val_noisy[i]);
        const double l_r = mse(nullptr, batch.images, xhat).value();
        const double l_c =
            softmax_cross_entropy(nullptr, classifier.forward(nullptr, xhat), batch.labels)
                .value();
        val_lr_sum += l_r * batch.labels.size();
        val_lc_sum += l_c * batch.labels.size();
        val_count += batch.labels.size();
      }
    });

    EpochLogRow row;
    row.epoch = epoch;
    row.train_loss = train_loss_sum / static_cast<double>(train_count);
    row.val_lr_term = val_lr_sum / static_cast<double>(val_count);
    row.val_lc_term = val_lc_sum / static_cast<double>(val_count);
    row.val_loss = row.val_lr_term + cfg.alpha * row.val_lc_term;
    row.lr = plateau.lr;

    best.offer(row.val_loss, epoch, params);
    plateau = plateau_update(plateau, row.val_loss, cfg);

    row.seconds = timer.seconds();
    result.log.push_back(row);
  }

  best.restore(params);
  result.checkpoint = model.to_checkpoint(best.best_epoch, best.best_val);
  return result;
}

}  // namespace octdn
