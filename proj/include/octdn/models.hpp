#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "octdn/tensor.hpp"

namespace octdn {

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

// Residual CNN classifier:
//   stem 3x3 conv -> per stage: stride-2 3x3 transition conv then
//   blocks_per_stage residual blocks (out = relu(conv(relu(conv(x))) + x))
//   -> global average pool -> affine to n_classes logits.
// Channel width doubles per stage starting at base_channels.
struct ClassifierConfig {
  int input_size = 32;
  int base_channels = 8;
  int blocks_per_stage = 2;
  int n_stages = 3;
  int n_classes = 4;

  void validate() const;
};

// Convolutional encoder-decoder:
//   encoder: per stage a stride-2 3x3 conv (+relu) with the given widths;
//   decoder mirrors with stride-2 4x4 transposed convs and a final sigmoid,
//   so the output shape equals the input shape and values stay in (0,1).
// The latent block is widths.back() x (input_size/2^stages)^2 and must be
// strictly smaller than the input (a true bottleneck, no skip connections).
struct AutoencoderConfig {
  int input_size = 32;
  std::vector<int> widths = {8, 16, 32};

  int n_stages() const { return static_cast<int>(widths.size()); }
  int latent_spatial() const { return input_size >> n_stages(); }
  int latent_dim() const { return widths.back() * latent_spatial() * latent_spatial(); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Checkpoint container + binary format
// ---------------------------------------------------------------------------

enum class ModelKind : uint8_t { Classifier = 1, Autoencoder = 2 };

// Serialized layout (all little-endian):
//   "OCTD" | u16 version | u8 kind | u32 len + key=value config block |
//   u32 n_params | per param: u16 name len, name, u8 rank, u32 extents,
//   f32 values.
// Parameters are stored as 32-bit floats; the training loop keeps parameters
// on the float grid so save/load is bit-exact at any point. Training
// metadata (epoch, best validation loss) travels inside the config block
// under meta.* keys.
struct Checkpoint {
  static constexpr uint16_t kVersion = 1;

  ModelKind kind = ModelKind::Classifier;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> params;
  int epoch = 0;
  double best_val_loss = 0.0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

class Classifier {
 public:
  // Deterministic He-style initialization from the seed; every initial value
  // is rounded to float precision so a fresh checkpoint round-trips bit-exactly.
  Classifier(const ClassifierConfig& cfg, uint64_t seed);
  static Classifier from_checkpoint(const Checkpoint& ck);  // rejects wrong kind
  Checkpoint to_checkpoint(int epoch = 0, double best_val_loss = 0.0) const;

  // logits [N, n_classes]
  Tensor forward(Tape* tape, const Tensor& x) const;
  // argmax class per batch item, pure inference
  std::vector<int> predict(const Tensor& x) const;

  std::vector<Tensor> parameters() const;
  const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
    return params_;
  }
  const ClassifierConfig& config() const { return cfg_; }

  void freeze();
  bool frozen() const { return frozen_; }

 private:
  Classifier() = default;
  ClassifierConfig cfg_;
  std::vector<std::pair<std::string, Tensor>> params_;
  bool frozen_ = false;
};

class Autoencoder {
 public:
  Autoencoder(const AutoencoderConfig& cfg, uint64_t seed);
  static Autoencoder from_checkpoint(const Checkpoint& ck);
  Checkpoint to_checkpoint(int epoch = 0, double best_val_loss = 0.0) const;

  Tensor encode(Tape* tape, const Tensor& x) const;  // latent z
  Tensor decode(Tape* tape, const Tensor& z) const;  // reconstruction in (0,1)
  // decode(encode(x)); identical to calling the two stages by hand.
  Tensor forward(Tape* tape, const Tensor& x) const;

  std::vector<Tensor> parameters() const;
  const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
    return params_;
  }
  const AutoencoderConfig& config() const { return cfg_; }

 private:
  Autoencoder() = default;
  AutoencoderConfig cfg_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

// Rounds every element to the nearest 32-bit float. The training loop applies
// this after each optimizer step to keep parameters exactly representable in
// the checkpoint format.
void snap_to_float(Tensor& t);

}  // namespace octdn
