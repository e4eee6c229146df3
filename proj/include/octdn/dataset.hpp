#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "octdn/image.hpp"
#include "octdn/tensor.hpp"

namespace octdn {

// The four retinal condition classes. Enum order is the reporting order;
// on disk the class directories appear in lexicographic name order
// (CNV, DME, DRUSEN, NORMAL), which is also the in-split sample order.
enum class Label : int { Normal = 0, Drusen = 1, Dme = 2, Cnv = 3 };

inline constexpr int kNumClasses = 4;
const char* label_name(Label l);
Label label_from_name(const std::string& name);  // throws on unknown name

struct LabeledSample {
  Image image;
  Label label = Label::Normal;
  std::string source_path;  // empty for in-memory samples
};

enum class Split : int { Train = 0, Val = 1, Test = 2 };

struct LabeledDataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> val;
  std::vector<LabeledSample> test;

  const std::vector<LabeledSample>& split(Split s) const;
  std::vector<LabeledSample>& split(Split s);
  std::array<int, kNumClasses> class_histogram(Split s) const;
};

struct IngestOptions {
  // When val/ or test/ is absent, carve this many samples out of train/
  // (class-interleaved, deterministic). 0 means the directory is required
  // to exist... unless the other carve is set; a wholly absent split with a
  // zero carve count is an error.
  int carve_val = 0;
  int carve_test = 0;
};

// Walks <root>/{train,val,test}/{NORMAL,DRUSEN,DME,CNV}/*.png|*.pgm.
// Ordering is deterministic: class directories and files lexicographically.
// Unknown subdirectory names inside a split are an error naming the path.
LabeledDataset ingest_directory(const std::string& root, const IngestOptions& opts = {});

// Materializes a dataset in the standard folder layout as 8-bit grayscale
// PNGs (img_00000.png, ... per class per split). Deterministic bytes.
void write_dataset(const LabeledDataset& ds, const std::string& root);

// Four visually separable layered-texture classes at size x size:
//   NORMAL: horizontal bright bands
//   DRUSEN: bands plus small localized bright bumps
//   DME:    bands with dark elliptical voids
//   CNV:    bands with one large irregular bright blob
// Geometry is randomized per sample, deterministic per seed. Split 80/10/10
// per class. Pixels are snapped to the 8-bit grid so a disk round trip
// through write_dataset/ingest_directory reproduces the dataset exactly.
LabeledDataset make_synthetic(int n_per_class, int size, uint64_t seed);

// Single synthetic sample generator (exposed for test imagery).
Image synthesize_class_image(Label label, int size, uint64_t seed);

struct TensorBatch {
  Tensor images;             // [N,1,S,S]
  std::vector<int> labels;   // length N
  std::vector<int> indices;  // positions within the source split
};

// Deterministic per-epoch batching: Fisher-Yates shuffle seeded by
// shuffle_seed, final partial batch emitted. Samples are resized to
// target_size when it differs from their native extent (0 keeps native
// size, which then must be uniform and square).
std::vector<TensorBatch> batch_iter(const std::vector<LabeledSample>& split,
                                    int batch_size, uint64_t shuffle_seed,
                                    int target_size = 0);

// [N,1,S,S] tensor from explicit sample indices, in the given order.
Tensor tensorize(const std::vector<LabeledSample>& split, const std::vector<int>& indices,
                 int target_size = 0);

// Inverse of one tensorize slot: batch item n back to an image.
Image image_from_tensor(const Tensor& t, int n);

}  // namespace octdn
