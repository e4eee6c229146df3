#include "octdn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace octdn {

namespace {

constexpr std::array<const char*, kNumClasses> kNames = {"NORMAL", "DRUSEN", "DME", "CNV"};

// Class iteration order on disk (lexicographic directory names).
constexpr std::array<Label, kNumClasses> kDiskOrder = {Label::Cnv, Label::Dme,
                                                       Label::Drusen, Label::Normal};

constexpr std::array<const char*, 3> kSplitNames = {"train", "val", "test"};

}  // namespace

const char* label_name(Label l) { return kNames[static_cast<int>(l)]; }

Label label_from_name(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (name == kNames[i]) return static_cast<Label>(i);
  throw std::invalid_argument("unknown class name: " + name);
}

const std::vector<LabeledSample>& LabeledDataset::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Val: return val;
    default: return test;
  }
}

std::vector<LabeledSample>& LabeledDataset::split(Split s) {
  switch (s) {
    case Split::Train: return train;
    case Split::Val: return val;
    default: return test;
  }
}

std::array<int, kNumClasses> LabeledDataset::class_histogram(Split s) const {
  std::array<int, kNumClasses> h{};
  for (const LabeledSample& ls : split(s)) h[static_cast<int>(ls.label)] += 1;
  return h;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

namespace {

bool has_image_ext(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".png" || ext == ".pgm";
}

std::vector<LabeledSample> read_split_dir(const fs::path& split_dir) {
  // Exactly the four class directories; anything else is an error.
  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(split_dir)) {
    if (!e.is_directory()) continue;
    subdirs.push_back(e.path().filename().string());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const std::string& d : subdirs) {
    bool known = false;
    for (const char* n : kNames) known = known || d == n;
    if (!known)
      throw IoError("unknown class directory: " + (split_dir / d).string());
  }
  for (const char* n : kNames) {
    if (!fs::is_directory(split_dir / n))
      throw IoError("missing class directory: " + (split_dir / n).string());
  }

  std::vector<LabeledSample> out;
  for (Label label : kDiskOrder) {
    const fs::path cls_dir = split_dir / label_name(label);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cls_dir)) {
      if (e.is_regular_file() && has_image_ext(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      LabeledSample s;
      s.image = load_image(f.string());
      s.label = label;
      s.source_path = f.string();
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Deterministic class-interleaved order over a split: sample 0 of each class
// in disk order, then sample 1 of each class, and so on. Used for carving so
// a carved split keeps an even class mix.
std::vector<int> interleaved_order(const std::vector<LabeledSample>& samples) {
  std::array<std::vector<int>, kNumClasses> per_class;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i)
    per_class[static_cast<int>(samples[i].label)].push_back(i);
  std::vector<int> order;
  order.reserve(samples.size());
  size_t round = 0;
  for (bool any = true; any; ++round) {
    any = false;
    for (Label l : kDiskOrder) {
      const auto& lst = per_class[static_cast<int>(l)];
      if (round < lst.size()) {
        order.push_back(lst[round]);
        any = true;
      }
    }
  }
  return order;
}

}  // namespace

LabeledDataset ingest_directory(const std::string& root, const IngestOptions& opts) {
  const fs::path rootp(root);
  if (!fs::is_directory(rootp)) throw IoError("dataset root is not a directory: " + root);
  if (!fs::is_directory(rootp / "train"))
    throw IoError("missing split directory: " + (rootp / "train").string());

  LabeledDataset ds;
  ds.train = read_split_dir(rootp / "train");

  const bool have_val = fs::is_directory(rootp / "val");
  const bool have_test = fs::is_directory(rootp / "test");
  if (have_val) ds.val = read_split_dir(rootp / "val");
  if (have_test) ds.test = read_split_dir(rootp / "test");

  const int carve_val = have_val ? 0 : opts.carve_val;
  const int carve_test = have_test ? 0 : opts.carve_test;
  if (!have_val && opts.carve_val <= 0)
    throw IoError("missing split directory (and no carve configured): " +
                  (rootp / "val").string());
  if (!have_test && opts.carve_test <= 0)
    throw IoError("missing split directory (and no carve configured): " +
                  (rootp / "test").string());

  if (carve_val + carve_test > 0) {
    if (carve_val + carve_test >= static_cast<int>(ds.train.size()))
      throw std::invalid_argument("carve counts exceed train split size");
    const std::vector<int> order = interleaved_order(ds.train);
    std::vector<char> taken(ds.train.size(), 0);
    for (int i = 0; i < carve_val; ++i) {
      ds.val.push_back(ds.train[order[i]]);
      taken[order[i]] = 1;
    }
    for (int i = carve_val; i < carve_val + carve_test; ++i) {
      ds.test.push_back(ds.train[order[i]]);
      taken[order[i]] = 1;
    }
    std::vector<LabeledSample> rest;
    rest.reserve(ds.train.size() - carve_val - carve_test);
    for (size_t i = 0; i < ds.train.size(); ++i)
      if (!taken[i]) rest.push_back(std::move(ds.train[i]));
    ds.train = std::move(rest);
  }

  for (int s = 0; s < 3; ++s) {
    if (ds.split(static_cast<Split>(s)).empty())
      throw IoError(std::string("empty split: ") + kSplitNames[s]);
  }
  return ds;
}

void write_dataset(const LabeledDataset& ds, const std::string& root) {
  const fs::path rootp(root);
  std::array<std::array<int, kNumClasses>, 3> counter{};
  for (int s = 0; s < 3; ++s) {
    const auto& samples = ds.split(static_cast<Split>(s));
    for (const LabeledSample& ls : samples) {
      const fs::path dir = rootp / kSplitNames[s] / label_name(ls.label);
      fs::create_directories(dir);
      int& k = counter[s][static_cast<int>(ls.label)];
      char name[32];
      std::snprintf(name, sizeof name, "img_%05d.png", k++);
      save_png(ls.image, (dir / name).string());
    }
  }
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

namespace {

void snap_to_8bit(Image& img) {
  for (double& v : img.pixels) v = std::lround(clip01(v) * 255.0) / 255.0;
}

void add_blob(Image& img, double cy, double cx, double ry, double rx, double amp) {
  for (int y = 0; y < img.height; ++y) {
    const double dy = (y - cy) / ry;
    for (int x = 0; x < img.width; ++x) {
      const double dx = (x - cx) / rx;
      img.at(y, x) += amp * std::exp(-0.5 * (dy * dy + dx * dx));
    }
  }
}

}  // namespace

Image synthesize_class_image(Label label, int size, uint64_t seed) {
  if (size <= 0) throw std::invalid_argument("synthesize_class_image: size must be positive");
  Rng rng(seed);
  const double s = static_cast<double>(size);
  Image img(size, size, 0.2);

  // Layered horizontal bands, mildly tilted and curved.
  const int n_bands = 3 + static_cast<int>(rng.next_below(3));
  for (int b = 0; b < n_bands; ++b) {
    const double center = rng.next_uniform(0.12, 0.88) * s;
    const double thick = rng.next_uniform(0.035, 0.075) * s;
    const double amp = rng.next_uniform(0.3, 0.5);
    const double tilt = rng.next_uniform(-0.06, 0.06);
    const double curve = rng.next_uniform(-0.15, 0.15) / s;
    for (int x = 0; x < size; ++x) {
      const double dx = x - 0.5 * s;
      const double c = center + tilt * dx + curve * dx * dx;
      for (int y = 0; y < size; ++y) {
        const double d = (y - c) / thick;
        img.at(y, x) += amp * std::exp(-0.5 * d * d);
      }
    }
  }

  switch (label) {
    case Label::Normal:
      break;
    case Label::Drusen: {
      // A few small bright bumps.
      const int n = 2 + static_cast<int>(rng.next_below(3));
      for (int i = 0; i < n; ++i) {
        const double r = rng.next_uniform(0.04, 0.07) * s;
        add_blob(img, rng.next_uniform(0.2, 0.8) * s, rng.next_uniform(0.1, 0.9) * s, r, r,
                 rng.next_uniform(0.3, 0.45));
      }
      break;
    }
    case Label::Dme: {
      // Dark elliptical voids.
      const int n = 1 + static_cast<int>(rng.next_below(2));
      for (int i = 0; i < n; ++i) {
        add_blob(img, rng.next_uniform(0.25, 0.75) * s, rng.next_uniform(0.2, 0.8) * s,
                 rng.next_uniform(0.06, 0.11) * s, rng.next_uniform(0.1, 0.16) * s,
                 -rng.next_uniform(0.35, 0.5));
      }
      break;
    }
    case Label::Cnv: {
      // One large irregular bright blob: overlapping lobes around a center.
      const double cy = rng.next_uniform(0.3, 0.7) * s;
      const double cx = rng.next_uniform(0.3, 0.7) * s;
      const int n = 3 + static_cast<int>(rng.next_below(3));
      for (int i = 0; i < n; ++i) {
        add_blob(img, cy + rng.next_uniform(-0.08, 0.08) * s,
                 cx + rng.next_uniform(-0.1, 0.1) * s, rng.next_uniform(0.06, 0.1) * s,
                 rng.next_uniform(0.06, 0.12) * s, rng.next_uniform(0.2, 0.35));
      }
      break;
    }
  }

  for (double& v : img.pixels) v = std::clamp(v, 0.02, 0.92);
  snap_to_8bit(img);
  return img;
}

LabeledDataset make_synthetic(int n_per_class, int size, uint64_t seed) {
  if (n_per_class < 1)
    throw std::invalid_argument("make_synthetic: n_per_class must be >= 1");
  const int n_test = n_per_class / 10;
  const int n_val = n_per_class / 10;
  const int n_train = n_per_class - n_val - n_test;

  LabeledDataset ds;
  // Disk order per split so a write/ingest round trip preserves ordering.
  for (Label label : kDiskOrder) {
    for (int i = 0; i < n_per_class; ++i) {
      LabeledSample ls;
      ls.label = label;
      ls.image = synthesize_class_image(
          label, size, mix_seed(seed, static_cast<uint64_t>(label), static_cast<uint64_t>(i)));
      if (i < n_train) {
        ds.train.push_back(std::move(ls));
      } else if (i < n_train + n_val) {
        ds.val.push_back(std::move(ls));
      } else {
        ds.test.push_back(std::move(ls));
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

Tensor tensorize(const std::vector<LabeledSample>& split, const std::vector<int>& indices,
                 int target_size) {
  if (indices.empty()) throw std::invalid_argument("tensorize: empty index list");
  int s = target_size;
  if (s == 0) {
    const Image& first = split.at(indices[0]).image;
    if (first.height != first.width)
      throw std::invalid_argument("tensorize: non-square image requires target_size");
    s = first.height;
  }
  Tensor t({static_cast<int>(indices.size()), 1, s, s});
  double* dst = t.values().data();
  for (size_t n = 0; n < indices.size(); ++n) {
    const Image& img = split.at(indices[n]).image;
    const Image& use = (img.height == s && img.width == s) ? img : resize_to(img, s);
    std::copy(use.pixels.begin(), use.pixels.end(), dst + n * use.pixels.size());
  }
  return t;
}

Image image_from_tensor(const Tensor& t, int n) {
  if (t.shape().size() != 4 || t.shape()[1] != 1)
    throw std::invalid_argument("image_from_tensor: expected [N,1,S,S]");
  const int h = t.shape()[2], w = t.shape()[3];
  Image img(h, w);
  const double* src = t.values().data() + static_cast<size_t>(n) * h * w;
  for (size_t i = 0; i < img.size(); ++i) img.pixels[i] = clip01(src[i]);
  return img;
}

std::vector<TensorBatch> batch_iter(const std::vector<LabeledSample>& split,
                                    int batch_size, uint64_t shuffle_seed,
                                    int target_size) {
  if (split.empty()) throw std::invalid_argument("batch_iter: empty split");
  if (batch_size < 1) throw std::invalid_argument("batch_iter: batch_size must be >= 1");

  std::vector<int> order(split.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(shuffle_seed);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);

  std::vector<TensorBatch> batches;
  for (size_t at = 0; at < order.size(); at += batch_size) {
    const size_t end = std::min(order.size(), at + batch_size);
    TensorBatch b;
    b.indices.assign(order.begin() + at, order.begin() + end);
    b.labels.reserve(b.indices.size());
    for (int idx : b.indices) b.labels.push_back(static_cast<int>(split[idx].label));
    b.images = tensorize(split, b.indices, target_size);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace octdn
