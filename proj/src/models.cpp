#include "octdn/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "octdn/image.hpp"

namespace octdn {

void snap_to_float(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

// ---------------------------------------------------------------------------
// configs
// ---------------------------------------------------------------------------

void ClassifierConfig::validate() const {
  if (input_size <= 0 || base_channels <= 0 || blocks_per_stage < 0 || n_stages <= 0)
    throw std::invalid_argument("classifier config: extents must be positive");
  if (n_classes != 4)
    throw std::invalid_argument("classifier config: n_classes is fixed at 4");
  if (input_size % (1 << n_stages) != 0)
    throw std::invalid_argument("classifier config: input_size must be divisible by 2^n_stages");
}

void AutoencoderConfig::validate() const {
  if (input_size <= 0) throw std::invalid_argument("autoencoder config: bad input_size");
  if (widths.empty()) throw std::invalid_argument("autoencoder config: widths empty");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("autoencoder config: widths must be positive");
  if (input_size % (1 << n_stages()) != 0)
    throw std::invalid_argument(
        "autoencoder config: input_size must be divisible by 2^n_stages");
  if (latent_dim() >= input_size * input_size)
    throw std::invalid_argument(
        "autoencoder config: latent dimension must be smaller than the input");
}

// ---------------------------------------------------------------------------
// init helpers
// ---------------------------------------------------------------------------

namespace {

Tensor he_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / fan_in));
  snap_to_float(t);
  t.set_requires_grad(true);
  return t;
}

Tensor zero_param(std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

Tensor find_param(const std::vector<std::pair<std::string, Tensor>>& params,
                  const std::string& name) {
  for (const auto& [n, t] : params)
    if (n == name) return t;
  throw std::invalid_argument("checkpoint missing parameter: " + name);
}

std::string config_get(const std::map<std::string, std::string>& cfg,
                       const std::string& key) {
  auto it = cfg.find(key);
  if (it == cfg.end()) throw std::invalid_argument("checkpoint config missing key: " + key);
  return it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

Classifier::Classifier(const ClassifierConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng(mix_seed(seed, kSeedTagInit));
  auto conv_param = [&](const std::string& name, int out_c, int in_c) {
    params_.emplace_back(name + ".weight", he_init({out_c, in_c, 3, 3}, in_c * 9, rng));
    params_.emplace_back(name + ".bias", zero_param({out_c}));
  };

  conv_param("stem", cfg.base_channels, 1);
  int ch = cfg.base_channels;
  for (int s = 0; s < cfg.n_stages; ++s) {
    const int out_ch = cfg.base_channels << s;
    conv_param("stage" + std::to_string(s) + ".down", out_ch, ch);
    ch = out_ch;
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string base = "stage" + std::to_string(s) + ".block" + std::to_string(b);
      conv_param(base + ".conv1", ch, ch);
      conv_param(base + ".conv2", ch, ch);
    }
  }
  params_.emplace_back("head.weight", he_init({cfg.n_classes, ch}, ch, rng));
  params_.emplace_back("head.bias", zero_param({cfg.n_classes}));
}

Tensor Classifier::forward(Tape* tape, const Tensor& x) const {
  if (x.shape().size() != 4 || x.shape()[1] != 1 || x.shape()[2] != cfg_.input_size ||
      x.shape()[3] != cfg_.input_size)
    throw std::invalid_argument("classifier forward: expected [N,1," +
                                std::to_string(cfg_.input_size) + "," +
                                std::to_string(cfg_.input_size) + "], got " +
                                shape_to_string(x.shape()));
  auto p = [&](const std::string& name) { return find_param(params_, name); };

  Tensor h = relu(tape, conv2d(tape, x, p("stem.weight"), p("stem.bias"), 1, 1));
  for (int s = 0; s < cfg_.n_stages; ++s) {
    const std::string stage = "stage" + std::to_string(s);
    h = relu(tape, conv2d(tape, h, p(stage + ".down.weight"), p(stage + ".down.bias"), 2, 1));
    for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
      const std::string blk = stage + ".block" + std::to_string(b);
      Tensor y = relu(tape, conv2d(tape, h, p(blk + ".conv1.weight"), p(blk + ".conv1.bias"), 1, 1));
      y = conv2d(tape, y, p(blk + ".conv2.weight"), p(blk + ".conv2.bias"), 1, 1);
      h = relu(tape, add(tape, y, h));
    }
  }
  Tensor pooled = global_avg_pool(tape, h);
  return affine(tape, pooled, p("head.weight"), p("head.bias"));
}

std::vector<int> Classifier::predict(const Tensor& x) const {
  Tensor logits = forward(nullptr, x);
  const int n = logits.shape()[0], k = logits.shape()[1];
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    const double* row = logits.values().data() + static_cast<size_t>(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    out[i] = best;
  }
  return out;
}

std::vector<Tensor> Classifier::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [_, t] : params_) out.push_back(t);
  return out;
}

void Classifier::freeze() {
  for (auto& [_, t] : params_) t.set_requires_grad(false);
  frozen_ = true;
}

Checkpoint Classifier::to_checkpoint(int epoch, double best_val_loss) const {
  Checkpoint ck;
  ck.kind = ModelKind::Classifier;
  ck.config["input_size"] = std::to_string(cfg_.input_size);
  ck.config["base_channels"] = std::to_string(cfg_.base_channels);
  ck.config["blocks_per_stage"] = std::to_string(cfg_.blocks_per_stage);
  ck.config["n_stages"] = std::to_string(cfg_.n_stages);
  ck.config["n_classes"] = std::to_string(cfg_.n_classes);
  ck.epoch = epoch;
  ck.best_val_loss = best_val_loss;
  for (const auto& [name, t] : params_) ck.params.emplace_back(name, t.clone_values());
  return ck;
}

Classifier Classifier::from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::Classifier)
    throw std::invalid_argument("checkpoint kind mismatch: not a classifier");
  ClassifierConfig cfg;
  cfg.input_size = std::stoi(config_get(ck.config, "input_size"));
  cfg.base_channels = std::stoi(config_get(ck.config, "base_channels"));
  cfg.blocks_per_stage = std::stoi(config_get(ck.config, "blocks_per_stage"));
  cfg.n_stages = std::stoi(config_get(ck.config, "n_stages"));
  cfg.n_classes = std::stoi(config_get(ck.config, "n_classes"));

  Classifier fresh(cfg, 0);
  for (auto& [name, t] : fresh.params_) {
    Tensor stored = find_param(ck.params, name);
    if (stored.shape() != t.shape())
      throw std::invalid_argument("checkpoint parameter shape mismatch: " + name);
    t.values() = stored.values();
  }
  if (ck.params.size() != fresh.params_.size())
    throw std::invalid_argument("checkpoint has unexpected parameter count");
  return fresh;
}

// ---------------------------------------------------------------------------
// Autoencoder
// ---------------------------------------------------------------------------

Autoencoder::Autoencoder(const AutoencoderConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng(mix_seed(seed, kSeedTagInit, 1));
  int in_c = 1;
  for (int s = 0; s < cfg.n_stages(); ++s) {
    const std::string name = "enc" + std::to_string(s);
    params_.emplace_back(name + ".weight",
                         he_init({cfg.widths[s], in_c, 3, 3}, in_c * 9, rng));
    params_.emplace_back(name + ".bias", zero_param({cfg.widths[s]}));
    in_c = cfg.widths[s];
  }
  for (int s = cfg.n_stages() - 1; s >= 0; --s) {
    const std::string name = "dec" + std::to_string(s);
    const int out_c = (s == 0) ? 1 : cfg.widths[s - 1];
    // transposed-conv kernels are [in_c, out_c, kh, kw]
    params_.emplace_back(name + ".weight",
                         he_init({cfg.widths[s], out_c, 4, 4}, cfg.widths[s] * 16, rng));
    params_.emplace_back(name + ".bias", zero_param({out_c}));
  }
}

Tensor Autoencoder::encode(Tape* tape, const Tensor& x) const {
  if (x.shape().size() != 4 || x.shape()[1] != 1 || x.shape()[2] != cfg_.input_size ||
      x.shape()[3] != cfg_.input_size)
    throw std::invalid_argument("autoencoder encode: expected [N,1," +
                                std::to_string(cfg_.input_size) + "," +
                                std::to_string(cfg_.input_size) + "], got " +
                                shape_to_string(x.shape()));
  Tensor h = x;
  for (int s = 0; s < cfg_.n_stages(); ++s) {
    const std::string name = "enc" + std::to_string(s);
    h = relu(tape, conv2d(tape, h, find_param(params_, name + ".weight"),
                          find_param(params_, name + ".bias"), 2, 1));
  }
  return h;
}

Tensor Autoencoder::decode(Tape* tape, const Tensor& z) const {
  const int ls = cfg_.latent_spatial();
  if (z.shape().size() != 4 || z.shape()[1] != cfg_.widths.back() || z.shape()[2] != ls ||
      z.shape()[3] != ls)
    throw std::invalid_argument("autoencoder decode: latent shape mismatch, got " +
                                shape_to_string(z.shape()));
  Tensor h = z;
  for (int s = cfg_.n_stages() - 1; s >= 0; --s) {
    const std::string name = "dec" + std::to_string(s);
    h = conv2d_transpose(tape, h, find_param(params_, name + ".weight"),
                         find_param(params_, name + ".bias"), 2, 1);
    h = (s == 0) ? sigmoid(tape, h) : relu(tape, h);
  }
  return h;
}

Tensor Autoencoder::forward(Tape* tape, const Tensor& x) const {
  return decode(tape, encode(tape, x));
}

std::vector<Tensor> Autoencoder::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [_, t] : params_) out.push_back(t);
  return out;
}

Checkpoint Autoencoder::to_checkpoint(int epoch, double best_val_loss) const {
  Checkpoint ck;
  ck.kind = ModelKind::Autoencoder;
  ck.config["input_size"] = std::to_string(cfg_.input_size);
  std::ostringstream ws;
  for (size_t i = 0; i < cfg_.widths.size(); ++i) {
    if (i) ws << ',';
    ws << cfg_.widths[i];
  }
  ck.config["widths"] = ws.str();
  ck.epoch = epoch;
  ck.best_val_loss = best_val_loss;
  for (const auto& [name, t] : params_) ck.params.emplace_back(name, t.clone_values());
  return ck;
}

Autoencoder Autoencoder::from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::Autoencoder)
    throw std::invalid_argument("checkpoint kind mismatch: not an autoencoder");
  AutoencoderConfig cfg;
  cfg.input_size = std::stoi(config_get(ck.config, "input_size"));
  cfg.widths.clear();
  std::istringstream ws(config_get(ck.config, "widths"));
  for (std::string tok; std::getline(ws, tok, ',');) cfg.widths.push_back(std::stoi(tok));

  Autoencoder fresh(cfg, 0);
  for (auto& [name, t] : fresh.params_) {
    Tensor stored = find_param(ck.params, name);
    if (stored.shape() != t.shape())
      throw std::invalid_argument("checkpoint parameter shape mismatch: " + name);
    t.values() = stored.values();
  }
  if (ck.params.size() != fresh.params_.size())
    throw std::invalid_argument("checkpoint has unexpected parameter count");
  return fresh;
}

// ---------------------------------------------------------------------------
// checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

void put_u16(std::ostream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float v) {
  static_assert(sizeof(float) == 4);
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw IoError("checkpoint truncated");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in) {
  const uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);

  out.write("OCTD", 4);
  put_u16(out, Checkpoint::kVersion);
  out.put(static_cast<char>(ck.kind));

  std::ostringstream cfg;
  for (const auto& [k, v] : ck.config) cfg << k << '=' << v << '\n';
  cfg << "meta.epoch=" << ck.epoch << '\n';
  cfg << "meta.best_val_loss=" << format_double(ck.best_val_loss) << '\n';
  const std::string cfg_str = cfg.str();
  put_u32(out, static_cast<uint32_t>(cfg_str.size()));
  out.write(cfg_str.data(), static_cast<std::streamsize>(cfg_str.size()));

  put_u32(out, static_cast<uint32_t>(ck.params.size()));
  for (const auto& [name, t] : ck.params) {
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(t.shape().size()));
    for (int e : t.shape()) put_u32(out, static_cast<uint32_t>(e));
    for (double v : t.values()) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("failed to write checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[4] = {0};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "OCTD", 4) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  const uint16_t version = get_u16(in);
  if (version != Checkpoint::kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

  Checkpoint ck;
  const int kind = in.get();
  if (kind != static_cast<int>(ModelKind::Classifier) &&
      kind != static_cast<int>(ModelKind::Autoencoder))
    throw IoError("unknown model kind tag in checkpoint: " + path);
  ck.kind = static_cast<ModelKind>(kind);

  const uint32_t cfg_len = get_u32(in);
  std::string cfg_str(cfg_len, '\0');
  in.read(cfg_str.data(), cfg_len);
  if (!in) throw IoError("checkpoint truncated: " + path);
  std::istringstream cfg(cfg_str);
  for (std::string line; std::getline(cfg, line);) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "meta.epoch") {
      ck.epoch = std::stoi(val);
    } else if (key == "meta.best_val_loss") {
      ck.best_val_loss = std::stod(val);
    } else {
      ck.config[key] = val;
    }
  }

  const uint32_t n_params = get_u32(in);
  for (uint32_t i = 0; i < n_params; ++i) {
    const uint16_t name_len = get_u16(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("checkpoint truncated: " + path);
    const int rank = in.get();
    if (rank < 0 || rank > 8) throw IoError("checkpoint corrupt (bad rank): " + path);
    std::vector<int> shape(rank);
    int64_t numel = 1;
    for (int r = 0; r < rank; ++r) {
      shape[r] = static_cast<int>(get_u32(in));
      if (shape[r] <= 0) throw IoError("checkpoint corrupt (bad extent): " + path);
      numel *= shape[r];
    }
    std::vector<double> values(static_cast<size_t>(numel));
    for (double& v : values) v = static_cast<double>(get_f32(in));
    for (const auto& [existing, _] : ck.params)
      if (existing == name) throw IoError("checkpoint corrupt (duplicate parameter): " + name);
    ck.params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

}  // namespace octdn
