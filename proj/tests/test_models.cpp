#include <doctest.h>

#include <cmath>
#include <fstream>

#include "octdn/models.hpp"
#include "support.hpp"

using namespace octdn;

namespace {

ClassifierConfig tiny_classifier_cfg() {
  ClassifierConfig cfg;
  cfg.input_size = 8;
  cfg.base_channels = 4;
  cfg.blocks_per_stage = 1;
  cfg.n_stages = 2;
  return cfg;
}

AutoencoderConfig tiny_ae_cfg() {
  AutoencoderConfig cfg;
  cfg.input_size = 8;
  cfg.widths = {4, 6};
  return cfg;
}

Tensor rand_batch(int n, int s, uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, 1, s, s});
  for (double& v : t.values()) v = rng.next_unit();
  return t;
}

}  // namespace

TEST_CASE("classifier forward: shape, finiteness, determinism") {
  ClassifierConfig cfg;  // default 32x32
  Classifier model(cfg, 42);

  Tensor x({1, 1, 32, 32});
  Tensor logits = model.forward(nullptr, x);
  REQUIRE(logits.shape() == std::vector<int>{1, 4});
  for (double v : logits.values()) CHECK(std::isfinite(v));

  Classifier twin(cfg, 42);
  const auto& a = model.named_parameters();
  const auto& b = twin.named_parameters();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.values() == b[i].second.values());
  }

  Classifier other(cfg, 43);
  CHECK(other.named_parameters()[0].second.values() != a[0].second.values());

  CHECK_THROWS_AS(model.forward(nullptr, Tensor({1, 1, 16, 16})), std::invalid_argument);
}

TEST_CASE("classifier config validation") {
  ClassifierConfig cfg;
  cfg.input_size = 30;  // not divisible by 2^3
  CHECK_THROWS_AS(Classifier(cfg, 1), std::invalid_argument);
  cfg = ClassifierConfig{};
  cfg.n_classes = 3;
  CHECK_THROWS_AS(Classifier(cfg, 1), std::invalid_argument);
}

TEST_CASE("full classifier gradient check at 8x8") {
  Classifier model(tiny_classifier_cfg(), 7);
  Tensor x = rand_batch(2, 8, 71);
  const std::vector<int> labels = {1, 3};
  auto loss = [&](Tape* t) {
    return softmax_cross_entropy(t, model.forward(t, x), labels);
  };
  CHECK(testsup::fd_max_rel_error(model.parameters(), loss) < 1e-3);
}

TEST_CASE("residual blocks roughly preserve scale at init") {
  // out = relu(conv(relu(conv(x))) + x) with He-initialized 3x3 kernels on
  // unit-gaussian input: output std within a factor of 4 of the input std.
  const int c = 8, s = 16;
  Rng rng(12);
  const double he = std::sqrt(2.0 / (c * 9));
  Tensor w1 = Tensor::randn({c, c, 3, 3}, rng, he);
  Tensor w2 = Tensor::randn({c, c, 3, 3}, rng, he);
  Tensor b1({c}), b2({c});
  Tensor x = Tensor::randn({2, c, s, s}, rng, 1.0);

  Tensor y = relu(nullptr, conv2d(nullptr, x, w1, b1, 1, 1));
  y = conv2d(nullptr, y, w2, b2, 1, 1);
  y = relu(nullptr, add(nullptr, y, x));

  auto stddev = [](const Tensor& t) {
    double mean = 0.0;
    for (double v : t.values()) mean += v;
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t.values()) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(t.size()));
  };
  const double ratio = stddev(y) / stddev(x);
  CHECK(ratio < 4.0);
  CHECK(ratio > 0.25);
}

TEST_CASE("autoencoder forward: shape and range") {
  AutoencoderConfig cfg;  // default 32x32, widths {8,16,32}
  Autoencoder model(cfg, 5);
  Tensor x({1, 1, 32, 32});
  Tensor out = model.forward(nullptr, x);
  REQUIRE(out.shape() == x.shape());
  for (double v : out.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  // strict compression for the default config
  CHECK(cfg.latent_dim() < 32 * 32);
}

TEST_CASE("autoencoder config validation") {
  AutoencoderConfig cfg;
  cfg.widths = {8, 16, 64};  // latent 4*4*64 = 1024 == input dim, not a bottleneck
  CHECK_THROWS_AS(Autoencoder(cfg, 1), std::invalid_argument);
  cfg = AutoencoderConfig{};
  cfg.input_size = 20;  // not divisible by 8
  CHECK_THROWS_AS(Autoencoder(cfg, 1), std::invalid_argument);
}

TEST_CASE("encode/decode composition equals forward bit-for-bit") {
  Autoencoder model(tiny_ae_cfg(), 9);
  Tensor x = rand_batch(2, 8, 91);

  Tensor z = model.encode(nullptr, x);
  CHECK(z.shape() == std::vector<int>{2, 6, 2, 2});
  Tensor via_stages = model.decode(nullptr, z);
  Tensor direct = model.forward(nullptr, x);
  CHECK(via_stages.values() == direct.values());

  // distinct inputs produce distinct latents
  Tensor x2 = rand_batch(2, 8, 92);
  Tensor z2 = model.encode(nullptr, x2);
  CHECK(z.values() != z2.values());

  CHECK_THROWS_AS(model.decode(nullptr, Tensor({2, 6, 4, 4})), std::invalid_argument);
}

TEST_CASE("full autoencoder gradient check at 8x8") {
  Autoencoder model(tiny_ae_cfg(), 13);
  Tensor x = rand_batch(1, 8, 131);
  Tensor target = rand_batch(1, 8, 132);
  auto loss = [&](Tape* t) { return mse(t, model.forward(t, x), target); };
  CHECK(testsup::fd_max_rel_error(model.parameters(), loss) < 1e-3);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  testsup::TempDir tmp("ckpt");
  Classifier model(tiny_classifier_cfg(), 21);
  Checkpoint ck = model.to_checkpoint(17, 0.123456789012345);
  save_checkpoint(ck, tmp.file("c.ckpt"));
  Checkpoint back = load_checkpoint(tmp.file("c.ckpt"));

  CHECK(back.kind == ModelKind::Classifier);
  CHECK(back.epoch == 17);
  CHECK(back.best_val_loss == 0.123456789012345);
  REQUIRE(back.params.size() == ck.params.size());
  for (size_t i = 0; i < ck.params.size(); ++i) {
    CHECK(back.params[i].first == ck.params[i].first);
    CHECK(back.params[i].second.values() == ck.params[i].second.values());
  }

  Classifier restored = Classifier::from_checkpoint(back);
  const auto& a = model.named_parameters();
  const auto& b = restored.named_parameters();
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second.values() == b[i].second.values());

  // a second save produces identical bytes
  save_checkpoint(back, tmp.file("c2.ckpt"));
  std::ifstream f1(tmp.file("c.ckpt"), std::ios::binary);
  std::ifstream f2(tmp.file("c2.ckpt"), std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(f1), {}) ==
        std::string(std::istreambuf_iterator<char>(f2), {}));
}

TEST_CASE("autoencoder checkpoint round trip") {
  testsup::TempDir tmp("ckpt_ae");
  Autoencoder model(tiny_ae_cfg(), 33);
  save_checkpoint(model.to_checkpoint(), tmp.file("ae.ckpt"));
  Autoencoder back = Autoencoder::from_checkpoint(load_checkpoint(tmp.file("ae.ckpt")));
  CHECK(back.config().widths == model.config().widths);
  const auto& a = model.named_parameters();
  const auto& b = back.named_parameters();
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second.values() == b[i].second.values());
}

TEST_CASE("checkpoint error paths") {
  testsup::TempDir tmp("ckpt_err");
  Classifier clf(tiny_classifier_cfg(), 1);
  save_checkpoint(clf.to_checkpoint(), tmp.file("c.ckpt"));

  // kind tag mismatch
  Checkpoint ck = load_checkpoint(tmp.file("c.ckpt"));
  CHECK_THROWS_AS(Autoencoder::from_checkpoint(ck), std::invalid_argument);

  // truncation at several byte lengths -> error, not a garbage model
  std::ifstream in(tmp.file("c.ckpt"), std::ios::binary);
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  for (size_t keep : {3ul, 10ul, 40ul, bytes.size() / 2, bytes.size() - 5}) {
    std::ofstream out(tmp.file("trunc.ckpt"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(keep));
    out.close();
    CHECK_THROWS(load_checkpoint(tmp.file("trunc.ckpt")));
  }

  // wrong magic
  {
    std::ofstream out(tmp.file("bad.ckpt"), std::ios::binary);
    out << "NOPE" << bytes.substr(4);
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.file("bad.ckpt")), IoError);

  // unknown version
  {
    std::string mutated = bytes;
    mutated[4] = 9;  // version low byte
    std::ofstream out(tmp.file("ver.ckpt"), std::ios::binary);
    out.write(mutated.data(), static_cast<std::streamsize>(mutated.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.file("ver.ckpt")), IoError);

  CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.ckpt")), IoError);
}

TEST_CASE("snap_to_float makes values exactly float-representable") {
  Tensor t({3}, {0.1, 1.0 / 3.0, 2.5});
  snap_to_float(t);
  for (double v : t.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  CHECK(t.values()[2] == 2.5);
}
