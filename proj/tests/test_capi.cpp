#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>

#include "octdenoise.h"
#include "support.hpp"

namespace {

struct ImageGuard {
  octdn_image* p = nullptr;
  ~ImageGuard() { octdn_image_destroy(p); }
};
struct DatasetGuard {
  octdn_dataset* p = nullptr;
  ~DatasetGuard() { octdn_dataset_destroy(p); }
};
struct ModelGuard {
  octdn_model* p = nullptr;
  ~ModelGuard() { octdn_model_destroy(p); }
};

}  // namespace

TEST_CASE("c api: version and error text") {
  CHECK(std::string(octdn_version()).find("octdenoise") != std::string::npos);
  CHECK(octdn_last_error() != nullptr);
}

TEST_CASE("c api: image lifecycle, corruption, psnr") {
  std::vector<double> px(16 * 16, 0.5);
  ImageGuard img;
  REQUIRE(octdn_image_create(16, 16, px.data(), &img.p) == OCTDN_OK);
  CHECK(octdn_image_height(img.p) == 16);
  CHECK(octdn_image_width(img.p) == 16);
  CHECK(octdn_image_pixels(img.p)[0] == 0.5);

  ImageGuard noisy;
  REQUIRE(octdn_image_corrupt(img.p, 0.1, 7, &noisy.p) == OCTDN_OK);
  double db = 0.0;
  REQUIRE(octdn_image_psnr(img.p, noisy.p, &db) == OCTDN_OK);
  CHECK(db > 15.0);
  CHECK(db < 25.0);

  // deterministic corruption
  ImageGuard noisy2;
  REQUIRE(octdn_image_corrupt(img.p, 0.1, 7, &noisy2.p) == OCTDN_OK);
  CHECK(std::memcmp(octdn_image_pixels(noisy.p), octdn_image_pixels(noisy2.p),
                    sizeof(double) * 256) == 0);

  ImageGuard small;
  REQUIRE(octdn_image_resize(img.p, 8, &small.p) == OCTDN_OK);
  CHECK(octdn_image_height(small.p) == 8);

  // save / load round trip
  testsup::TempDir tmp("capi_img");
  REQUIRE(octdn_image_save(img.p, tmp.file("x.png").c_str()) == OCTDN_OK);
  ImageGuard back;
  REQUIRE(octdn_image_load(tmp.file("x.png").c_str(), &back.p) == OCTDN_OK);
  CHECK(octdn_image_height(back.p) == 16);

  // error surfaces with a message
  ImageGuard bogus;
  CHECK(octdn_image_load("/nonexistent/file.png", &bogus.p) == OCTDN_ERR_IO);
  CHECK(std::string(octdn_last_error()).find("nonexistent") != std::string::npos);
  CHECK(octdn_image_corrupt(nullptr, 0.1, 1, &noisy2.p) == OCTDN_ERR_INVALID_ARGUMENT);
  CHECK(octdn_image_corrupt(img.p, -1.0, 1, &noisy2.p) == OCTDN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("c api: dataset synthesize/write/ingest") {
  DatasetGuard ds;
  REQUIRE(octdn_dataset_synthesize(10, 16, 3, &ds.p) == OCTDN_OK);
  CHECK(octdn_dataset_split_size(ds.p, OCTDN_SPLIT_TRAIN) == 32);
  CHECK(octdn_dataset_split_size(ds.p, OCTDN_SPLIT_VAL) == 4);
  CHECK(octdn_dataset_split_size(ds.p, OCTDN_SPLIT_TEST) == 4);

  const octdn_image* sample = nullptr;
  int label = -1;
  REQUIRE(octdn_dataset_sample(ds.p, OCTDN_SPLIT_TEST, 0, &sample, &label) == OCTDN_OK);
  CHECK(octdn_image_height(sample) == 16);
  CHECK(label >= 0);
  CHECK(label < OCTDN_NUM_CLASSES);
  CHECK(std::string(octdn_label_name(label)).size() >= 3);

  testsup::TempDir tmp("capi_ds");
  REQUIRE(octdn_dataset_write(ds.p, tmp.str().c_str()) == OCTDN_OK);
  DatasetGuard back;
  REQUIRE(octdn_dataset_ingest(tmp.str().c_str(), 0, 0, &back.p) == OCTDN_OK);
  CHECK(octdn_dataset_split_size(back.p, OCTDN_SPLIT_TRAIN) == 32);

  DatasetGuard missing;
  CHECK(octdn_dataset_ingest(tmp.file("nope").c_str(), 0, 0, &missing.p) == OCTDN_ERR_IO);
  CHECK(octdn_dataset_sample(ds.p, OCTDN_SPLIT_TEST, 99, &sample, &label) ==
        OCTDN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("c api: train, predict, denoise, bench end to end") {
  DatasetGuard ds;
  REQUIRE(octdn_dataset_synthesize(10, 16, 5, &ds.p) == OCTDN_OK);

  octdn_train_config tcfg;
  octdn_train_config_init(&tcfg);
  CHECK(tcfg.epochs == 200);
  CHECK(tcfg.lr == 1e-4);
  CHECK(tcfg.alpha == 0.1);
  tcfg.epochs = 2;
  tcfg.batch_size = 8;
  tcfg.lr = 1e-3;
  tcfg.seed = 11;

  octdn_classifier_arch arch;
  octdn_classifier_arch_init(&arch);
  arch.input_size = 16;
  arch.base_channels = 4;
  arch.blocks_per_stage = 1;
  arch.n_stages = 2;

  testsup::TempDir tmp("capi_train");
  ModelGuard clf;
  REQUIRE(octdn_train_classifier(ds.p, &arch, &tcfg, tmp.file("clf_log.csv").c_str(),
                                 &clf.p) == OCTDN_OK);
  CHECK(octdn_model_get_kind(clf.p) == OCTDN_MODEL_CLASSIFIER);
  CHECK(octdn_model_input_size(clf.p) == 16);
  CHECK(octdn_model_best_epoch(clf.p) >= 1);

  // checkpoint file round trip
  REQUIRE(octdn_model_save(clf.p, tmp.file("clf.ckpt").c_str()) == OCTDN_OK);
  ModelGuard loaded;
  REQUIRE(octdn_model_load(tmp.file("clf.ckpt").c_str(), &loaded.p) == OCTDN_OK);
  CHECK(octdn_model_input_size(loaded.p) == 16);

  const int widths[2] = {4, 8};
  octdn_autoencoder_arch aarch;
  octdn_autoencoder_arch_init(&aarch);
  aarch.input_size = 16;
  aarch.widths = widths;
  aarch.n_stages = 2;
  ModelGuard ae;
  REQUIRE(octdn_train_autoencoder(ds.p, clf.p, &aarch, &tcfg, nullptr, &ae.p) == OCTDN_OK);
  CHECK(octdn_model_get_kind(ae.p) == OCTDN_MODEL_AUTOENCODER);

  // single-image paths
  const octdn_image* test_img = nullptr;
  int truth = -1;
  REQUIRE(octdn_dataset_sample(ds.p, OCTDN_SPLIT_TEST, 1, &test_img, &truth) == OCTDN_OK);
  ImageGuard noisy;
  REQUIRE(octdn_image_corrupt(test_img, 0.1, octdn_bench_corrupt_seed(11, 1), &noisy.p) ==
          OCTDN_OK);

  int pred = -1;
  REQUIRE(octdn_classifier_predict(clf.p, noisy.p, &pred) == OCTDN_OK);
  CHECK(pred >= 0);
  CHECK(pred < 4);
  // wrong-kind handle rejected
  CHECK(octdn_classifier_predict(ae.p, noisy.p, &pred) == OCTDN_ERR_INVALID_ARGUMENT);

  octdn_tv_params tv;
  octdn_tv_params_init(&tv);
  ImageGuard tv_out;
  REQUIRE(octdn_denoise_tv(noisy.p, &tv, &tv_out.p) == OCTDN_OK);

  octdn_wavelet_params wv;
  octdn_wavelet_params_init(&wv);
  ImageGuard wv_out;
  REQUIRE(octdn_denoise_wavelet(noisy.p, &wv, &wv_out.p) == OCTDN_OK);

  octdn_diffusion_params ad;
  octdn_diffusion_params_init(&ad);
  ImageGuard ad_out;
  REQUIRE(octdn_denoise_ad(noisy.p, &ad, &ad_out.p) == OCTDN_OK);

  ImageGuard ae_out;
  REQUIRE(octdn_denoise_ae(ae.p, noisy.p, &ae_out.p) == OCTDN_OK);
  CHECK(octdn_image_height(ae_out.p) == 16);

  // bench over the full method set
  octdn_bench_options opts;
  octdn_bench_options_init(&opts);
  opts.seed = 11;
  octdn_bench_report* report = nullptr;
  REQUIRE(octdn_bench_run(ds.p, clf.p, ae.p, &opts, &report) == OCTDN_OK);
  CHECK(octdn_bench_report_size(report) == 5);
  octdn_bench_row row;
  REQUIRE(octdn_bench_report_row(report, 0, &row) == OCTDN_OK);
  CHECK(std::string(row.method) == "corrupted");
  CHECK(row.n == 4);

  REQUIRE(octdn_bench_report_write_csv(report, tmp.file("report.csv").c_str()) == OCTDN_OK);
  char* table = octdn_bench_report_table(report);
  REQUIRE(table != nullptr);
  CHECK(std::string(table).find("corrupted") != std::string::npos);
  octdn_string_free(table);
  octdn_bench_report_destroy(report);

  // method subset string
  octdn_bench_options sub;
  octdn_bench_options_init(&sub);
  sub.methods = "corrupted,tv";
  octdn_bench_report* report2 = nullptr;
  REQUIRE(octdn_bench_run(ds.p, clf.p, nullptr, &sub, &report2) == OCTDN_OK);
  CHECK(octdn_bench_report_size(report2) == 2);
  octdn_bench_report_destroy(report2);

  // unknown method name
  octdn_bench_options bad;
  octdn_bench_options_init(&bad);
  bad.methods = "nlm";
  octdn_bench_report* report3 = nullptr;
  CHECK(octdn_bench_run(ds.p, clf.p, nullptr, &bad, &report3) ==
        OCTDN_ERR_INVALID_ARGUMENT);
}
