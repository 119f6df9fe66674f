#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "addm/diffusion.hpp"
#include "addm/error.hpp"
#include "addm/phantoms.hpp"
#include "addm/training.hpp"

using namespace addm;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.T = 20;
  cfg.lambda = 0.05;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.base_lr = 1e-3;
  cfg.seed = 123;
  cfg.denoiser.image_size = 8;
  cfg.denoiser.base_width = 4;
  cfg.denoiser.depth = 1;
  cfg.denoiser.time_embed_dim = 8;
  cfg.discriminator.image_size = 8;
  cfg.discriminator.base_width = 4;
  cfg.discriminator.n_layers = 2;
  cfg.discriminator.time_embed_dim = 8;
  return cfg;
}

Tensor phantom_batch(const PhantomSpec& spec, int n, int first_index = 0) {
  Tensor batch({n, 1, spec.size, spec.size});
  for (int i = 0; i < n; ++i) {
    Tensor img = generate_normal(spec, first_index + i);
    std::copy(img.data(), img.data() + img.numel(), batch.data() + i * img.numel());
  }
  return batch;
}

PhantomSpec tiny_phantoms() {
  PhantomSpec spec;
  spec.size = 8;
  spec.lesion_radius_min = 0.17;
  spec.lesion_radius_max = 0.20;
  spec.seed = 5;
  return spec;
}

bool params_equal(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a.tensors[i].same_shape(b.tensors[i])) return false;
    for (int64_t j = 0; j < a.tensors[i].numel(); ++j)
      if (a.tensors[i][j] != b.tensors[i][j]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("lr schedule values") {
  CHECK(lr_at_epoch(1e-4, 0, 0.999, 200) == 1e-4);
  CHECK(lr_at_epoch(1e-4, 199, 0.999, 200) == 1e-4);
  CHECK(lr_at_epoch(1e-4, 200, 0.999, 200) == doctest::Approx(9.99e-5).epsilon(1e-12));
  CHECK(lr_at_epoch(1e-4, 400, 0.999, 200) == doctest::Approx(9.98001e-5).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at_epoch(1e-4, 10, 0.999, 0), ValidationError);
}

TEST_CASE("loss stream is reproducible bit for bit") {
  TrainConfig cfg = tiny_config();
  PhantomSpec spec = tiny_phantoms();
  Tensor batch = phantom_batch(spec, 4);

  TrainState s1 = init_train_state(cfg);
  TrainState s2 = init_train_state(cfg);
  for (int step = 0; step < 8; ++step) {
    double tm1 = 0.0, tm2 = 0.0;
    LossBreakdown b1 = train_step(s1, batch, cfg, {}, &tm1);
    LossBreakdown b2 = train_step(s2, batch, cfg, {}, &tm2);
    CHECK(b1.l_ddpm == b2.l_ddpm);
    CHECK(b1.l_adv_gen == b2.l_adv_gen);
    CHECK(b1.l_disc == b2.l_disc);
    CHECK(b1.l_total == b2.l_total);
    CHECK(tm1 == tm2);
  }
  CHECK(params_equal(s1.denoiser.params, s2.denoiser.params));
  CHECK(params_equal(s1.discriminator.params, s2.discriminator.params));
}

TEST_CASE("lambda scaling ties the breakdown together") {
  TrainConfig cfg = tiny_config();
  Tensor batch = phantom_batch(tiny_phantoms(), 4);
  TrainState state = init_train_state(cfg);
  for (int step = 0; step < 4; ++step) {
    LossBreakdown bd = train_step(state, batch, cfg);
    CHECK(bd.lambda == cfg.lambda);
    CHECK(bd.l_total == doctest::Approx(bd.l_ddpm + cfg.lambda * bd.l_adv_gen).epsilon(1e-12));
    CHECK(std::isfinite(bd.l_disc));
  }
}

TEST_CASE("lambda = 0 matches the pure noise-prediction loop bit for bit") {
  TrainConfig cfg = tiny_config();
  cfg.lambda = 0.0;
  Tensor batch = phantom_batch(tiny_phantoms(), 4);

  TrainState full = init_train_state(cfg);    // discriminator still trains
  TrainState pure = init_train_state(cfg);    // discriminator update skipped
  TrainStepOptions pure_opts;
  pure_opts.update_discriminator = false;

  const ParamSet disc_init = pure.discriminator.params;
  for (int step = 0; step < 10; ++step) {
    LossBreakdown bf = train_step(full, batch, cfg);
    LossBreakdown bp = train_step(pure, batch, cfg, pure_opts);
    CHECK(bf.l_ddpm == bp.l_ddpm);
    CHECK(bf.l_adv_gen == 0.0);
    CHECK(bp.l_disc == 0.0);
  }
  CHECK(params_equal(full.denoiser.params, pure.denoiser.params));
  // the full loop's discriminator moved; the pure loop's did not
  CHECK(params_equal(pure.discriminator.params, disc_init));
  CHECK_FALSE(params_equal(full.discriminator.params, disc_init));
}

TEST_CASE("generator update leaves the discriminator untouched") {
  TrainConfig cfg = tiny_config();
  Tensor batch = phantom_batch(tiny_phantoms(), 4);
  TrainState state = init_train_state(cfg);
  TrainStepOptions opts;
  opts.update_discriminator = false;  // isolate the generator phase
  const ParamSet disc_before = state.discriminator.params;
  const ParamSet den_before = state.denoiser.params;
  train_step(state, batch, cfg, opts);
  CHECK(params_equal(state.discriminator.params, disc_before));
  CHECK_FALSE(params_equal(state.denoiser.params, den_before));
}

TEST_CASE("non-finite parameters abort with the offending term named") {
  TrainConfig cfg = tiny_config();
  Tensor batch = phantom_batch(tiny_phantoms(), 4);
  TrainState state = init_train_state(cfg);
  state.denoiser.params.tensors[0][0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_step(state, batch, cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("l_d") != std::string::npos);  // l_ddpm or l_disc
  }
}

TEST_CASE("batch validation") {
  TrainConfig cfg = tiny_config();
  TrainState state = init_train_state(cfg);
  Tensor wrong_size({2, 1, 16, 16});
  CHECK_THROWS_AS(train_step(state, wrong_size, cfg), ValidationError);
  Tensor out_of_range = Tensor::full({2, 1, 8, 8}, 3.0f);
  CHECK_THROWS_AS(train_step(state, out_of_range, cfg), ValidationError);
}

TEST_CASE("short training run reduces the noise-prediction loss") {
  TrainConfig cfg = tiny_config();
  cfg.T = 50;
  cfg.batch_size = 8;
  cfg.base_lr = 1e-3;
  Tensor batch = phantom_batch(tiny_phantoms(), 8);
  TrainState state = init_train_state(cfg);

  double first = 0.0, last = 0.0;
  const int steps = 80;
  for (int step = 0; step < steps; ++step) {
    LossBreakdown bd = train_step(state, batch, cfg);
    if (step < 10) first += bd.l_ddpm / 10.0;
    if (step >= steps - 10) last += bd.l_ddpm / 10.0;
  }
  CHECK(last < first);
}

TEST_CASE("train refuses protocol violations") {
  TrainConfig cfg = tiny_config();
  DatasetManifest manifest;
  manifest.records.push_back({"a", "train/a.adtf", "", "normal", 1});
  manifest.records.push_back({"b", "test/b.adtf", "test/b_mask.adtf", "anomalous", 2});
  CHECK_THROWS_AS(train(cfg, manifest, ".", std::filesystem::temp_directory_path() / "addm_t"),
                  ValidationError);

  TrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("epoch loop applies decay and runs every batch") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 3;
  cfg.batch_size = 3;
  cfg.lr_decay_every = 1;
  cfg.lr_decay_factor = 0.5;
  PhantomSpec spec = tiny_phantoms();
  std::vector<Tensor> images;
  for (int i = 0; i < 7; ++i) images.push_back(generate_normal(spec, i));

  TrainState state = init_train_state(cfg);
  std::vector<StepLogEntry> log;
  run_training(state, images, cfg, [&](const StepLogEntry& e) { log.push_back(e); });
  // ceil(7/3) = 3 batches per epoch, 3 epochs
  CHECK(log.size() == 9);
  CHECK(log.front().lr == doctest::Approx(1e-3));
  CHECK(log.back().lr == doctest::Approx(0.25e-3));
  CHECK(state.epoch == 3);
}

TEST_CASE("samples from a briefly trained model move toward the data statistics") {
  TrainConfig cfg = tiny_config();
  cfg.T = 20;
  cfg.batch_size = 8;
  cfg.base_lr = 2e-3;
  PhantomSpec spec = tiny_phantoms();
  std::vector<Tensor> images;
  for (int i = 0; i < 16; ++i) images.push_back(generate_normal(spec, i));

  double data_mean = 0.0;
  int64_t count = 0;
  for (const Tensor& img : images) {
    for (int64_t i = 0; i < img.numel(); ++i) data_mean += img[i];
    count += img.numel();
  }
  data_mean /= static_cast<double>(count);

  cfg.epochs = 120;  // 2 batches per epoch
  TrainState state = init_train_state(cfg);
  run_training(state, images, cfg);

  Tensor samples = sample(state.denoiser, state.schedule, cfg.sigma_mode, {8, 1, 8, 8}, 314);
  double sample_mean = 0.0;
  for (int64_t i = 0; i < samples.numel(); ++i) sample_mean += samples[i];
  sample_mean /= static_cast<double>(samples.numel());

  // x_T is standard normal with mean 0; the trained chain must land closer
  // to the data mean than that
  CHECK(std::fabs(sample_mean - data_mean) < std::fabs(0.0 - data_mean));
}

}  // TEST_SUITE
