// addm: phantom data generation, ADDM training, sampling, anomaly detection
// and evaluation from one binary. See README.md for the workflow.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "addm/anodetect.hpp"
#include "addm/config.hpp"
#include "addm/diffusion.hpp"
#include "addm/error.hpp"
#include "addm/io.hpp"
#include "addm/metrics.hpp"
#include "addm/phantoms.hpp"
#include "addm/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr uint64_t kStreamSample = 101;
constexpr uint64_t kStreamDetect = 102;

std::optional<uint64_t> env_seed_override() {
  const char* v = std::getenv("ADDM_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw addm::ValidationError("ADDM_SEED must be a nonnegative integer");
  }
}

addm::RunConfig load_config(const std::string& path) {
  addm::RunConfig config = addm::parse_config(path);
  if (auto seed = env_seed_override()) {
    config.train.seed = *seed;
    config.phantoms.seed = *seed;
  }
  return config;
}

void echo_config(const addm::RunConfig& config, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw addm::IoError("cannot create output directory " + out_dir.string());
  std::ofstream os(out_dir / "effective_config.json");
  if (!os) throw addm::IoError("cannot write effective config in " + out_dir.string());
  os << addm::effective_config_json(config);
}

std::string tag3(int v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", v);
  return buf;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  addm::RunConfig config = load_config(config_path);
  echo_config(config, out_dir);
  addm::BuiltDataset built =
      addm::build_dataset(config.phantoms, config.n_normal, config.n_anomalous, out_dir);
  std::cout << "wrote " << built.train.records.size() << " train and "
            << built.test.records.size() << " test records under " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  addm::RunConfig config = load_config(config_path);
  echo_config(config, out_dir);
  addm::DatasetManifest manifest = addm::read_manifest(fs::path(data_dir) / "train_manifest.json");
  fs::path ckpt = addm::train(config.train, manifest, data_dir, out_dir);
  std::cout << "final checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_sample(const std::string& ckpt_path, int n, const std::string& out_dir) {
  if (n < 1) throw addm::ValidationError("--n must be >= 1");
  addm::Checkpoint ckpt = addm::read_checkpoint(ckpt_path);
  uint64_t seed = ckpt.seed;
  if (auto s = env_seed_override()) seed = *s;

  addm::NoiseSchedule schedule =
      addm::make_linear_schedule(ckpt.T, ckpt.beta_start, ckpt.beta_end);
  const int64_t s = ckpt.denoiser.config.image_size;
  addm::Tensor batch = addm::sample(ckpt.denoiser, schedule, ckpt.sigma_mode, {n, 1, s, s},
                                    addm::derive_seed(seed, kStreamSample));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw addm::IoError("cannot create output directory " + out_dir);
  for (int i = 0; i < n; ++i) {
    addm::Tensor img({1, 1, s, s});
    std::copy(batch.data() + i * s * s, batch.data() + (i + 1) * s * s, img.data());
    addm::write_adtf(fs::path(out_dir) / ("sample_" + tag3(i) + ".adtf"), img);
    addm::write_pgm_preview(fs::path(out_dir) / ("sample_" + tag3(i) + ".pgm"), img);
  }
  std::cout << "wrote " << n << " samples under " << out_dir << "\n";
  return 0;
}

int cmd_detect(const std::string& ckpt_path, const std::string& data_dir,
               const std::string& out_dir, int t_ad_flag, double quantile, int n_recon) {
  addm::Checkpoint ckpt = addm::read_checkpoint(ckpt_path);
  uint64_t seed = ckpt.seed;
  if (auto s = env_seed_override()) seed = *s;
  if (!(quantile > 0.0) || !(quantile < 1.0))
    throw addm::ValidationError("--quantile must lie in (0, 1)");
  if (n_recon < 1) throw addm::ValidationError("--n-recon must be >= 1");

  addm::NoiseSchedule schedule =
      addm::make_linear_schedule(ckpt.T, ckpt.beta_start, ckpt.beta_end);
  const int t_ad = t_ad_flag > 0 ? t_ad_flag : std::max(1, ckpt.T / 4);
  schedule.check_t(t_ad);

  addm::DatasetManifest manifest = addm::read_manifest(fs::path(data_dir) / "test_manifest.json");
  if (manifest.records.empty()) throw addm::ValidationError("detect: empty test manifest");

  // Pass 1: reconstruct every image; pool normal residuals for the threshold.
  std::vector<addm::Reconstruction> recons;
  std::vector<addm::Tensor> images;
  std::vector<float> normal_pool;
  recons.reserve(manifest.records.size());
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const addm::ManifestRecord& r = manifest.records[i];
    addm::Tensor img = addm::read_adtf(fs::path(data_dir) / r.image_path);
    addm::Reconstruction rec = addm::reconstruct_residual(
        ckpt.denoiser, schedule, ckpt.sigma_mode, img, t_ad,
        addm::derive_seed(seed, kStreamDetect + static_cast<uint64_t>(i)), n_recon);
    if (r.label == "normal")
      normal_pool.insert(normal_pool.end(), rec.residual.data(),
                         rec.residual.data() + rec.residual.numel());
    images.push_back(std::move(img));
    recons.push_back(std::move(rec));
  }
  if (normal_pool.empty())
    throw addm::ValidationError("detect: manifest has no normal images to calibrate the threshold");
  const double threshold = addm::choose_threshold(normal_pool, quantile);

  // Pass 2: thresholded masks, per-image metrics, result files.
  const fs::path results_dir = fs::path(out_dir) / "results";
  std::error_code ec;
  fs::create_directories(results_dir, ec);
  if (ec) throw addm::IoError("cannot create output directory " + results_dir.string());

  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const addm::ManifestRecord& r = manifest.records[i];
    const addm::Reconstruction& rec = recons[i];
    addm::Tensor mask(rec.residual.shape());
    for (int64_t k = 0; k < mask.numel(); ++k)
      mask[k] = rec.residual[k] > threshold ? 1.0f : 0.0f;

    json record{{"id", r.id},
                {"label", r.label},
                {"threshold_used", threshold},
                {"t_ad", t_ad},
                {"n_recon", n_recon},
                {"recon_path", "results/" + r.id + "_recon.adtf"},
                {"residual_path", "results/" + r.id + "_residual.adtf"},
                {"mask_path", "results/" + r.id + "_mask.adtf"}};
    addm::write_adtf(fs::path(out_dir) / "results" / (r.id + "_recon.adtf"), rec.reconstruction);
    addm::write_adtf(fs::path(out_dir) / "results" / (r.id + "_residual.adtf"), rec.residual);
    addm::write_adtf(fs::path(out_dir) / "results" / (r.id + "_mask.adtf"), mask);

    if (!r.mask_path.empty()) {
      addm::Tensor gt = addm::read_adtf(fs::path(data_dir) / r.mask_path);
      record["gt_mask_path"] = r.mask_path;
      record["dice"] = addm::dice(mask, gt);
      record["iou"] = addm::iou(mask, gt);
      record["precision"] = addm::precision(mask, gt);
      record["recall"] = addm::recall(mask, gt);
    }
    record["data_dir"] = fs::absolute(data_dir).string();
    std::ofstream os(results_dir / (r.id + ".json"));
    if (!os) throw addm::IoError("cannot write result record for " + r.id);
    os << record.dump(2) << "\n";
  }
  std::cout << "threshold " << threshold << "; wrote " << manifest.records.size()
            << " result records under " << results_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& results_dir, const std::string& out_path, bool macro) {
  const fs::path dir = fs::path(results_dir) / "results";
  const fs::path scan = fs::exists(dir) ? dir : fs::path(results_dir);
  if (!fs::exists(scan)) throw addm::IoError("results directory not found: " + results_dir);

  std::vector<fs::path> record_files;
  for (const auto& entry : fs::directory_iterator(scan))
    if (entry.path().extension() == ".json") record_files.push_back(entry.path());
  std::sort(record_files.begin(), record_files.end());
  if (record_files.empty()) throw addm::ValidationError("eval: no result records found");

  std::vector<addm::EvalRecord> records;
  for (const fs::path& p : record_files) {
    std::ifstream is(p);
    json rec = json::parse(is, nullptr, false);
    if (rec.is_discarded()) throw addm::IoError("corrupt result record: " + p.string());
    addm::EvalRecord er;
    const fs::path base = scan.parent_path();
    er.scores = addm::read_adtf(base / rec.at("residual_path").get<std::string>());
    er.pred_mask = addm::read_adtf(base / rec.at("mask_path").get<std::string>());
    if (rec.contains("gt_mask_path")) {
      const fs::path data_dir = rec.at("data_dir").get<std::string>();
      er.gt_mask = addm::read_adtf(data_dir / rec.at("gt_mask_path").get<std::string>());
    } else {
      er.gt_mask = addm::Tensor::zeros(er.scores.shape());
    }
    records.push_back(std::move(er));
  }

  addm::MetricsTable table = addm::evaluate_dataset(records, macro);
  json out{{"dice", table.dice},
           {"auc", table.auc},
           {"iou", table.iou},
           {"precision", table.precision},
           {"recall", table.recall}};
  std::ofstream os(out_path);
  if (!os) throw addm::IoError("cannot write " + out_path);
  os << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially trained denoising diffusion for anomaly detection"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, ckpt_path, results_dir, out_path;
  int n = 16, t_ad = 0, n_recon = 1;
  double quantile = 0.95;
  bool macro = false;

  auto* gen = app.add_subcommand("gen-data", "Generate phantom train/test sets and manifests");
  gen->add_option("--config", config_path, "JSON config file")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "Train on a normal-only manifest");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--data", data_dir, "dataset directory (gen-data output)")->required();
  train->add_option("--out", out_dir, "output directory")->required();

  auto* sample = app.add_subcommand("sample", "Draw unconditional ancestral samples");
  sample->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  sample->add_option("--n", n, "number of samples")->required();
  sample->add_option("--out", out_dir, "output directory")->required();

  auto* detect = app.add_subcommand("detect", "Reconstruct test images and write anomaly results");
  detect->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  detect->add_option("--data", data_dir, "dataset directory (gen-data output)")->required();
  detect->add_option("--out", out_dir, "output directory")->required();
  detect->add_option("--t-ad", t_ad, "partial-diffusion depth (default T/4)");
  detect->add_option("--quantile", quantile, "normal-residual quantile for the threshold");
  detect->add_option("--n-recon", n_recon, "reconstructions averaged per image");

  auto* eval = app.add_subcommand("eval", "Aggregate detection results into metrics JSON");
  eval->add_option("--results", results_dir, "detect output directory")->required();
  eval->add_option("--out", out_path, "metrics JSON path")->required();
  eval->add_flag("--macro", macro, "average per-image metrics instead of pixel pooling");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir);
    if (sample->parsed()) return cmd_sample(ckpt_path, n, out_dir);
    if (detect->parsed()) return cmd_detect(ckpt_path, data_dir, out_dir, t_ad, quantile, n_recon);
    if (eval->parsed()) return cmd_eval(results_dir, out_path, macro);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const addm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const addm::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const addm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
