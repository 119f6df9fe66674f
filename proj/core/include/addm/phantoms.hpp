#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "addm/tensor.hpp"

namespace addm {

/// Generation parameters for the synthetic brain-like phantoms. Radii are
/// fractions of the image size. Generation is pure in (seed, index).
struct PhantomSpec {
  int size = 16;
  double skull_radius_min = 0.30;
  double skull_radius_max = 0.36;
  int blobs_min = 2;
  int blobs_max = 4;
  double blob_intensity_min = 0.15;
  double blob_intensity_max = 0.45;
  double lesion_radius_min = 0.17;
  double lesion_radius_max = 0.23;
  double lesion_contrast = 0.6;
  uint64_t seed = 0;

  void validate() const;
};

struct ManifestRecord {
  std::string id;
  std::string image_path;  // relative to the manifest's directory
  std::string mask_path;   // empty for normal records
  std::string label;       // "normal" | "anomalous"
  uint64_t seed = 0;       // per-image generation seed
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  bool all_normal() const;
  /// Unique ids, known labels, anomalous records carry a mask path.
  void validate() const;
};

/// Normal phantom: dark background at -1, bright elliptical skull ring,
/// smooth blob texture inside. Shape (1, 1, size, size), values in [-1, 1].
Tensor generate_normal(const PhantomSpec& spec, int index);

/// Normal phantom for the same index plus one elliptical lesion offset by
/// lesion_contrast; second tensor is the exact 0/1 lesion support.
std::pair<Tensor, Tensor> generate_anomalous(const PhantomSpec& spec, int index);

struct BuiltDataset {
  DatasetManifest train;  // n_normal normal records
  DatasetManifest test;   // n_anomalous held-out normals + n_anomalous anomalous
  std::filesystem::path train_manifest_path;
  std::filesystem::path test_manifest_path;
};

/// Writes images, masks, 8-bit previews and the two manifests under out_dir.
/// Byte-identical on regeneration with the same spec.
BuiltDataset build_dataset(const PhantomSpec& spec, int n_normal, int n_anomalous,
                           const std::filesystem::path& out_dir);

}  // namespace addm
