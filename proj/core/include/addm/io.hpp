#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "addm/nets.hpp"
#include "addm/optimizer.hpp"
#include "addm/phantoms.hpp"
#include "addm/schedule.hpp"
#include "addm/tensor.hpp"

namespace addm {

/// ADTF tensor file: magic "ADTF", u32 version = 1, u8 dtype (0 = f32),
/// u8 ndim, ndim x u32 dims, row-major little-endian f32 payload.
void write_adtf(const std::filesystem::path& path, const Tensor& t);
Tensor read_adtf(const std::filesystem::path& path);

/// Full training snapshot: both networks and both optimizer states plus the
/// scalar configuration needed to rebuild the schedule and models.
struct Checkpoint {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  SigmaMode sigma_mode = SigmaMode::kBeta;
  double lambda = 0.0;
  int64_t epoch = 0;
  uint64_t seed = 0;

  DenoiserParams denoiser;
  DiscriminatorParams discriminator;
  AdamState opt_denoiser;
  AdamState opt_discriminator;
};

/// ADDM checkpoint file: magic "ADDM", u32 version = 1, u32 header length,
/// UTF-8 JSON header, u32 tensor count, then per tensor: u16 name length,
/// name, u8 ndim, ndim x u32 dims, f32 little-endian data.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Manifest: JSON array of {id, image_path, mask_path?, label, seed}.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// 8-bit binary PGM preview of the first image in a (B,1,H,W) tensor,
/// mapping [-1, 1] to 0..255.
void write_pgm_preview(const std::filesystem::path& path, const Tensor& image);

}  // namespace addm
