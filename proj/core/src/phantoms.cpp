#include "addm/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "addm/error.hpp"
#include "addm/io.hpp"
#include "addm/rng.hpp"

namespace addm {

namespace {

constexpr uint64_t kGeometryStream = 0x67656f6dULL;  // "geom"
constexpr uint64_t kLesionStream = 0x6c65730aULL;    // "les"

// Radial bands of the skull ellipse, in units of the normalized ellipse
// radius rho (rho = 1 on the ellipse).
constexpr double kTissueEdge = 0.84;   // tissue fills rho < kTissueEdge
constexpr double kRingInner = 0.90;    // ring plateau starts here
constexpr double kRingOuter = 1.00;    // ring plateau ends at the ellipse
constexpr double kOutsideEdge = 1.04;  // background beyond this
constexpr double kBackground = -1.0;
constexpr double kRing = 0.85;
constexpr double kTissueBase = -0.15;
constexpr double kBlobCap = 0.6;  // soft saturation of summed blobs

double uniform(Pcg32& rng, double lo, double hi) { return lo + (hi - lo) * rng.next_double(); }

struct Blob {
  double cx, cy, amp, sigma;
};

struct Geometry {
  double cx, cy;  // skull center (pixel coordinates)
  double a, b;    // skull semi-axes (pixels)
  std::vector<Blob> blobs;
};

uint64_t image_seed(const PhantomSpec& spec, int index) {
  return derive_seed(spec.seed, static_cast<uint64_t>(index));
}

Geometry make_geometry(const PhantomSpec& spec, int index) {
  Pcg32 rng(image_seed(spec, index), kGeometryStream);
  Geometry g;
  const double s = spec.size;
  g.cx = (s - 1.0) / 2.0 + uniform(rng, -0.03, 0.03) * s;
  g.cy = (s - 1.0) / 2.0 + uniform(rng, -0.03, 0.03) * s;
  g.a = uniform(rng, spec.skull_radius_min, spec.skull_radius_max) * s;
  g.b = uniform(rng, spec.skull_radius_min, spec.skull_radius_max) * s;
  const int n = spec.blobs_min +
                static_cast<int>(rng.next_below(static_cast<uint32_t>(spec.blobs_max - spec.blobs_min + 1)));
  for (int i = 0; i < n; ++i) {
    Blob bl;
    const double r = std::sqrt(rng.next_double()) * 0.6;
    const double th = uniform(rng, 0.0, 2.0 * M_PI);
    bl.cx = g.cx + r * std::cos(th) * g.a;
    bl.cy = g.cy + r * std::sin(th) * g.b;
    bl.amp = uniform(rng, spec.blob_intensity_min, spec.blob_intensity_max);
    bl.sigma = uniform(rng, 0.10, 0.18) * s;
    g.blobs.push_back(bl);
  }
  return g;
}

double skull_rho(const Geometry& g, double x, double y) {
  const double dx = (x - g.cx) / g.a;
  const double dy = (y - g.cy) / g.b;
  return std::sqrt(dx * dx + dy * dy);
}

Tensor render(const PhantomSpec& spec, const Geometry& g) {
  Tensor img({1, 1, spec.size, spec.size});
  for (int y = 0; y < spec.size; ++y) {
    for (int x = 0; x < spec.size; ++x) {
      const double rho = skull_rho(g, x, y);
      double v;
      if (rho >= kOutsideEdge) {
        v = kBackground;
      } else if (rho >= kRingOuter) {
        const double w = (rho - kRingOuter) / (kOutsideEdge - kRingOuter);
        v = (1.0 - w) * kRing + w * kBackground;
      } else if (rho >= kRingInner) {
        v = kRing;
      } else {
        double bumps = 0.0;
        for (const Blob& bl : g.blobs) {
          const double dx = x - bl.cx;
          const double dy = y - bl.cy;
          bumps += bl.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * bl.sigma * bl.sigma));
        }
        const double tissue = kTissueBase + kBlobCap * std::tanh(bumps / kBlobCap);
        if (rho >= kTissueEdge) {
          const double w = (rho - kTissueEdge) / (kRingInner - kTissueEdge);
          v = (1.0 - w) * tissue + w * kRing;
        } else {
          v = tissue;
        }
      }
      img.at(0, 0, y, x) = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
  }
  return img;
}

struct Lesion {
  double cx, cy, rx, ry;
};

Lesion place_lesion(const PhantomSpec& spec, const Geometry& g, int index) {
  Pcg32 rng(image_seed(spec, index), kLesionStream);
  const double s = spec.size;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Lesion l;
    l.rx = uniform(rng, spec.lesion_radius_min, spec.lesion_radius_max) * s;
    l.ry = uniform(rng, spec.lesion_radius_min, spec.lesion_radius_max) * s;
    const double r = std::sqrt(rng.next_double());
    const double th = uniform(rng, 0.0, 2.0 * M_PI);
    l.cx = g.cx + r * std::cos(th) * g.a;
    l.cy = g.cy + r * std::sin(th) * g.b;
    bool inside = true;
    for (int k = 0; k < 16 && inside; ++k) {
      const double phi = 2.0 * M_PI * k / 16.0;
      const double px = l.cx + l.rx * std::cos(phi);
      const double py = l.cy + l.ry * std::sin(phi);
      inside = skull_rho(g, px, py) <= 0.80;
    }
    if (inside) return l;
  }
  throw ValidationError("phantoms: lesion_radius_range too large for the skull");
}

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 8) throw ValidationError("phantoms: size must be >= 8");
  auto range_ok = [](double lo, double hi) { return lo > 0.0 && lo <= hi; };
  if (!range_ok(skull_radius_min, skull_radius_max) || skull_radius_max > 0.45)
    throw ValidationError("skull_radius_range: need 0 < min <= max <= 0.45");
  if (blobs_min < 0 || blobs_min > blobs_max)
    throw ValidationError("n_internal_blobs: need 0 <= min <= max");
  if (blob_intensity_min < 0.0 || blob_intensity_min > blob_intensity_max)
    throw ValidationError("blob_intensity_range: need 0 <= min <= max");
  if (!range_ok(lesion_radius_min, lesion_radius_max))
    throw ValidationError("lesion_radius_range: need 0 < min <= max");
  if (lesion_radius_max > 0.8 * skull_radius_min)
    throw ValidationError("lesion_radius_range: lesion must fit inside the skull");
}

bool DatasetManifest::all_normal() const {
  return std::all_of(records.begin(), records.end(),
                     [](const ManifestRecord& r) { return r.label == "normal"; });
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const ManifestRecord& r : records) {
    if (!ids.insert(r.id).second) throw ValidationError("manifest: duplicate id " + r.id);
    if (r.label != "normal" && r.label != "anomalous")
      throw ValidationError("manifest: unknown label \"" + r.label + "\" for " + r.id);
    if (r.label == "anomalous" && r.mask_path.empty())
      throw ValidationError("manifest: anomalous record " + r.id + " lacks a mask");
    if (r.image_path.empty()) throw ValidationError("manifest: record " + r.id + " lacks an image path");
  }
}

Tensor generate_normal(const PhantomSpec& spec, int index) {
  spec.validate();
  return render(spec, make_geometry(spec, index));
}

std::pair<Tensor, Tensor> generate_anomalous(const PhantomSpec& spec, int index) {
  spec.validate();
  const Geometry g = make_geometry(spec, index);
  Tensor img = render(spec, g);
  Tensor mask({1, 1, spec.size, spec.size});
  const Lesion l = place_lesion(spec, g, index);
  for (int y = 0; y < spec.size; ++y) {
    for (int x = 0; x < spec.size; ++x) {
      const double dx = (x - l.cx) / l.rx;
      const double dy = (y - l.cy) / l.ry;
      if (dx * dx + dy * dy <= 1.0) {
        mask.at(0, 0, y, x) = 1.0f;
        const double v = img.at(0, 0, y, x) + spec.lesion_contrast;
        img.at(0, 0, y, x) = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
    }
  }
  return {std::move(img), std::move(mask)};
}

BuiltDataset build_dataset(const PhantomSpec& spec, int n_normal, int n_anomalous,
                           const std::filesystem::path& out_dir) {
  spec.validate();
  if (n_normal < 1 || n_anomalous < 0)
    throw ValidationError("build_dataset: need n_normal >= 1 and n_anomalous >= 0");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "train", ec);
  fs::create_directories(out_dir / "test", ec);
  fs::create_directories(out_dir / "previews", ec);
  if (ec) throw IoError("build_dataset: cannot create " + out_dir.string());

  BuiltDataset built;
  auto add_normal = [&](DatasetManifest& m, const std::string& subdir, int index) {
    Tensor img = generate_normal(spec, index);
    ManifestRecord r;
    r.id = "normal_" + zero_pad(index, 4);
    r.image_path = subdir + "/" + r.id + ".adtf";
    r.label = "normal";
    r.seed = derive_seed(spec.seed, static_cast<uint64_t>(index));
    write_adtf(out_dir / r.image_path, img);
    write_pgm_preview(out_dir / "previews" / (r.id + ".pgm"), img);
    m.records.push_back(std::move(r));
  };

  for (int i = 0; i < n_normal; ++i) add_normal(built.train, "train", i);
  for (int i = 0; i < n_anomalous; ++i) add_normal(built.test, "test", n_normal + i);
  for (int i = 0; i < n_anomalous; ++i) {
    const int index = n_normal + n_anomalous + i;
    auto [img, mask] = generate_anomalous(spec, index);
    ManifestRecord r;
    r.id = "anomalous_" + zero_pad(index, 4);
    r.image_path = "test/" + r.id + ".adtf";
    r.mask_path = "test/" + r.id + "_mask.adtf";
    r.label = "anomalous";
    r.seed = derive_seed(spec.seed, static_cast<uint64_t>(index));
    write_adtf(out_dir / r.image_path, img);
    write_adtf(out_dir / r.mask_path, mask);
    write_pgm_preview(out_dir / "previews" / (r.id + ".pgm"), img);
    built.test.records.push_back(std::move(r));
  }

  built.train.validate();
  built.test.validate();
  built.train_manifest_path = out_dir / "train_manifest.json";
  built.test_manifest_path = out_dir / "test_manifest.json";
  write_manifest(built.train_manifest_path, built.train);
  write_manifest(built.test_manifest_path, built.test);
  return built;
}

}  // namespace addm
