#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fasc {

enum class TensorKind : std::uint8_t { activation = 0, gradient = 1 };

const char* kind_name(TensorKind k);

// One calibration dump: n samples of a d-dimensional activation or
// activation-gradient vector. Values are float32 on disk and in memory;
// all statistics upconvert to float64. Immutable after load, safe to share
// across threads.
struct TensorBlock {
  TensorKind kind = TensorKind::activation;
  std::uint32_t layer_id = 0;
  // row-major, one row per sample
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> data;

  std::int64_t n() const { return data.rows(); }
  std::int64_t d() const { return data.cols(); }
};

// Binary format (little-endian, fixed):
//   bytes 0-7   magic "FASCTEN1"
//   byte  8     kind (0 = activation, 1 = gradient)
//   bytes 9-12  layer_id (u32)
//   bytes 13-16 n (u32)
//   bytes 17-20 d (u32)
//   then n*d float32 values, row-major
void write_tensor(const TensorBlock& block, const std::filesystem::path& path);
TensorBlock read_tensor(const std::filesystem::path& path);

struct ManifestLayer {
  std::uint32_t layer_id = 0;
  std::filesystem::path activations;  // resolved to absolute on load
  std::filesystem::path gradients;
  std::uint32_t n = 0;
  std::uint32_t d = 0;
};

struct Manifest {
  int format_version = 1;
  std::string calibration_tag;
  std::vector<ManifestLayer> layers;
};

// Loads and validates: JSON shape, unique layer ids, referenced files exist,
// and each file's header agrees with the manifest's (kind, layer_id, n, d).
// Relative paths are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

// Writes layer paths relative to the manifest directory when possible.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Reads the activation/gradient pair for one layer and checks pairing
// invariants (same layer_id, same n and d, correct kinds).
std::pair<TensorBlock, TensorBlock> load_layer(const ManifestLayer& layer);

}  // namespace fasc
