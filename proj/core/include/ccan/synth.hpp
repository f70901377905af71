#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ccan/manifest.hpp"
#include "ccan/tensor.hpp"

namespace ccan {

// Noise stddev up to which identities stay separable on average under an
// untrained random projection (mean intra-id distance < mean inter-id).
inline constexpr double kSynthSeparableNoise = 0.25;

struct SynthConfig {
  std::size_t ids = 16;
  std::size_t per_id = 8;  // images per identity per camera
  std::size_t cams = 2;
  std::size_t height = 64, width = 32;
  std::size_t bands = 4;    // horizontal body bands, one latent prototype each
  std::size_t palette = 3;  // prototypes per band shared by all identities
  double camera_shift = 0.3;  // per-camera channel gain spread and offset
  double noise = 0.05;      // Gaussian pixel noise stddev
  std::uint64_t seed = 0;

  void validate() const;
};

// Identities are distinct combinations of per-band palette entries, so any
// single band is shared by several identities.
std::vector<std::size_t> synth_identity_code(const SynthConfig& config, std::size_t id);

// Per (identity, camera): the first per_id / 2 images go to train; the rest go
// to query on camera 0 and to gallery on every other camera.
Split synth_split(std::size_t camera, std::size_t k, std::size_t per_id);

// Renders one sample. Values are clamped to [0, 1].
Tensor synth_render(const SynthConfig& config, std::size_t id, std::size_t camera, std::size_t k);

// Writes images/<name>.ccat for every sample plus manifest.tsv under `out`.
// Returns the records in manifest order.
std::vector<SampleRecord> synth_generate(const SynthConfig& config, const std::filesystem::path& out);

}  // namespace ccan
