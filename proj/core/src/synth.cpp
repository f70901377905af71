#include "ccan/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "ccan/error.hpp"
#include "ccan/rng.hpp"
#include "ccan/tensor_file.hpp"

namespace ccan {
namespace {

struct BandPrototype {
  std::array<double, 3> base, stripe;
  std::size_t period;  // stripe period in columns; 0 renders a solid band
  std::size_t phase;
};

struct CameraShift {
  std::array<double, 3> gain, offset;
};

// palette entries of every band: bank[band][entry].
std::vector<std::vector<BandPrototype>> prototype_bank(const SynthConfig& c) {
  Rng rng = make_rng(c.seed, "synth.palette");
  std::uniform_real_distribution<double> color(0.1, 0.9);
  std::uniform_int_distribution<std::size_t> period(0, 4);
  std::vector<std::vector<BandPrototype>> bank(c.bands, std::vector<BandPrototype>(c.palette));
  for (auto& band : bank) {
    for (auto& b : band) {
      for (auto& v : b.base) v = color(rng);
      for (auto& v : b.stripe) v = color(rng);
      const std::size_t p = period(rng);
      b.period = p == 0 ? 0 : p + 1;
      b.phase = b.period == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, b.period - 1)(rng);
    }
  }
  return bank;
}

CameraShift camera_shift(const SynthConfig& c, std::size_t camera) {
  Rng rng = make_rng(c.seed, "synth.camera." + std::to_string(camera));
  std::uniform_real_distribution<double> gain(1.0 - c.camera_shift, 1.0 + c.camera_shift);
  std::uniform_real_distribution<double> offset(-c.camera_shift / 2, c.camera_shift / 2);
  CameraShift s;
  for (auto& g : s.gain) g = gain(rng);
  for (auto& o : s.offset) o = offset(rng);
  return s;
}

}  // namespace

std::vector<std::size_t> synth_identity_code(const SynthConfig& c, std::size_t id) {
  // Mixed-radix digits of a seeded permutation of all palette combinations.
  std::size_t combos = 1;
  for (std::size_t b = 0; b < c.bands; ++b) combos *= c.palette;
  std::vector<std::size_t> order(combos);
  for (std::size_t i = 0; i < combos; ++i) order[i] = i;
  Rng rng = make_rng(c.seed, "synth.identities");
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t value = order.at(id);
  std::vector<std::size_t> code(c.bands);
  for (auto& digit : code) {
    digit = value % c.palette;
    value /= c.palette;
  }
  return code;
}

void SynthConfig::validate() const {
  if (ids < 2) throw ConfigError("synth: ids must be >= 2");
  if (cams < 2) throw ConfigError("synth: cams must be >= 2");
  if (per_id < 2) throw ConfigError("synth: per_id must be >= 2");
  if (bands < 1 || height < bands) throw ConfigError("synth: need 1 <= bands <= height");
  if (width < 1) throw ConfigError("synth: width must be >= 1");
  if (noise < 0.0) throw ConfigError("synth: noise must be >= 0");
  if (camera_shift < 0.0 || camera_shift >= 1.0) throw ConfigError("synth: camera_shift must lie in [0, 1)");
  if (palette < 1) throw ConfigError("synth: palette must be >= 1");
  double combos = 1.0;
  for (std::size_t b = 0; b < bands; ++b) combos *= static_cast<double>(palette);
  if (combos < static_cast<double>(ids)) {
    throw ConfigError("synth: palette^bands = " + std::to_string(static_cast<std::size_t>(combos)) +
                      " combinations cannot give " + std::to_string(ids) + " distinct identities");
  }
  if (combos > 1e7) throw ConfigError("synth: palette^bands exceeds 1e7 combinations");
}

Split synth_split(std::size_t camera, std::size_t k, std::size_t per_id) {
  if (k < per_id / 2) return Split::kTrain;
  return camera == 0 ? Split::kQuery : Split::kGallery;
}

Tensor synth_render(const SynthConfig& c, std::size_t id, std::size_t camera, std::size_t k) {
  const auto bank = prototype_bank(c);
  const auto code = synth_identity_code(c, id);
  const auto shift = camera_shift(c, camera);
  Rng rng = make_rng(c.seed, "synth.noise." + std::to_string(id) + "." + std::to_string(camera) + "." + std::to_string(k));
  std::normal_distribution<double> noise(0.0, 1.0);

  Tensor img = Tensor::zeros({c.height, c.width, 3});
  auto px = img.mutable_data();
  for (std::size_t y = 0; y < c.height; ++y) {
    const std::size_t b = std::min(c.bands - 1, y * c.bands / c.height);
    const auto& band = bank[b][code[b]];
    for (std::size_t x = 0; x < c.width; ++x) {
      const bool on_stripe = band.period != 0 && ((x + band.phase) % band.period) == 0;
      const auto& color = on_stripe ? band.stripe : band.base;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = color[ch] * shift.gain[ch] + shift.offset[ch];
        if (c.noise > 0.0) v += c.noise * noise(rng);
        px[(y * c.width + x) * 3 + ch] = static_cast<Scalar>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<SampleRecord> synth_generate(const SynthConfig& c, const std::filesystem::path& out) {
  c.validate();
  std::vector<SampleRecord> records;
  for (std::size_t id = 0; id < c.ids; ++id) {
    for (std::size_t cam = 0; cam < c.cams; ++cam) {
      for (std::size_t k = 0; k < c.per_id; ++k) {
        char name[64];
        std::snprintf(name, sizeof(name), "images/p%04zu_c%zu_%03zu.ccat", id, cam, k);
        write_tensor(out / name, synth_render(c, id, cam, k));
        records.push_back({name, static_cast<int>(id), static_cast<int>(cam), synth_split(cam, k, c.per_id), false});
      }
    }
  }
  save_manifest(out / "manifest.tsv", records);
  return records;
}

}  // namespace ccan
