#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccan/attention.hpp"
#include "ccan/tensor.hpp"

namespace ccan {

// Which components of the two-branch network are active.
struct AblationMask {
  bool global = true;  // G: global head (I3G, GAP, FCG1, FCG2)
  bool local = true;   // L: part streams and local head
  bool ssa = true;     // SS1G: symmetric self-attention after I1G
  bool cca = true;     // CC2L: cross-correlated attention in every part stream

  // "G", "L", "G+L", "G+SS", "G+L+CC", "full".
  static AblationMask from_setting(std::string_view setting);
  std::string setting() const;
  void validate() const;
  bool operator==(const AblationMask&) const = default;
};

// The six settings of the attention ablation, in table order.
std::span<const std::string_view> ablation_settings();

struct ModelConfig {
  std::size_t input_h = 64, input_w = 32, input_channels = 3;
  // 3x3 stem conv ahead of I1G; 0 channels disables the stem.
  std::size_t stem_channels = 16;
  std::size_t stem_stride = 2;
  bool stem_pool = true;
  // Output channels of levels 1-3 (I1G; I2G and I2Ls; I3G and I3Ls).
  std::size_t c1 = 32, c2 = 64, c3 = 128;
  // 2x2 average pooling at the end of each level.
  bool pool1 = false, pool2 = true, pool3 = false;
  std::size_t d = 64;
  std::size_t k_p = 4;
  std::size_t num_ids = 16;
  // 0 selects K = C / 8.
  std::size_t attention_key_dim = 0;
  // kSymmetricSelf (default) or kNonLocal for the global unit.
  AttentionKind global_attention = AttentionKind::kSymmetricSelf;
  AblationMask mask;

  struct Extents {
    std::size_t h0, w0, c0;  // after the stem
    std::size_t h1, w1;      // Z1
    std::size_t h2, w2;      // Z2
    std::size_t h3, w3;
  };
  // Throws ConfigError for any inconsistent topology.
  Extents extents() const;
  void validate() const { (void)extents(); }
};

// Two-path lite block: concat(relu(conv1x1 + b1), relu(conv3x3 + b2)), then
// an optional 2x2 stride-2 average pool.
struct BackboneBlockParams {
  Tensor path1_kernels;  // 1 x 1 x Cin x c1
  Tensor path1_bias;     // c1
  Tensor path2_kernels;  // 3 x 3 x Cin x c2
  Tensor path2_bias;     // c2
  bool pool = false;

  std::size_t out_channels() const { return path1_kernels.dim(3) + path2_kernels.dim(3); }
};

BackboneBlockParams make_block(std::size_t cin, std::size_t cout, bool pool, std::uint64_t seed);

Tensor backbone_block_forward(const Tensor& x, const BackboneBlockParams& p);

// Cuts Z [M x N x C] into k_p horizontal strips and resizes each back to M x N.
std::vector<Tensor> slice_parts(const Tensor& z, std::size_t k_p);

struct DenseParams {
  Tensor weight;  // out x in
  Tensor bias;    // out
};

struct ForwardOutputs {
  Tensor f_g, logits_g;  // undefined when the global head is masked out
  Tensor f_l, logits_l;  // undefined when the local head is masked out

  // Retained only when requested.
  Tensor z1, z2;
  std::vector<Tensor> part_vectors;  // GAP output of every part stream
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class CcanModel {
 public:
  // Every parameter is drawn from its own stream derived from (seed, name),
  // so the same seed yields the same weights under any ablation mask.
  static CcanModel create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }

  // Single image [H x W x C]. Without heads only f_g / f_l are produced.
  ForwardOutputs forward(const Tensor& image, bool keep_intermediates = false, bool with_heads = true) const;

  // Stable, dotted names (e.g. global.I1.path1.kernels).
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;
  // Deep copy.
  CcanModel clone() const;

  // Direct access for tests and tools.
  BackboneBlockParams& part_block(std::size_t part, int level);
  AttentionWeights* global_attention() { return ssa_ ? &*ssa_ : nullptr; }
  AttentionWeights* part_attention(std::size_t part);

 private:
  struct Part {
    BackboneBlockParams i2, i3;
    std::optional<AttentionWeights> cc2;
  };

  ModelConfig config_;
  std::optional<std::pair<Tensor, Tensor>> stem_;  // kernels, bias
  BackboneBlockParams i1_, i2_;
  std::optional<BackboneBlockParams> i3_;
  std::optional<AttentionWeights> ssa_;
  std::optional<DenseParams> fc_g1_, fc_g2_, fc_l1_, fc_l2_;
  std::vector<Part> parts_;
};

std::vector<ForwardOutputs> ccan_forward(std::span<const Tensor> batch, const CcanModel& model);

struct FeaturePair {
  Tensor f_g, f_l;
};

// Inference: no tape, no classification heads.
std::vector<FeaturePair> extract_features(std::span<const Tensor> batch, const CcanModel& model);

// key=value lines describing a ModelConfig (used as the checkpoint header).
std::string model_config_to_text(const ModelConfig& config);
ModelConfig model_config_from_text(const std::string& text);

}  // namespace ccan
