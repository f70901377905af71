#include "ccan/network.hpp"

#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "ccan/error.hpp"
#include "ccan/ops.hpp"
#include "ccan/rng.hpp"
#include "ccan/tape.hpp"

namespace ccan {

namespace {
constexpr std::array<std::string_view, 6> kSettings{"G", "L", "G+L", "G+SS", "G+L+CC", "full"};
}

std::span<const std::string_view> ablation_settings() { return kSettings; }

AblationMask AblationMask::from_setting(std::string_view setting) {
  if (setting == "full" || setting == "CCAN") return {true, true, true, true};
  AblationMask mask{false, false, false, false};
  std::size_t start = 0;
  while (start <= setting.size()) {
    const auto plus = setting.find('+', start);
    const auto token = setting.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
    if (token == "G") {
      mask.global = true;
    } else if (token == "L") {
      mask.local = true;
    } else if (token == "SS") {
      mask.ssa = true;
    } else if (token == "CC") {
      mask.cca = true;
    } else {
      throw ConfigError("unknown ablation setting '" + std::string(setting) +
                        "' (expected G, L, G+L, G+SS, G+L+CC or full)");
    }
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return mask;
}

std::string AblationMask::setting() const {
  for (auto s : kSettings) {
    if (from_setting(s) == *this) return std::string(s);
  }
  std::string out;
  auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += tag;
  };
  add(global, "G");
  add(local, "L");
  add(ssa, "SS");
  add(cca, "CC");
  return out;
}

void AblationMask::validate() const {
  if (!global && !local) throw ConfigError("ablation mask disables both the global and the local branch");
  if (cca && !local) throw ConfigError("ablation mask enables CC2L without the local branch");
}

ModelConfig::Extents ModelConfig::extents() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model config: " + msg);
  };
  mask.validate();
  need(input_h > 0 && input_w > 0 && input_channels > 0, "input extents must be positive");
  need(c1 >= 2 && c2 >= 2 && c3 >= 2, "every level needs at least 2 channels (one per path)");
  need(d > 0 && num_ids > 0 && k_p > 0, "d, num_ids and k_p must be positive");
  need(stem_stride >= 1, "stem_stride must be >= 1");
  need(global_attention != AttentionKind::kCrossCorrelated, "the global unit is single-input (ssa or nonlocal)");

  auto halve = [&](std::size_t v, const char* where) {
    need(v >= 2 && v % 2 == 0, std::string("cannot 2x2-pool odd extent ") + std::to_string(v) + " at " + where);
    return v / 2;
  };

  Extents e{};
  e.h0 = input_h;
  e.w0 = input_w;
  e.c0 = input_channels;
  if (stem_channels > 0) {
    e.h0 = (input_h - 1) / stem_stride + 1;
    e.w0 = (input_w - 1) / stem_stride + 1;
    e.c0 = stem_channels;
    if (stem_pool) {
      e.h0 = halve(e.h0, "stem");
      e.w0 = halve(e.w0, "stem");
    }
  }
  e.h1 = pool1 ? halve(e.h0, "I1") : e.h0;
  e.w1 = pool1 ? halve(e.w0, "I1") : e.w0;
  e.h2 = pool2 ? halve(e.h1, "I2") : e.h1;
  e.w2 = pool2 ? halve(e.w1, "I2") : e.w1;
  e.h3 = pool3 ? halve(e.h2, "I3") : e.h2;
  e.w3 = pool3 ? halve(e.w2, "I3") : e.w2;

  if (mask.local) {
    need(e.h1 % k_p == 0, "Z1 height " + std::to_string(e.h1) + " is not divisible by k_p=" + std::to_string(k_p));
    need(e.h2 % k_p == 0, "Z2 height " + std::to_string(e.h2) + " is not divisible by k_p=" + std::to_string(k_p));
  }
  if (mask.ssa) (void)default_key_dim(c1, attention_key_dim);
  if (mask.cca) (void)default_key_dim(c2, attention_key_dim);
  return e;
}

namespace {

Scalar he_bound(std::size_t fan_in) { return static_cast<Scalar>(std::sqrt(6.0 / static_cast<double>(fan_in))); }
Scalar fc_bound(std::size_t fan_in) { return static_cast<Scalar>(std::sqrt(1.0 / static_cast<double>(fan_in))); }

Tensor conv_kernels(std::size_t k, std::size_t cin, std::size_t cout, std::uint64_t seed, std::string_view name) {
  Rng rng = make_rng(seed, name);
  return uniform_tensor({k, k, cin, cout}, he_bound(k * k * cin), rng);
}

DenseParams make_dense(std::size_t in, std::size_t out, std::uint64_t seed, const std::string& name) {
  Rng rng = make_rng(seed, name + ".weight");
  DenseParams p;
  p.weight = uniform_tensor({out, in}, fc_bound(in), rng);
  p.bias = Tensor::zeros({out});
  return p;
}

BackboneBlockParams make_named_block(std::size_t cin, std::size_t cout, bool pool, std::uint64_t seed,
                                     const std::string& name) {
  const std::size_t a = cout / 2, b = cout - cout / 2;
  BackboneBlockParams p;
  p.path1_kernels = conv_kernels(1, cin, a, seed, name + ".path1.kernels");
  p.path1_bias = Tensor::zeros({a});
  p.path2_kernels = conv_kernels(3, cin, b, seed, name + ".path2.kernels");
  p.path2_bias = Tensor::zeros({b});
  p.pool = pool;
  return p;
}

AttentionWeights make_attention(std::size_t m, std::size_t n, std::size_t c, std::size_t k, std::uint64_t seed,
                                const std::string& name) {
  Rng rng = make_rng(seed, name);
  return AttentionWeights::create(m, n, c, rng, k);
}

Tensor dense_forward(const Tensor& x, const DenseParams& p) {
  return reshape(linear(reshape(x, {1, x.numel()}), p.weight, p.bias), {p.weight.dim(0)});
}

void push_block(std::vector<NamedTensor>& out, const std::string& name, const BackboneBlockParams& p) {
  out.push_back({name + ".path1.kernels", p.path1_kernels});
  out.push_back({name + ".path1.bias", p.path1_bias});
  out.push_back({name + ".path2.kernels", p.path2_kernels});
  out.push_back({name + ".path2.bias", p.path2_bias});
}

void push_attention(std::vector<NamedTensor>& out, const std::string& name, const AttentionWeights& w) {
  out.push_back({name + ".W_f", w.w_f});
  out.push_back({name + ".W_g", w.w_g});
  out.push_back({name + ".W_h", w.w_h});
  out.push_back({name + ".W_w", w.w_w});
  out.push_back({name + ".W_alpha", w.w_alpha});
}

void push_dense(std::vector<NamedTensor>& out, const std::string& name, const DenseParams& p) {
  out.push_back({name + ".weight", p.weight});
  out.push_back({name + ".bias", p.bias});
}

BackboneBlockParams clone_block(const BackboneBlockParams& p) {
  return {p.path1_kernels.clone(), p.path1_bias.clone(), p.path2_kernels.clone(), p.path2_bias.clone(), p.pool};
}

DenseParams clone_dense(const DenseParams& p) { return {p.weight.clone(), p.bias.clone()}; }

std::string part_name(std::size_t s) { return "local.part" + std::to_string(s); }

}  // namespace

BackboneBlockParams make_block(std::size_t cin, std::size_t cout, bool pool, std::uint64_t seed) {
  return make_named_block(cin, cout, pool, seed, "block");
}

Tensor backbone_block_forward(const Tensor& x, const BackboneBlockParams& p) {
  if (x.rank() != 3 || x.dim(2) != p.path1_kernels.dim(2) || x.dim(2) != p.path2_kernels.dim(2)) {
    throw DimensionError("backbone block: input " + shape_str(x.shape()) + " does not match kernels " +
                         shape_str(p.path1_kernels.shape()) + " / " + shape_str(p.path2_kernels.shape()));
  }
  const Tensor a = relu(add_bias(conv2d(x, p.path1_kernels, 1, 0), p.path1_bias));
  const Tensor b = relu(add_bias(conv2d(x, p.path2_kernels, 1, 1), p.path2_bias));
  const std::array<Tensor, 2> paths{a, b};
  Tensor out = concat(paths, 2);
  if (p.pool) out = pool2d(out, PoolKind::kAvg, 2, 2);
  return out;
}

std::vector<Tensor> slice_parts(const Tensor& z, std::size_t k_p) {
  if (z.rank() != 3) throw DimensionError("slice_parts: expected [M x N x C], got " + shape_str(z.shape()));
  const std::size_t m = z.dim(0), n = z.dim(1);
  if (k_p == 0 || m % k_p != 0) {
    throw ConfigError("slice_parts: height M=" + std::to_string(m) + " is not divisible by k_p=" + std::to_string(k_p));
  }
  const std::size_t rows = m / k_p;
  std::vector<Tensor> parts;
  parts.reserve(k_p);
  for (std::size_t s = 0; s < k_p; ++s) {
    parts.push_back(bilinear_resize(slice(z, 0, s * rows, (s + 1) * rows), m, n));
  }
  return parts;
}

CcanModel CcanModel::create(const ModelConfig& config, std::uint64_t seed) {
  const auto e = config.extents();
  const auto& mask = config.mask;
  CcanModel model;
  model.config_ = config;
  if (config.stem_channels > 0) {
    model.stem_.emplace(conv_kernels(3, config.input_channels, config.stem_channels, seed, "stem.conv.kernels"),
                        Tensor::zeros({config.stem_channels}));
  }
  model.i1_ = make_named_block(e.c0, config.c1, config.pool1, seed, "global.I1");
  if (mask.ssa) model.ssa_ = make_attention(e.h1, e.w1, config.c1, config.attention_key_dim, seed, "global.SS1");
  model.i2_ = make_named_block(config.c1, config.c2, config.pool2, seed, "global.I2");
  if (mask.global) {
    model.i3_ = make_named_block(config.c2, config.c3, config.pool3, seed, "global.I3");
    model.fc_g1_ = make_dense(config.c3, config.d, seed, "global.FC1");
    model.fc_g2_ = make_dense(config.d, config.num_ids, seed, "global.FC2");
  }
  if (mask.local) {
    for (std::size_t s = 0; s < config.k_p; ++s) {
      const std::string name = part_name(s);
      Part part;
      part.i2 = make_named_block(config.c1, config.c2, config.pool2, seed, name + ".I2");
      if (mask.cca) part.cc2 = make_attention(e.h2, e.w2, config.c2, config.attention_key_dim, seed, name + ".CC2");
      part.i3 = make_named_block(config.c2, config.c3, config.pool3, seed, name + ".I3");
      model.parts_.push_back(std::move(part));
    }
    model.fc_l1_ = make_dense(config.c3 * config.k_p, config.d, seed, "local.FC1");
    model.fc_l2_ = make_dense(config.d, config.num_ids, seed, "local.FC2");
  }
  return model;
}

ForwardOutputs CcanModel::forward(const Tensor& image, bool keep_intermediates, bool with_heads) const {
  const auto& cfg = config_;
  if (image.rank() != 3 || image.dim(0) != cfg.input_h || image.dim(1) != cfg.input_w ||
      image.dim(2) != cfg.input_channels) {
    throw DimensionError("ccan_forward: image " + shape_str(image.shape()) + " does not match configured input [" +
                         std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w) + "x" +
                         std::to_string(cfg.input_channels) + "]");
  }
  ForwardOutputs out;
  Tensor x = image;
  if (stem_) {
    x = relu(add_bias(conv2d(x, stem_->first, cfg.stem_stride, 1), stem_->second));
    if (cfg.stem_pool) x = pool2d(x, PoolKind::kMax, 2, 2);
  }
  Tensor z1 = backbone_block_forward(x, i1_);
  if (ssa_) {
    const std::size_t m = z1.dim(0), n = z1.dim(1);
    const Tensor q = to_positional(z1);
    z1 = from_positional(attend(cfg.global_attention, q, q, *ssa_), m, n);
  }
  const Tensor z2 = backbone_block_forward(z1, i2_);
  if (keep_intermediates) {
    out.z1 = z1;
    out.z2 = z2;
  }

  if (cfg.mask.global) {
    const Tensor pooled = global_avg_pool(backbone_block_forward(z2, *i3_));
    out.f_g = dense_forward(pooled, *fc_g1_);
    if (with_heads) out.logits_g = dense_forward(out.f_g, *fc_g2_);
  }

  if (cfg.mask.local) {
    const auto z1_parts = slice_parts(z1, cfg.k_p);
    const auto z2_parts = slice_parts(z2, cfg.k_p);
    std::vector<Tensor> vectors;
    vectors.reserve(cfg.k_p);
    for (std::size_t s = 0; s < cfg.k_p; ++s) {
      const Part& part = parts_[s];
      Tensor q = backbone_block_forward(z1_parts[s], part.i2);
      if (part.cc2) {
        const Tensor& q_prime = z2_parts[s];
        if (q.shape() != q_prime.shape()) {
          throw ConfigError("CC2L: part stream " + shape_str(q.shape()) + " and Z2 strip " +
                            shape_str(q_prime.shape()) + " disagree");
        }
        const std::size_t m = q.dim(0), n = q.dim(1);
        q = from_positional(cca_forward(to_positional(q), to_positional(q_prime), *part.cc2), m, n);
      }
      vectors.push_back(global_avg_pool(backbone_block_forward(q, part.i3)));
    }
    out.f_l = dense_forward(concat(vectors, 0), *fc_l1_);
    if (with_heads) out.logits_l = dense_forward(out.f_l, *fc_l2_);
    if (keep_intermediates) out.part_vectors = std::move(vectors);
  }
  return out;
}

std::vector<NamedTensor> CcanModel::parameters() const {
  std::vector<NamedTensor> out;
  if (stem_) {
    out.push_back({"stem.conv.kernels", stem_->first});
    out.push_back({"stem.conv.bias", stem_->second});
  }
  push_block(out, "global.I1", i1_);
  if (ssa_) push_attention(out, "global.SS1", *ssa_);
  push_block(out, "global.I2", i2_);
  if (i3_) push_block(out, "global.I3", *i3_);
  if (fc_g1_) push_dense(out, "global.FC1", *fc_g1_);
  if (fc_g2_) push_dense(out, "global.FC2", *fc_g2_);
  for (std::size_t s = 0; s < parts_.size(); ++s) {
    const std::string name = part_name(s);
    push_block(out, name + ".I2", parts_[s].i2);
    if (parts_[s].cc2) push_attention(out, name + ".CC2", *parts_[s].cc2);
    push_block(out, name + ".I3", parts_[s].i3);
  }
  if (fc_l1_) push_dense(out, "local.FC1", *fc_l1_);
  if (fc_l2_) push_dense(out, "local.FC2", *fc_l2_);
  return out;
}

std::size_t CcanModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

CcanModel CcanModel::clone() const {
  CcanModel m;
  m.config_ = config_;
  if (stem_) m.stem_.emplace(stem_->first.clone(), stem_->second.clone());
  m.i1_ = clone_block(i1_);
  m.i2_ = clone_block(i2_);
  if (i3_) m.i3_ = clone_block(*i3_);
  if (ssa_) m.ssa_ = ssa_->clone();
  if (fc_g1_) m.fc_g1_ = clone_dense(*fc_g1_);
  if (fc_g2_) m.fc_g2_ = clone_dense(*fc_g2_);
  if (fc_l1_) m.fc_l1_ = clone_dense(*fc_l1_);
  if (fc_l2_) m.fc_l2_ = clone_dense(*fc_l2_);
  for (const auto& p : parts_) {
    Part c;
    c.i2 = clone_block(p.i2);
    c.i3 = clone_block(p.i3);
    if (p.cc2) c.cc2 = p.cc2->clone();
    m.parts_.push_back(std::move(c));
  }
  return m;
}

BackboneBlockParams& CcanModel::part_block(std::size_t part, int level) {
  if (part >= parts_.size() || (level != 2 && level != 3)) throw UsageError("part_block: no such block");
  return level == 2 ? parts_[part].i2 : parts_[part].i3;
}

AttentionWeights* CcanModel::part_attention(std::size_t part) {
  if (part >= parts_.size() || !parts_[part].cc2) return nullptr;
  return &*parts_[part].cc2;
}

std::vector<ForwardOutputs> ccan_forward(std::span<const Tensor> batch, const CcanModel& model) {
  if (batch.empty()) throw UsageError("ccan_forward: empty batch");
  std::vector<ForwardOutputs> out;
  out.reserve(batch.size());
  for (const auto& image : batch) out.push_back(model.forward(image));
  return out;
}

std::vector<FeaturePair> extract_features(std::span<const Tensor> batch, const CcanModel& model) {
  if (batch.empty()) throw UsageError("extract_features: empty batch");
  NoGradScope inference;
  std::vector<FeaturePair> out;
  out.reserve(batch.size());
  for (const auto& image : batch) {
    auto f = model.forward(image, false, false);
    out.push_back({f.f_g, f.f_l});
  }
  return out;
}

std::string model_config_to_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "input_h=" << c.input_h << "\n"
     << "input_w=" << c.input_w << "\n"
     << "input_channels=" << c.input_channels << "\n"
     << "stem_channels=" << c.stem_channels << "\n"
     << "stem_stride=" << c.stem_stride << "\n"
     << "stem_pool=" << (c.stem_pool ? 1 : 0) << "\n"
     << "c1=" << c.c1 << "\n"
     << "c2=" << c.c2 << "\n"
     << "c3=" << c.c3 << "\n"
     << "pool1=" << (c.pool1 ? 1 : 0) << "\n"
     << "pool2=" << (c.pool2 ? 1 : 0) << "\n"
     << "pool3=" << (c.pool3 ? 1 : 0) << "\n"
     << "d=" << c.d << "\n"
     << "k_p=" << c.k_p << "\n"
     << "num_ids=" << c.num_ids << "\n"
     << "attention_key_dim=" << c.attention_key_dim << "\n"
     << "global_attention=" << (c.global_attention == AttentionKind::kNonLocal ? "nonlocal" : "ssa") << "\n"
     << "setting=" << c.mask.setting() << "\n";
  return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("model config: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig c;
  auto num = [&](const char* key, std::size_t& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string("model config: missing key ") + key);
    dst = std::stoull(it->second);
  };
  auto flag = [&](const char* key, bool& dst) {
    std::size_t v = 0;
    num(key, v);
    dst = v != 0;
  };
  num("input_h", c.input_h);
  num("input_w", c.input_w);
  num("input_channels", c.input_channels);
  num("stem_channels", c.stem_channels);
  num("stem_stride", c.stem_stride);
  flag("stem_pool", c.stem_pool);
  num("c1", c.c1);
  num("c2", c.c2);
  num("c3", c.c3);
  flag("pool1", c.pool1);
  flag("pool2", c.pool2);
  flag("pool3", c.pool3);
  num("d", c.d);
  num("k_p", c.k_p);
  num("num_ids", c.num_ids);
  num("attention_key_dim", c.attention_key_dim);
  auto ga = kv.find("global_attention");
  if (ga == kv.end()) throw ConfigError("model config: missing key global_attention");
  if (ga->second == "ssa") {
    c.global_attention = AttentionKind::kSymmetricSelf;
  } else if (ga->second == "nonlocal") {
    c.global_attention = AttentionKind::kNonLocal;
  } else {
    throw ConfigError("model config: global_attention must be ssa or nonlocal");
  }
  auto setting = kv.find("setting");
  if (setting == kv.end()) throw ConfigError("model config: missing key setting");
  c.mask = AblationMask::from_setting(setting->second);
  c.validate();
  return c;
}

}  // namespace ccan
