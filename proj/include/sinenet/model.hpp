#pragma once

/// Network builders and forward passes. A model owns an ordered list of named
/// parameter leaves; forward() assembles a fresh tape over them, so gradients
/// accumulate on the shared leaves across samples until the caller clears
/// them. Parameters are immutable during forward evaluation.

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sinenet/model_config.hpp"
#include "sinenet/ops.hpp"
#include "sinenet/rng.hpp"

namespace sinenet {

template <typename T>
struct TapRecord {
  std::string name;
  Tensor<T> value;
};

namespace detail {

template <typename T>
struct ConvP {
  Value<T> w, b;
};
template <typename T>
struct NormP {
  Value<T> g, b;
};
/// Dense projection of the 64-wide conditioning embedding to per-channel values.
template <typename T>
struct ProjP {
  Value<T> w, b;
};
template <typename T>
struct BlockP {
  ConvP<T> c1, c2;
  NormP<T> n1, n2;
  ProjP<T> add1;            // conditioning == add
  ProjP<T> s1, t1, s2, t2;  // conditioning == adagn
};
/// One down or up block: pointwise channel map plus conv block.
template <typename T>
struct ResBlockP {
  ConvP<T> pw;
  BlockP<T> block;
};

/// Registers parameter tensors in creation order. Each tensor draws from its
/// own RNG stream, so initialization is independent of other tensors' sizes.
template <typename T>
class ParamBuilder {
 public:
  ParamBuilder(std::uint64_t seed, std::vector<Value<T>>& params, std::vector<std::string>& names)
      : seed_(seed), params_(params), names_(names) {}

  Value<T> uniform(const std::string& name, std::vector<int> shape, double bound) {
    Tensor<T> t(shape);
    Rng rng = Rng::stream(seed_, counter_++);
    for (auto& v : t.data) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    return reg(name, std::move(t));
  }
  Value<T> constant(const std::string& name, std::vector<int> shape, T fill) {
    ++counter_;
    Tensor<T> t(shape);
    std::fill(t.data.begin(), t.data.end(), fill);
    return reg(name, std::move(t));
  }

  ConvP<T> conv(const std::string& name, int k, int c_in, int c_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_in) * k * k);
    return {uniform(name + ".w", {c_out, c_in, k, k}, bound),
            uniform(name + ".b", {c_out}, bound)};
  }
  NormP<T> norm(const std::string& name, int c) {
    return {constant(name + ".g", {c}, T(1)), constant(name + ".b", {c}, T(0))};
  }
  ProjP<T> proj(const std::string& name, int c) {
    const double bound = 1.0 / std::sqrt(64.0);
    return {uniform(name + ".w", {c, 64}, bound), uniform(name + ".b", {c}, bound)};
  }
  BlockP<T> block(const std::string& name, int c_in, int c_out, CondMode cond) {
    BlockP<T> b;
    b.c1 = conv(name + ".conv1", 3, c_in, c_out);
    b.n1 = norm(name + ".ln1", c_out);
    b.c2 = conv(name + ".conv2", 3, c_out, c_out);
    b.n2 = norm(name + ".ln2", c_out);
    if (cond == CondMode::add) b.add1 = proj(name + ".cadd", c_out);
    if (cond == CondMode::adagn) {
      b.s1 = proj(name + ".cs1", c_out);
      b.t1 = proj(name + ".ct1", c_out);
      b.s2 = proj(name + ".cs2", c_out);
      b.t2 = proj(name + ".ct2", c_out);
    }
    return b;
  }
  ResBlockP<T> res_block(const std::string& name, int c_in, int c_out, int c_cat, CondMode cond) {
    ResBlockP<T> r;
    r.pw = conv(name + ".pw", 1, c_in, c_out);
    r.block = block(name + ".block", c_in + c_cat, c_out, cond);
    return r;
  }

 private:
  Value<T> reg(const std::string& name, Tensor<T> t) {
    auto v = make_param(std::move(t), name);
    params_.push_back(v);
    names_.push_back(name);
    return v;
  }
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::vector<Value<T>>& params_;
  std::vector<std::string>& names_;
};

}  // namespace detail

/// conv3x3 -> channel layer norm -> GeLU -> conv3x3 -> layer norm -> GeLU.
/// `add` conditioning adds a projected embedding after the first activation;
/// `adagn` applies a projected scale-shift after each activation.
template <typename T>
Value<T> conv_block_forward(const detail::BlockP<T>& p, const Value<T>& x, PadMode pad, int dil,
                            CondMode cond, const Value<T>& embed) {
  auto y = conv2d(x, p.c1.w, p.c1.b, pad, dil);
  y = gelu(layer_norm_chan(y, p.n1.g, p.n1.b));
  if (cond == CondMode::add) y = add_bias_ch(y, linear_vec(embed, p.add1.w, p.add1.b));
  if (cond == CondMode::adagn)
    y = scale_shift_ch(y, linear_vec(embed, p.s1.w, p.s1.b), linear_vec(embed, p.t1.w, p.t1.b));
  y = conv2d(y, p.c2.w, p.c2.b, pad, dil);
  y = gelu(layer_norm_chan(y, p.n2.g, p.n2.b));
  if (cond == CondMode::adagn)
    y = scale_shift_ch(y, linear_vec(embed, p.s2.w, p.s2.b), linear_vec(embed, p.t2.w, p.t2.b));
  return y;
}

/// y = pw(d) + block(cat(d, pyramid)); `pyramid` empty means no concatenation.
template <typename T>
Value<T> down_block_forward(const detail::ResBlockP<T>& p, const Value<T>& pooled,
                            const Value<T>& pyramid, PadMode pad, int dil, CondMode cond,
                            const Value<T>& embed) {
  auto cat = pyramid ? concat_ch(pooled, pyramid) : pooled;
  return add(conv2d(pooled, p.pw.w, p.pw.b, pad, dil),
             conv_block_forward(p.block, cat, pad, dil, cond, embed));
}

/// y = pw(v) + block(cat(v, skip)) on the already-upsampled feature v.
template <typename T>
Value<T> up_block_forward(const detail::ResBlockP<T>& p, const Value<T>& v, const Value<T>& skip,
                          PadMode pad, int dil, CondMode cond, const Value<T>& embed) {
  return add(conv2d(v, p.pw.w, p.pw.b, pad, dil),
             conv_block_forward(p.block, concat_ch(v, skip), pad, dil, cond, embed));
}

/// Sinusoidal features of the conditioning scalars: 16 sine/cosine pairs per
/// scalar at geometrically spaced frequencies 2^0 .. 2^15.
template <typename T>
Tensor<T> kappa_features(const Kappa& k) {
  Tensor<T> out({64});
  const double vals[2] = {k.dt, k.force};
  int idx = 0;
  for (double v : vals) {
    for (int i = 0; i < 16; ++i) out.data[idx++] = static_cast<T>(std::sin(std::ldexp(v, i)));
    for (int i = 0; i < 16; ++i) out.data[idx++] = static_cast<T>(std::cos(std::ldexp(v, i)));
  }
  return out;
}

template <typename T>
class Model {
 public:
  ModelConfig config;
  int dilation = 1;
  bool record_taps = false;
  std::vector<TapRecord<T>> taps;

  virtual ~Model() = default;

  /// history [h*M, N1, N2] -> prediction [M, N1, N2]. kappa is required when
  /// conditioning is enabled and ignored otherwise.
  virtual Value<T> forward(const Value<T>& history, const Kappa* kappa = nullptr) = 0;

  /// Same parameters (shared, not copied) evaluated with all sampling offsets
  /// scaled by r. Requires circular padding for r > 1.
  virtual std::shared_ptr<Model<T>> with_dilation(int r) const = 0;

  const std::vector<Value<T>>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  long long parameter_count() const {
    long long n = 0;
    for (const auto& p : params_) n += static_cast<long long>(p->val.numel());
    return n;
  }
  Value<T> param(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return params_[i];
    throw std::invalid_argument("no parameter named " + name);
  }
  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

 protected:
  void check_history(const Value<T>& x) const {
    const auto& s = x->val.shape;
    if (s.size() != 3 || s[0] != config.history * config.fields)
      throw std::invalid_argument("history must be [h*M, N1, N2] with h*M = " +
                                  std::to_string(config.history * config.fields));
  }
  void tap(const std::string& name, const Value<T>& v) {
    if (record_taps) taps.push_back({name, v->val});
  }
  Value<T> embed(const Kappa* kappa) {
    if (config.conditioning == CondMode::none) return nullptr;
    if (!kappa) throw std::invalid_argument("conditioning enabled but no kappa given");
    auto e = make_const(kappa_features<T>(*kappa));
    auto h = gelu(linear_vec(e, cond_l1_.w, cond_l1_.b));
    return linear_vec(h, cond_l2_.w, cond_l2_.b);
  }

  std::vector<Value<T>> params_;
  std::vector<std::string> names_;
  detail::ProjP<T> cond_l1_, cond_l2_;  // 64 -> 64 embedding MLP
};

/// Multi-wave network: encoder P, K residual U-shaped waves, decoder Q.
/// Covers the entangled (no pyramid concat) and bottleneck (decode/encode
/// between waves) variants via config flags. The same structure with
/// wave_residual=false and K conv blocks per level is the deeper-unet arch.
template <typename T>
class SineNetModel : public Model<T> {
 public:
  SineNetModel(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.arch != "sinenet" && cfg.arch != "deeper_unet")
      throw std::invalid_argument("SineNetModel: wrong arch " + cfg.arch);
    this->config = cfg;
    detail::ParamBuilder<T> pb(seed, this->params_, this->names_);
    const auto zs = channel_schedule(cfg.z0, cfg.multiplier, cfg.levels);
    auto z_at = [&](int l) { return l == 0 ? cfg.z0 : zs[l - 1]; };
    const int pyr = cfg.disentangled ? cfg.z0 : 0;
    const int hm = cfg.history * cfg.fields;

    encoder_ = pb.conv("encoder", 3, hm, cfg.z0);
    if (cfg.conditioning != CondMode::none) {
      this->cond_l1_ = pb.proj("cond.l1", 64);
      this->cond_l2_ = pb.proj("cond.l2", 64);
    }
    if (cfg.arch == "sinenet") {
      waves_.resize(cfg.k_waves);
      for (int k = 0; k < cfg.k_waves; ++k) {
        const std::string wn = "wave" + std::to_string(k);
        for (int l = 1; l <= cfg.levels; ++l)
          waves_[k].downs.push_back(pb.res_block(wn + ".down" + std::to_string(l), z_at(l - 1),
                                                 z_at(l), pyr, cfg.conditioning));
        for (int l = cfg.levels - 1; l >= 0; --l)
          waves_[k].ups.push_back(pb.res_block(wn + ".up" + std::to_string(l), z_at(l + 1),
                                               z_at(l), z_at(l), cfg.conditioning));
      }
      if (cfg.bottleneck)
        for (int k = 0; k + 1 < cfg.k_waves; ++k) {
          const std::string gn = "gap" + std::to_string(k);
          gaps_.push_back({pb.conv(gn + ".dec", 3, cfg.z0, cfg.fields),
                           pb.conv(gn + ".enc", 3, cfg.fields, cfg.z0)});
        }
    } else {
      // deeper_unet: one U-shape, K blocks per level.
      waves_.resize(1);
      for (int l = 1; l <= cfg.levels; ++l) {
        const std::string dn = "down" + std::to_string(l);
        waves_[0].downs.push_back(
            pb.res_block(dn + ".b0", z_at(l - 1), z_at(l), pyr, cfg.conditioning));
        for (int e = 1; e < cfg.k_waves; ++e)
          down_extras_.push_back(pb.res_block(dn + ".b" + std::to_string(e), z_at(l), z_at(l),
                                              pyr, cfg.conditioning));
      }
      for (int l = cfg.levels - 1; l >= 0; --l) {
        const std::string un = "up" + std::to_string(l);
        waves_[0].ups.push_back(
            pb.res_block(un + ".b0", z_at(l + 1), z_at(l), z_at(l), cfg.conditioning));
        for (int e = 1; e < cfg.k_waves; ++e)
          up_extras_.push_back(
              pb.res_block(un + ".b" + std::to_string(e), z_at(l), z_at(l), 0, cfg.conditioning));
      }
    }
    decoder_ = pb.conv("decoder", 3, cfg.z0, cfg.fields);
  }

  Value<T> forward(const Value<T>& history, const Kappa* kappa = nullptr) override {
    this->check_history(history);
    const auto& cfg = this->config;
    const int div = (1 << cfg.levels) * this->dilation;
    if (history->val.shape[1] % div != 0 || history->val.shape[2] % div != 0)
      throw std::invalid_argument("spatial dims must be divisible by 2^levels times dilation");
    this->taps.clear();
    auto e = this->embed(kappa);

    auto x = conv2d(history, encoder_.w, encoder_.b, cfg.padding, this->dilation);
    this->tap("encoder", x);
    if (cfg.arch == "sinenet") {
      for (int k = 0; k < cfg.k_waves; ++k) {
        x = wave_forward(k, x, e);
        if (cfg.bottleneck && k + 1 < cfg.k_waves) {
          x = conv2d(x, gaps_[k].dec.w, gaps_[k].dec.b, cfg.padding, this->dilation);
          x = conv2d(x, gaps_[k].enc.w, gaps_[k].enc.b, cfg.padding, this->dilation);
        }
      }
    } else {
      x = deeper_forward(x, e);
    }
    auto y = conv2d(x, decoder_.w, decoder_.b, cfg.padding, this->dilation);
    this->tap("output", y);
    return y;
  }

  std::shared_ptr<Model<T>> with_dilation(int r) const override {
    if (r < 1) throw std::invalid_argument("dilation must be >= 1");
    if (r > 1 && this->config.padding == PadMode::zeros)
      throw std::invalid_argument("dilation requires circular padding");
    auto m = std::make_shared<SineNetModel<T>>(*this);
    m->dilation = r;
    return m;
  }

 private:
  struct WaveP {
    std::vector<detail::ResBlockP<T>> downs, ups;
  };
  struct GapP {
    detail::ConvP<T> dec, enc;
  };

  Value<T> wave_forward(int k, const Value<T>& x_in, const Value<T>& e) {
    const auto& cfg = this->config;
    const std::string wn = "wave" + std::to_string(k);
    this->tap(wn + ".input", x_in);
    std::vector<Value<T>> pyr;
    if (cfg.disentangled) {
      pyr.resize(cfg.levels + 1);
      pyr[0] = x_in;
      for (int l = 1; l <= cfg.levels; ++l) pyr[l] = avg_pool2(pyr[l - 1], this->dilation);
    }
    std::vector<Value<T>> skips(cfg.levels + 1);
    skips[0] = x_in;
    auto cur = x_in;
    for (int l = 1; l <= cfg.levels; ++l) {
      auto d = avg_pool2(cur, this->dilation);
      cur = down_block_forward(waves_[k].downs[l - 1], d, cfg.disentangled ? pyr[l] : Value<T>(),
                               cfg.padding, this->dilation, cfg.conditioning, e);
      skips[l] = cur;
      this->tap(wn + ".down" + std::to_string(l), cur);
    }
    for (int i = 0; i < cfg.levels; ++i) {
      const int l = cfg.levels - 1 - i;
      auto v = upsample_bicubic2(cur, cfg.padding, this->dilation);
      cur = up_block_forward(waves_[k].ups[i], v, skips[l], cfg.padding, this->dilation,
                             cfg.conditioning, e);
      this->tap(wn + ".up" + std::to_string(l), cur);
    }
    auto out = cfg.wave_residual ? add(x_in, cur) : cur;
    this->tap(wn + ".output", out);
    return out;
  }

  Value<T> deeper_forward(const Value<T>& x_in, const Value<T>& e) {
    const auto& cfg = this->config;
    const int extras = cfg.k_waves - 1;
    std::vector<Value<T>> pyr;
    if (cfg.disentangled) {
      pyr.resize(cfg.levels + 1);
      pyr[0] = x_in;
      for (int l = 1; l <= cfg.levels; ++l) pyr[l] = avg_pool2(pyr[l - 1], this->dilation);
    }
    std::vector<Value<T>> skips(cfg.levels + 1);
    skips[0] = x_in;
    auto cur = x_in;
    for (int l = 1; l <= cfg.levels; ++l) {
      auto d = avg_pool2(cur, this->dilation);
      auto pyr_l = cfg.disentangled ? pyr[l] : Value<T>();
      cur = down_block_forward(waves_[0].downs[l - 1], d, pyr_l, cfg.padding, this->dilation,
                               cfg.conditioning, e);
      for (int ei = 0; ei < extras; ++ei)
        cur = down_block_forward(down_extras_[(l - 1) * extras + ei], cur, pyr_l, cfg.padding,
                                 this->dilation, cfg.conditioning, e);
      skips[l] = cur;
      this->tap("down" + std::to_string(l), cur);
    }
    for (int i = 0; i < cfg.levels; ++i) {
      const int l = cfg.levels - 1 - i;
      auto v = upsample_bicubic2(cur, cfg.padding, this->dilation);
      cur = up_block_forward(waves_[0].ups[i], v, skips[l], cfg.padding, this->dilation,
                             cfg.conditioning, e);
      for (int ei = 0; ei < extras; ++ei)
        cur = down_block_forward(up_extras_[i * extras + ei], cur, Value<T>(), cfg.padding,
                                 this->dilation, cfg.conditioning, e);
      this->tap("up" + std::to_string(l), cur);
    }
    return cur;
  }

  detail::ConvP<T> encoder_, decoder_;
  std::vector<WaveP> waves_;
  std::vector<GapP> gaps_;
  std::vector<detail::ResBlockP<T>> down_extras_, up_extras_;
};

/// Constant-resolution residual network of dilated 3x3 convolutions with a
/// symmetric per-block dilation schedule and GeLU between convolutions.
template <typename T>
class DilResNetModel : public Model<T> {
 public:
  DilResNetModel(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.arch != "dil_resnet") throw std::invalid_argument("DilResNetModel: wrong arch");
    this->config = cfg;
    detail::ParamBuilder<T> pb(seed, this->params_, this->names_);
    const int hm = cfg.history * cfg.fields;
    encoder_ = pb.conv("enc", 3, hm, cfg.width);
    blocks_.resize(cfg.blocks);
    for (int b = 0; b < cfg.blocks; ++b)
      for (size_t j = 0; j < cfg.dilations.size(); ++j)
        blocks_[b].push_back(pb.conv(
            "block" + std::to_string(b) + ".conv" + std::to_string(j), 3, cfg.width, cfg.width));
    decoder_ = pb.conv("dec", 3, cfg.width, cfg.fields);
  }

  Value<T> forward(const Value<T>& history, const Kappa* kappa = nullptr) override {
    (void)kappa;
    this->check_history(history);
    this->taps.clear();
    const auto& cfg = this->config;
    auto x = conv2d(history, encoder_.w, encoder_.b, cfg.padding, this->dilation);
    this->tap("encoder", x);
    for (int b = 0; b < cfg.blocks; ++b) {
      auto y = x;
      for (size_t j = 0; j < blocks_[b].size(); ++j) {
        if (j > 0) y = gelu(y);
        y = conv2d(y, blocks_[b][j].w, blocks_[b][j].b, cfg.padding,
                   this->dilation * cfg.dilations[j]);
      }
      x = add(x, y);
      this->tap("block" + std::to_string(b), x);
    }
    auto out = conv2d(x, decoder_.w, decoder_.b, cfg.padding, this->dilation);
    this->tap("output", out);
    return out;
  }

  std::shared_ptr<Model<T>> with_dilation(int r) const override {
    if (r < 1) throw std::invalid_argument("dilation must be >= 1");
    if (r > 1 && this->config.padding == PadMode::zeros)
      throw std::invalid_argument("dilation requires circular padding");
    auto m = std::make_shared<DilResNetModel<T>>(*this);
    m->dilation = r;
    return m;
  }

 private:
  detail::ConvP<T> encoder_, decoder_;
  std::vector<std::vector<detail::ConvP<T>>> blocks_;
};

template <typename T>
std::shared_ptr<Model<T>> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.arch == "dil_resnet") return std::make_shared<DilResNetModel<T>>(cfg, seed);
  return std::make_shared<SineNetModel<T>>(cfg, seed);
}

template <typename T>
std::shared_ptr<Model<T>> build_sinenet(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.arch != "sinenet") throw std::invalid_argument("build_sinenet: arch must be sinenet");
  return build_model<T>(cfg, seed);
}

/// The single-wave baseline: one wave with m=2 and 128 base channels.
template <typename T>
std::shared_ptr<Model<T>> build_unet128(int history, int fields, PadMode pad, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.arch = "sinenet";
  cfg.k_waves = 1;
  cfg.z0 = 128;
  cfg.multiplier = 2.0;
  cfg.padding = pad;
  cfg.history = history;
  cfg.fields = fields;
  return build_model<T>(cfg, seed);
}

template <typename T>
std::shared_ptr<Model<T>> build_deeper_unet(int k, int z0, double m, int history, int fields,
                                            PadMode pad, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.arch = "deeper_unet";
  cfg.k_waves = k;
  cfg.z0 = z0;
  cfg.multiplier = m;
  cfg.wave_residual = false;
  cfg.padding = pad;
  cfg.history = history;
  cfg.fields = fields;
  return build_model<T>(cfg, seed);
}

template <typename T>
std::shared_ptr<Model<T>> build_dil_resnet(int width, std::vector<int> dilations, int blocks,
                                           int history, int fields, PadMode pad,
                                           std::uint64_t seed) {
  ModelConfig cfg;
  cfg.arch = "dil_resnet";
  cfg.width = width;
  cfg.dilations = std::move(dilations);
  cfg.blocks = blocks;
  cfg.padding = pad;
  cfg.history = history;
  cfg.fields = fields;
  return build_model<T>(cfg, seed);
}

/// Named variants used by ablation sweeps; `base` supplies K, z0, m, h, M.
template <typename T>
std::shared_ptr<Model<T>> build_variant(const std::string& kind, const ModelConfig& base,
                                        std::uint64_t seed) {
  ModelConfig cfg = base;
  if (kind == "unet128")
    return build_unet128<T>(base.history, base.fields, base.padding, seed);
  if (kind == "deeper_unet")
    return build_deeper_unet<T>(base.k_waves, base.z0, base.multiplier, base.history, base.fields,
                                base.padding, seed);
  if (kind == "dil_resnet")
    return build_dil_resnet<T>(base.width, base.dilations, base.blocks, base.history, base.fields,
                               base.padding, seed);
  if (kind == "sinenet") {
    cfg.arch = "sinenet";
    return build_model<T>(cfg, seed);
  }
  if (kind == "sinenet_entangled") {
    cfg.arch = "sinenet";
    cfg.disentangled = false;
    return build_model<T>(cfg, seed);
  }
  if (kind == "sinenet_bottleneck") {
    cfg.arch = "sinenet";
    cfg.bottleneck = true;
    return build_model<T>(cfg, seed);
  }
  throw std::invalid_argument("unknown variant kind: " + kind);
}

/// r=1 returns an equivalent view; r>1 scales every sampling offset and
/// padding width by r while sharing parameter storage with the source.
template <typename T>
std::shared_ptr<Model<T>> dilate_model(const std::shared_ptr<Model<T>>& m, int r) {
  return m->with_dilation(r);
}

}  // namespace sinenet
