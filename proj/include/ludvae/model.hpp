#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ludvae/nn.hpp"
#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae {

/// Architecture of the dual-latent hierarchical VAE. Layer l (0-based)
/// operates at spatial scale 1/2^l: the encoders downsample between layers
/// with stride-2 mean pooling, the decoder mirrors with nearest upsampling.
struct ModelConfig {
  int num_layers = 3;
  int base_channels = 64;
  std::vector<int> latent_channels;  // per layer; empty = base_channels / 4
  int convs_per_block = 4;           // 3x3 conv + ReLU units per block
  double log_sigma_min = -10.0;
  double log_sigma_max = 3.0;
  int input_channels = 3;

  void validate() const {
    if (num_layers < 1) throw ConfigError("model.num_layers must be >= 1");
    if (base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
    if (input_channels < 1) throw ConfigError("model.input_channels must be >= 1");
    if (convs_per_block < 1) throw ConfigError("model.convs_per_block must be >= 1");
    if (!(log_sigma_min < log_sigma_max))
      throw ConfigError("model.log_sigma_clamp: min must be < max");
    if (!latent_channels.empty() && static_cast<int>(latent_channels.size()) != num_layers)
      throw ConfigError("model.latent_channels must have one entry per layer");
    for (int c : latent_channels)
      if (c < 1) throw ConfigError("model.latent_channels entries must be >= 1");
  }

  std::vector<int> resolved_latent_channels() const {
    if (!latent_channels.empty()) return latent_channels;
    return std::vector<int>(num_layers, std::max(1, base_channels / 4));
  }

  /// Input spatial dims must be divisible by this.
  int spatial_divisor() const { return 1 << (num_layers - 1); }
};

/// Deterministic hierarchical content code z = (z^0 ... z^{N-1}).
template <typename Scalar>
struct LatentContentT {
  std::vector<Tensor<Scalar>> layers;
};

/// Stochastic hierarchical degradation code with per-layer Gaussian
/// statistics. Layer 0's prior is fixed to the standard normal, so its
/// prior stats are identically zero. `sample = mu + exp(log_sigma) * eps`
/// with `eps` recorded.
template <typename Scalar>
struct LatentDegradationT {
  std::vector<Tensor<Scalar>> mu_q, log_sigma_q;
  std::vector<Tensor<Scalar>> mu_p, log_sigma_p;
  std::vector<Tensor<Scalar>> sample, eps;
};

using LatentContent = LatentContentT<float>;
using LatentDegradation = LatentDegradationT<float>;

template <typename Scalar>
class LudVae {
 public:
  using Tens = Tensor<Scalar>;
  using Content = LatentContentT<Scalar>;
  using Degradation = LatentDegradationT<Scalar>;

  struct BlockCache {
    // acts[0] is the block input, acts[j+1] the post-ReLU output of unit j.
    std::vector<Tens> acts;
    const Tens& out() const { return acts.back(); }
  };

  struct ContentCache {
    std::vector<BlockCache> blocks;  // one per layer
    Content latent;
  };

  struct DegradationCache {
    std::vector<BlockCache> blocks;
    std::vector<Tens> log_sigma_q_raw, log_sigma_p_raw;  // pre-clamp, for masking
    std::vector<Tens> prior_input;                       // concatenated pooled samples, l >= 1
    Degradation latent;
  };

  struct DecoderCache {
    Tens adapter_input;
    bool noisy = false;
    std::vector<BlockCache> blocks;  // trunk blocks, index 0 = coarsest scale
  };

  explicit LudVae(ModelConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    lat_ = cfg_.resolved_latent_channels();
    build();
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore<Scalar>& params() { return store_; }
  const nn::ParamStore<Scalar>& params() const { return store_; }

  /// Fan-in scaled normal init, zero biases. Prior nets start at zero so the
  /// top-down prior is exactly standard normal at iteration 0; posterior
  /// log-sigma nets start at zero so sigma_q = 1.
  void init_parameters(Rng& rng) {
    std::fill(store_.values().begin(), store_.values().end(), Scalar(0));
    for (const auto& c : all_convs_) {
      const std::size_t fan_in = static_cast<std::size_t>(c->in_c) * c->k * c->k;
      double stddev;
      if (c->name.starts_with("prior.") || c->name.find("post_logsigma") != std::string::npos)
        stddev = 0.0;
      else if (c->k == 3 && c->name != "dec.out")
        stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      else
        stddev = std::sqrt(1.0 / static_cast<double>(fan_in));
      if (stddev > 0.0)
        nn::fill_normal(store_.data() + c->w_off, c->weight_count(), stddev, rng);
    }
  }

  // ---- inference ops (pure; read-only on parameters) ----

  Content encode_content(const Tens& image) const {
    ContentCache cache;
    encode_content_cached(image, cache);
    return std::move(cache.latent);
  }

  Degradation encode_degradation(const Tens& image, Rng& rng) const {
    DegradationCache cache;
    encode_degradation_cached(image, rng, cache);
    return std::move(cache.latent);
  }

  /// Top-down ancestral sample. Layer 0 ~ N(0, T^2 I); deeper layers use the
  /// prior networks on the already-drawn shallower samples with their sigma
  /// scaled by T. T = 0 collapses every layer to its prior mean.
  Degradation sample_degradation_prior(int height, int width, double temperature,
                                       Rng& rng) const {
    if (temperature < 0.0)
      throw std::invalid_argument("sample_degradation_prior: temperature must be >= 0");
    check_divisible(height, width, "sample_degradation_prior");
    Degradation d;
    const int n = cfg_.num_layers;
    d.mu_p.resize(n);
    d.log_sigma_p.resize(n);
    d.sample.resize(n);
    d.eps.resize(n);
    for (int l = 0; l < n; ++l) {
      const int h = height >> l, w = width >> l;
      Tens mu(lat_[l], h, w), ls(lat_[l], h, w);
      if (l > 0) {
        Tens pin = prior_input_from(d.sample, l);
        mu = nn::conv_forward(prior_mu_[l], store_.data(), pin);
        Tens raw = nn::conv_forward(prior_ls_[l], store_.data(), pin);
        ls = clamped(raw);
      }
      Tens eps(lat_[l], h, w), z(lat_[l], h, w);
      for (std::size_t i = 0; i < eps.size(); ++i) {
        eps[i] = static_cast<Scalar>(rng.normal());
        z[i] = mu[i] + static_cast<Scalar>(temperature * std::exp(static_cast<double>(ls[i])) *
                                           static_cast<double>(eps[i]));
      }
      d.mu_p[l] = mu;
      d.log_sigma_p[l] = ls;
      d.sample[l] = std::move(z);
      d.eps[l] = std::move(eps);
    }
    // Prior draws carry their own stats in the posterior slots as well, so
    // the invariants over LatentDegradation hold for both origins.
    d.mu_q = d.mu_p;
    d.log_sigma_q = d.log_sigma_p;
    return d;
  }

  Tens decode_clean(const Content& content) const {
    DecoderCache cache;
    return decode_cached(content, nullptr, cache);
  }

  Tens decode_noisy(const Content& content, const Degradation& degradation) const {
    DecoderCache cache;
    return decode_cached(content, &degradation, cache);
  }

  /// Names of the decoder parameters used by both decode_clean and
  /// decode_noisy (the shared trunk and output head).
  std::vector<std::string> shared_decoder_parameter_names() const {
    std::vector<std::string> names;
    for (const auto& blk : dec_trunk_)
      for (const auto& c : blk) {
        names.push_back(c.name + ".weight");
        names.push_back(c.name + ".bias");
      }
    names.push_back(dec_out_.name + ".weight");
    names.push_back(dec_out_.name + ".bias");
    return names;
  }

  // ---- training path: cached forwards and explicit backwards ----

  void encode_content_cached(const Tens& image, ContentCache& cache) const {
    check_input(image, "encode_content");
    const int n = cfg_.num_layers;
    cache.blocks.resize(n);
    cache.latent.layers.resize(n);
    Tens feat = image;
    for (int l = 0; l < n; ++l) {
      if (l > 0) feat = nn::avgpool2(feat);
      block_forward(content_block_[l], feat, cache.blocks[l]);
      feat = cache.blocks[l].out();
      cache.latent.layers[l] = nn::conv_forward(content_fuse_[l], store_.data(), feat);
    }
  }

  /// dz has one (possibly empty) gradient tensor per layer. Gradients with
  /// respect to the input image are accumulated into *dimage when given.
  void encode_content_backward(const ContentCache& cache, const std::vector<Tens>& dz,
                               Scalar* grad, Tens* dimage = nullptr) const {
    const int n = cfg_.num_layers;
    Tens carry;
    for (int l = n - 1; l >= 0; --l) {
      const Tens& feat = cache.blocks[l].out();
      Tens dfeat(feat.channels(), feat.height(), feat.width());
      if (l < static_cast<int>(dz.size()) && !dz[l].empty())
        nn::conv_backward(content_fuse_[l], store_.data(), feat, dz[l], &dfeat, grad);
      if (!carry.empty()) dfeat.add(carry);
      const bool need_dx = (l > 0) || (dimage != nullptr);
      Tens dblock_in = block_backward(content_block_[l], cache.blocks[l], dfeat, grad, need_dx);
      if (l > 0) {
        const Tens& prev = cache.blocks[l - 1].out();
        carry = Tens(prev.channels(), prev.height(), prev.width());
        nn::avgpool2_backward(dblock_in, carry);
      } else if (dimage) {
        dimage->add(dblock_in);
      }
    }
  }

  void encode_degradation_cached(const Tens& image, Rng& rng, DegradationCache& cache) const {
    check_input(image, "encode_degradation");
    const int n = cfg_.num_layers;
    cache.blocks.resize(n);
    cache.log_sigma_q_raw.resize(n);
    cache.log_sigma_p_raw.resize(n);
    cache.prior_input.resize(n);
    auto& lat = cache.latent;
    lat.mu_q.resize(n);
    lat.log_sigma_q.resize(n);
    lat.mu_p.resize(n);
    lat.log_sigma_p.resize(n);
    lat.sample.resize(n);
    lat.eps.resize(n);

    Tens in = image;
    for (int l = 0; l < n; ++l) {
      if (l > 0) in = nn::avgpool2(nn::concat_channels(cache.blocks[l - 1].out(), lat.sample[l - 1]));
      block_forward(degr_block_[l], in, cache.blocks[l]);
      const Tens& g = cache.blocks[l].out();
      lat.mu_q[l] = nn::conv_forward(degr_mu_[l], store_.data(), g);
      cache.log_sigma_q_raw[l] = nn::conv_forward(degr_ls_[l], store_.data(), g);
      lat.log_sigma_q[l] = clamped(cache.log_sigma_q_raw[l]);
      if (!lat.mu_q[l].all_finite() || !lat.log_sigma_q[l].all_finite())
        throw NumericError("encode_degradation: non-finite statistics at layer " +
                           std::to_string(l + 1));
      Tens eps(lat.mu_q[l].channels(), lat.mu_q[l].height(), lat.mu_q[l].width());
      Tens z = lat.mu_q[l];
      for (std::size_t i = 0; i < z.size(); ++i) {
        eps[i] = static_cast<Scalar>(rng.normal());
        z[i] += static_cast<Scalar>(std::exp(static_cast<double>(lat.log_sigma_q[l][i]))) * eps[i];
      }
      lat.eps[l] = std::move(eps);
      lat.sample[l] = std::move(z);
    }

    // Top-down prior statistics of the drawn samples (layer 0 is N(0, I)).
    for (int l = 0; l < n; ++l) {
      if (l == 0) {
        lat.mu_p[0] = Tens(lat_[0], image.height(), image.width());
        lat.log_sigma_p[0] = lat.mu_p[0];
        cache.log_sigma_p_raw[0] = lat.mu_p[0];
        continue;
      }
      cache.prior_input[l] = prior_input_from(lat.sample, l);
      lat.mu_p[l] = nn::conv_forward(prior_mu_[l], store_.data(), cache.prior_input[l]);
      cache.log_sigma_p_raw[l] = nn::conv_forward(prior_ls_[l], store_.data(), cache.prior_input[l]);
      lat.log_sigma_p[l] = clamped(cache.log_sigma_p_raw[l]);
    }
  }

  /// Backward through the degradation encoder and its prior networks.
  /// Per-layer gradient inputs (empty tensors mean zero):
  ///   dz      — w.r.t. the drawn samples (e.g. from the decoder),
  ///   dmu_q / dls_q / dmu_p / dls_p — w.r.t. the clamped statistics (from KL).
  void encode_degradation_backward(const DegradationCache& cache, std::vector<Tens> dz,
                                   const std::vector<Tens>& dmu_q, const std::vector<Tens>& dls_q,
                                   const std::vector<Tens>& dmu_p, const std::vector<Tens>& dls_p,
                                   Scalar* grad) const {
    const int n = cfg_.num_layers;
    const auto& lat = cache.latent;
    dz.resize(n);
    std::vector<Tens> dg_carry(n);
    for (int l = n - 1; l >= 0; --l) {
      // Prior networks consume samples of shallower layers.
      if (l > 0 && ((l < static_cast<int>(dmu_p.size()) && !dmu_p[l].empty()) ||
                    (l < static_cast<int>(dls_p.size()) && !dls_p[l].empty()))) {
        const Tens& pin = cache.prior_input[l];
        Tens dpin(pin.channels(), pin.height(), pin.width());
        if (!dmu_p[l].empty())
          nn::conv_backward(prior_mu_[l], store_.data(), pin, dmu_p[l], &dpin, grad);
        if (!dls_p[l].empty()) {
          Tens masked = dls_p[l];
          clamp_mask(cache.log_sigma_p_raw[l], masked);
          nn::conv_backward(prior_ls_[l], store_.data(), pin, masked, &dpin, grad);
        }
        int ch0 = 0;
        for (int j = 0; j < l; ++j) {
          Tens part(lat_[j], pin.height(), pin.width());
          for (int c = 0; c < lat_[j]; ++c)
            std::copy(dpin.plane(ch0 + c), dpin.plane(ch0 + c) + pin.height() * pin.width(),
                      part.plane(c));
          ch0 += lat_[j];
          for (int s = 0; s < l - j; ++s) {
            Tens up(part.channels(), part.height() * 2, part.width() * 2);
            nn::avgpool2_backward(part, up);
            part = std::move(up);
          }
          accumulate(dz[j], part);
        }
      }

      // Reparametrization: z = mu + exp(ls) * eps.
      Tens dmu_total = take_or_zero(dmu_q, l, lat.mu_q[l]);
      Tens dls_total = take_or_zero(dls_q, l, lat.log_sigma_q[l]);
      if (!dz[l].empty()) {
        dmu_total.add(dz[l]);
        for (std::size_t i = 0; i < dls_total.size(); ++i)
          dls_total[i] += dz[l][i] * (lat.sample[l][i] - lat.mu_q[l][i]);
      }
      clamp_mask(cache.log_sigma_q_raw[l], dls_total);

      const Tens& g = cache.blocks[l].out();
      Tens dg = dg_carry[l].empty() ? Tens(g.channels(), g.height(), g.width())
                                    : std::move(dg_carry[l]);
      nn::conv_backward(degr_mu_[l], store_.data(), g, dmu_total, &dg, grad);
      nn::conv_backward(degr_ls_[l], store_.data(), g, dls_total, &dg, grad);
      Tens din = block_backward(degr_block_[l], cache.blocks[l], dg, grad, l > 0);
      if (l > 0) {
        const Tens& prev_g = cache.blocks[l - 1].out();
        Tens dcat(prev_g.channels() + lat_[l - 1], prev_g.height(), prev_g.width());
        nn::avgpool2_backward(din, dcat);
        dg_carry[l - 1] = Tens(prev_g.channels(), prev_g.height(), prev_g.width());
        if (dz[l - 1].empty())
          dz[l - 1] = Tens(lat_[l - 1], prev_g.height(), prev_g.width());
        nn::split_channels_backward(dcat, dg_carry[l - 1], dz[l - 1]);
      }
    }
  }

  Tens decode_cached(const Content& content, const Degradation* degradation,
                     DecoderCache& cache) const {
    const Tens& zn = content.layers.back();
    if (degradation) {
      const Tens& dn = degradation->sample.back();
      if (dn.height() != zn.height() || dn.width() != zn.width())
        throw DimensionError("decode_noisy: layer-" + std::to_string(cfg_.num_layers) +
                             " shape mismatch, content " + zn.shape_str() + " vs degradation " +
                             dn.shape_str());
      cache.adapter_input = nn::concat_channels(zn, dn);
      cache.noisy = true;
    } else {
      cache.adapter_input = zn;
      cache.noisy = false;
    }
    Tens t = nn::conv_forward(cache.noisy ? dec_adapt_noisy_ : dec_adapt_clean_, store_.data(),
                              cache.adapter_input);
    const int n = cfg_.num_layers;
    cache.blocks.resize(n);
    for (int i = 0; i < n; ++i) {
      block_forward(dec_trunk_[i], t, cache.blocks[i]);
      t = cache.blocks[i].out();
      if (i < n - 1) t = nn::upsample_nearest2(t);
    }
    return nn::conv_forward(dec_out_, store_.data(), t);
  }

  /// Returns gradients w.r.t. z^{N-1} (and the degradation sample z_n^{N-1}
  /// through *dzn when the cache is from a noisy decode).
  Tens decode_backward(const DecoderCache& cache, const Tens& doutput, Scalar* grad,
                       Tens* dzn = nullptr) const {
    const int n = cfg_.num_layers;
    // Upsampling happens between trunk blocks, so dec.out consumed the last
    // block's output directly.
    const Tens& trunk_out = cache.blocks[n - 1].out();
    Tens dt(trunk_out.channels(), trunk_out.height(), trunk_out.width());
    nn::conv_backward(dec_out_, store_.data(), trunk_out, doutput, &dt, grad);
    for (int i = n - 1; i >= 0; --i) {
      dt = block_backward(dec_trunk_[i], cache.blocks[i], dt, grad, true);
      if (i > 0) {
        const Tens& prev = cache.blocks[i - 1].out();
        Tens dprev(prev.channels(), prev.height(), prev.width());
        nn::upsample_nearest2_backward(dt, dprev);
        dt = std::move(dprev);
      }
    }
    const Tens& ain = cache.adapter_input;
    Tens dain(ain.channels(), ain.height(), ain.width());
    nn::conv_backward(cache.noisy ? dec_adapt_noisy_ : dec_adapt_clean_, store_.data(), ain, dt,
                      &dain, grad);
    if (!cache.noisy) return dain;
    const int zc = lat_[cfg_.num_layers - 1];
    Tens dz(zc, ain.height(), ain.width());
    Tens dn(zc, ain.height(), ain.width());
    nn::split_channels_backward(dain, dz, dn);
    if (dzn) accumulate(*dzn, dn);
    return dz;
  }

  const std::vector<int>& latent_channels() const { return lat_; }

 private:
  void build() {
    const int n = cfg_.num_layers;
    const int cch = cfg_.base_channels;
    content_block_.resize(n);
    degr_block_.resize(n);
    content_fuse_.resize(n);
    degr_mu_.resize(n);
    degr_ls_.resize(n);
    prior_mu_.resize(n);
    prior_ls_.resize(n);
    dec_trunk_.resize(n);

    auto add_block = [&](std::vector<nn::ConvSpec>& blk, const std::string& prefix, int in_c) {
      blk.clear();
      for (int j = 0; j < cfg_.convs_per_block; ++j) {
        blk.push_back(nn::make_conv(store_, prefix + ".conv" + std::to_string(j),
                                    j == 0 ? in_c : cch, cch, 3));
      }
    };

    for (int l = 0; l < n; ++l) {
      add_block(content_block_[l], "content.block" + std::to_string(l),
                l == 0 ? cfg_.input_channels : cch);
      content_fuse_[l] =
          nn::make_conv(store_, "content.fuse" + std::to_string(l), cch, lat_[l], 1);
    }
    for (int l = 0; l < n; ++l) {
      add_block(degr_block_[l], "degr.block" + std::to_string(l),
                l == 0 ? cfg_.input_channels : cch + lat_[l - 1]);
      degr_mu_[l] = nn::make_conv(store_, "degr.post_mu" + std::to_string(l), cch, lat_[l], 1);
      degr_ls_[l] =
          nn::make_conv(store_, "degr.post_logsigma" + std::to_string(l), cch, lat_[l], 1);
    }
    for (int l = 1; l < n; ++l) {
      int in_c = 0;
      for (int j = 0; j < l; ++j) in_c += lat_[j];
      prior_mu_[l] = nn::make_conv(store_, "prior.mu" + std::to_string(l), in_c, lat_[l], 1);
      prior_ls_[l] = nn::make_conv(store_, "prior.logsigma" + std::to_string(l), in_c, lat_[l], 1);
    }
    dec_adapt_clean_ = nn::make_conv(store_, "dec.adapt_clean", lat_[n - 1], cch, 1);
    dec_adapt_noisy_ = nn::make_conv(store_, "dec.adapt_noisy", 2 * lat_[n - 1], cch, 1);
    for (int i = 0; i < n; ++i) add_block(dec_trunk_[i], "dec.trunk" + std::to_string(i), cch);
    dec_out_ = nn::make_conv(store_, "dec.out", cch, cfg_.input_channels, 3);

    for (auto& blk : content_block_)
      for (auto& c : blk) all_convs_.push_back(&c);
    for (auto& c : content_fuse_) all_convs_.push_back(&c);
    for (auto& blk : degr_block_)
      for (auto& c : blk) all_convs_.push_back(&c);
    for (auto& c : degr_mu_) all_convs_.push_back(&c);
    for (auto& c : degr_ls_) all_convs_.push_back(&c);
    for (int l = 1; l < n; ++l) {
      all_convs_.push_back(&prior_mu_[l]);
      all_convs_.push_back(&prior_ls_[l]);
    }
    all_convs_.push_back(&dec_adapt_clean_);
    all_convs_.push_back(&dec_adapt_noisy_);
    for (auto& blk : dec_trunk_)
      for (auto& c : blk) all_convs_.push_back(&c);
    all_convs_.push_back(&dec_out_);
  }

  void check_divisible(int h, int w, const char* op) const {
    const int div = cfg_.spatial_divisor();
    if (h % div != 0 || w % div != 0)
      throw DimensionError(std::string(op) + ": spatial dims " + std::to_string(h) + "x" +
                           std::to_string(w) + " must be divisible by " + std::to_string(div) +
                           " (2^(num_layers-1))");
  }

  void check_input(const Tens& image, const char* op) const {
    if (image.channels() != cfg_.input_channels)
      throw DimensionError(std::string(op) + ": expected " +
                           std::to_string(cfg_.input_channels) + " channels, got " +
                           std::to_string(image.channels()));
    check_divisible(image.height(), image.width(), op);
  }

  Tens clamped(const Tens& raw) const {
    Tens out = raw;
    const Scalar lo = static_cast<Scalar>(cfg_.log_sigma_min);
    const Scalar hi = static_cast<Scalar>(cfg_.log_sigma_max);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::min(hi, std::max(lo, out[i]));
    return out;
  }

  void clamp_mask(const Tens& raw, Tens& dgrad) const {
    const Scalar lo = static_cast<Scalar>(cfg_.log_sigma_min);
    const Scalar hi = static_cast<Scalar>(cfg_.log_sigma_max);
    for (std::size_t i = 0; i < raw.size(); ++i)
      if (raw[i] <= lo || raw[i] >= hi) dgrad[i] = Scalar(0);
  }

  /// Samples of layers < l, each pooled down to layer-l resolution and
  /// concatenated channel-wise (the conditioning set of Eq-style top-down
  /// priors).
  Tens prior_input_from(const std::vector<Tens>& samples, int l) const {
    Tens pin = nn::avgpool2_n(samples[0], l);
    for (int j = 1; j < l; ++j)
      pin = nn::concat_channels(pin, nn::avgpool2_n(samples[j], l - j));
    return pin;
  }

  void block_forward(const std::vector<nn::ConvSpec>& blk, const Tens& input,
                     BlockCache& cache) const {
    cache.acts.clear();
    cache.acts.reserve(blk.size() + 1);
    cache.acts.push_back(input);
    for (const auto& conv : blk) {
      Tens y = nn::conv_forward(conv, store_.data(), cache.acts.back());
      nn::relu_inplace(y);
      cache.acts.push_back(std::move(y));
    }
  }

  Tens block_backward(const std::vector<nn::ConvSpec>& blk, const BlockCache& cache, Tens dy,
                      Scalar* grad, bool need_dx) const {
    for (int j = static_cast<int>(blk.size()) - 1; j >= 0; --j) {
      nn::relu_backward_inplace(cache.acts[j + 1], dy);
      const bool want = need_dx || j > 0;
      Tens dx;
      if (want)
        dx = Tens(cache.acts[j].channels(), cache.acts[j].height(), cache.acts[j].width());
      nn::conv_backward(blk[j], store_.data(), cache.acts[j], dy, want ? &dx : nullptr, grad);
      dy = std::move(dx);
    }
    return dy;
  }

  static Tens take_or_zero(const std::vector<Tens>& v, int i, const Tens& like) {
    if (i < static_cast<int>(v.size()) && !v[i].empty()) return v[i];
    return Tens(like.channels(), like.height(), like.width());
  }

  static void accumulate(Tens& dst, const Tens& src) {
    if (dst.empty())
      dst = src;
    else
      dst.add(src);
  }

  ModelConfig cfg_;
  std::vector<int> lat_;
  nn::ParamStore<Scalar> store_;

  std::vector<std::vector<nn::ConvSpec>> content_block_;
  std::vector<nn::ConvSpec> content_fuse_;
  std::vector<std::vector<nn::ConvSpec>> degr_block_;
  std::vector<nn::ConvSpec> degr_mu_, degr_ls_;
  std::vector<nn::ConvSpec> prior_mu_, prior_ls_;
  nn::ConvSpec dec_adapt_clean_, dec_adapt_noisy_;
  std::vector<std::vector<nn::ConvSpec>> dec_trunk_;
  nn::ConvSpec dec_out_;
  std::vector<const nn::ConvSpec*> all_convs_;
};

}  // namespace ludvae
