#pragma once

#include "atten/autodiff.hpp"
#include "atten/rng.hpp"

namespace atten::attention {

struct AttenConfig {
  std::size_t channels = 0;
  std::size_t reduction = 8;       // MLP hidden width = channels / reduction
  std::size_t spatial_kernel = 7;  // odd
  bool use_guided_mask = false;

  void validate() const;
};

// Trainable state of one block. The channel MLP is shared between the avg
// and max branches and carries no bias; the spatial conv has one.
struct AttenParams {
  Tensor mlp_w0;  // [C, C/r]
  Tensor mlp_w1;  // [C/r, C]
  Tensor conv_w;  // [1, 2, k, k]
  Tensor conv_b;  // [1, 1, 1]

  static AttenParams init(const AttenConfig& cfg, Rng rng);
};

// Per-graph handles to the parameters above.
struct AttenParamNodes {
  NodeId mlp_w0{}, mlp_w1{}, conv_w{}, conv_b{};

  static AttenParamNodes of(Graph& g, const AttenParams& p, bool trainable);
};

struct FeatureBundle {
  NodeId input;        // F [C,H,W]
  NodeId channel_map;  // M_c [C,1,1], entries in (0,1)
  NodeId spatial_map;  // M_s [1,H,W], entries in (0,1)
  NodeId refined;      // M_s * (M_c * F), fed to the disease-side loss
  NodeId inverse;      // (1 - M_s) * F, fed to the skin-side loss
  NodeId guided;       // refined, plus pooled-mask * F when a mask is in use
};

// M_c = sigmoid(MLP(avgpool(F)) + MLP(maxpool(F)))
NodeId channel_attention(Graph& g, NodeId f, const AttenParamNodes& params,
                         const AttenConfig& cfg);

// M_s = sigmoid(conv_kxk(concat(channel-mean, channel-max)) + b)
NodeId spatial_attention(Graph& g, NodeId f_c, const AttenParamNodes& params,
                         const AttenConfig& cfg);

// Full block. When cfg.use_guided_mask, `guided_mask` must be a binary
// [1,H0,W0] tensor whose resolution is an integer multiple of the feature
// map's; it is max-pooled down and injected additively (guided = refined +
// pooled * F), so an all-zero mask reproduces the no-mask forward exactly.
FeatureBundle atten_forward(Graph& g, NodeId f, const Tensor* guided_mask,
                            const AttenConfig& cfg, const AttenParamNodes& params);

// Max-pool a binary mask [1,H0,W0] to [1,h,w]. The window H0/h must be
// integral and equal to W0/w; no resampling is ever done.
Tensor pool_mask(const Tensor& mask, std::size_t h, std::size_t w);

}  // namespace atten::attention
