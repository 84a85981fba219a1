#include "atten/attention.hpp"

#include <cmath>

#include "atten/kernels.hpp"

namespace atten::attention {

void AttenConfig::validate() const {
  if (channels == 0) throw Error("atten: channels must be positive");
  if (reduction == 0 || channels < reduction) {
    throw Error("atten: need channels >= reduction, got C=" + std::to_string(channels) +
                " r=" + std::to_string(reduction));
  }
  if (spatial_kernel % 2 == 0) throw Error("atten: spatial kernel must be odd");
}

AttenParams AttenParams::init(const AttenConfig& cfg, Rng rng) {
  cfg.validate();
  const std::size_t hidden = cfg.channels / cfg.reduction;
  const std::size_t k = cfg.spatial_kernel;
  AttenParams p;
  p.mlp_w0 = Tensor(Dims{cfg.channels, hidden});
  p.mlp_w1 = Tensor(Dims{hidden, cfg.channels});
  p.conv_w = Tensor(Dims{1, 2, k, k});
  p.conv_b = Tensor(Dims{1, 1, 1}, 0.0);

  Rng r0 = rng.fork("mlp_w0");
  const double s0 = std::sqrt(2.0 / static_cast<double>(cfg.channels));
  for (std::size_t i = 0; i < p.mlp_w0.size(); ++i) p.mlp_w0[i] = s0 * r0.next_normal();

  Rng r1 = rng.fork("mlp_w1");
  const double s1 = std::sqrt(2.0 / static_cast<double>(hidden));
  for (std::size_t i = 0; i < p.mlp_w1.size(); ++i) p.mlp_w1[i] = s1 * r1.next_normal();

  Rng rc = rng.fork("conv_w");
  const double sc = std::sqrt(2.0 / static_cast<double>(2 * k * k));
  for (std::size_t i = 0; i < p.conv_w.size(); ++i) p.conv_w[i] = sc * rc.next_normal();
  return p;
}

AttenParamNodes AttenParamNodes::of(Graph& g, const AttenParams& p, bool trainable) {
  AttenParamNodes n;
  n.mlp_w0 = g.input(p.mlp_w0, trainable);
  n.mlp_w1 = g.input(p.mlp_w1, trainable);
  n.conv_w = g.input(p.conv_w, trainable);
  n.conv_b = g.input(p.conv_b, trainable);
  return n;
}

namespace {

// shared two-layer MLP applied to a pooled [1,C] vector
NodeId mlp(Graph& g, NodeId v, const AttenParamNodes& params) {
  return g.matmul(g.relu(g.matmul(v, params.mlp_w0)), params.mlp_w1);
}

}  // namespace

NodeId channel_attention(Graph& g, NodeId f, const AttenParamNodes& params,
                         const AttenConfig& cfg) {
  cfg.validate();
  const Tensor& fv = g.value(f);
  if (fv.rank() != 3 || fv.dim(0) != cfg.channels) {
    throw Error("channel_attention: expected [C,H,W] with C=" + std::to_string(cfg.channels) +
                ", got " + dims_to_string(fv.dims()));
  }
  const std::size_t c = cfg.channels;
  const NodeId avg = g.reshape(g.reduce(f, {1, 2}, ReduceMode::Mean), {1, c});
  const NodeId mx = g.reshape(g.reduce(f, {1, 2}, ReduceMode::Max), {1, c});
  const NodeId pre = g.add(mlp(g, avg, params), mlp(g, mx, params));
  return g.reshape(g.sigmoid(pre), {c, 1, 1});
}

NodeId spatial_attention(Graph& g, NodeId f_c, const AttenParamNodes& params,
                         const AttenConfig& cfg) {
  cfg.validate();
  const Tensor& fv = g.value(f_c);
  if (fv.rank() != 3) throw Error("spatial_attention: expected [C,H,W]");
  const std::size_t h = fv.dim(1), w = fv.dim(2);
  const NodeId mean_c = g.reshape(g.reduce(f_c, {0}, ReduceMode::Mean), {1, h, w});
  const NodeId max_c = g.reshape(g.reduce(f_c, {0}, ReduceMode::Max), {1, h, w});
  const NodeId parts[2] = {mean_c, max_c};
  const NodeId cat = g.concat0(parts);
  const NodeId conv = g.conv2d(cat, params.conv_w, (cfg.spatial_kernel - 1) / 2);
  return g.sigmoid(g.add(conv, params.conv_b));
}

Tensor pool_mask(const Tensor& mask, std::size_t h, std::size_t w) {
  if (mask.rank() != 3 || mask.dim(0) != 1) throw Error("guided mask must be [1,H,W]");
  for (const double v : mask.vec()) {
    if (v != 0.0 && v != 1.0) throw Error("guided mask must be binary");
  }
  const std::size_t h0 = mask.dim(1), w0 = mask.dim(2);
  if (h == 0 || w == 0 || h0 % h != 0 || w0 % w != 0 || h0 / h != w0 / w) {
    throw Error("guided mask " + dims_to_string(mask.dims()) +
                " is not an integer multiple of feature map " + std::to_string(h) + "x" +
                std::to_string(w));
  }
  const std::size_t win = h0 / h;
  if (win == 1) return Tensor(Dims{1, h, w}, mask.vec());
  Tensor out(Dims{1, h, w});
  kern::pool2d_max(mask.data(), out.data(), nullptr, 1, h0, w0, win);
  return out;
}

FeatureBundle atten_forward(Graph& g, NodeId f, const Tensor* guided_mask,
                            const AttenConfig& cfg, const AttenParamNodes& params) {
  cfg.validate();
  FeatureBundle b;
  b.input = f;
  b.channel_map = channel_attention(g, f, params, cfg);
  const NodeId f_c = g.mul(b.channel_map, f);
  b.spatial_map = spatial_attention(g, f_c, params, cfg);
  b.refined = g.mul(b.spatial_map, f_c);

  const Tensor& fv = g.value(f);
  const NodeId ones = g.constant(Tensor(Dims{1, fv.dim(1), fv.dim(2)}, 1.0));
  // the inverse map multiplies the original input feature, not f_c
  b.inverse = g.mul(g.sub(ones, b.spatial_map), f);

  if (cfg.use_guided_mask) {
    if (!guided_mask) throw Error("atten_forward: config requires a guided mask");
    const Tensor pooled = pool_mask(*guided_mask, fv.dim(1), fv.dim(2));
    b.guided = g.add(b.refined, g.mul(g.constant(pooled), f));
  } else {
    b.guided = b.refined;
  }
  return b;
}

}  // namespace atten::attention
