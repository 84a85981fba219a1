#include "atten/snnl.hpp"

#include <vector>

namespace atten::snnl {

NodeId snnl_loss(Graph& g, NodeId features, std::span<const int> labels,
                 const SnnlConfig& cfg, SnnlInfo* info) {
  const Tensor& x = g.value(features);
  if (x.rank() != 2) throw Error("snnl: features must be [b,d]");
  const std::size_t b = x.dim(0);
  if (b < 2) throw Error("snnl: batch size must be at least 2");
  if (labels.size() != b) throw Error("snnl: label count does not match batch");
  if (!(cfg.temperature > 0.0)) throw Error("snnl: temperature must be positive");
  if (!(cfg.epsilon > 0.0)) throw Error("snnl: epsilon must be positive");

  Tensor num_mask(Dims{b, b}, 0.0);
  Tensor den_mask(Dims{b, b}, 0.0);
  int degenerate = 0;
  for (std::size_t i = 0; i < b; ++i) {
    bool has_same = cfg.include_self;
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i) den_mask[i * b + j] = 1.0;
      const bool in_num = labels[j] == labels[i] && (j != i || cfg.include_self);
      if (in_num) {
        num_mask[i * b + j] = 1.0;
        has_same = true;
      }
    }
    degenerate += !has_same;
  }
  if (info) info->degenerate_anchors = degenerate;

  const NodeId d2 = g.pairwise_sqdist(features);
  const NodeId kernel = g.exp(g.scale(d2, -1.0 / cfg.temperature));
  const NodeId num =
      g.reduce(g.mul(kernel, g.constant(std::move(num_mask))), {1}, ReduceMode::Sum);
  const NodeId den =
      g.reduce(g.mul(kernel, g.constant(std::move(den_mask))), {1}, ReduceMode::Sum);
  const NodeId ratio = g.div(g.clamp_min(num, cfg.epsilon), den);
  return g.neg(g.reduce_all(g.log(ratio), ReduceMode::Mean));
}

NodeId disease_loss(Graph& g, NodeId features, std::span<const int> labels,
                    double temperature) {
  SnnlConfig cfg;
  cfg.temperature = temperature;
  cfg.include_self = false;
  return snnl_loss(g, features, labels, cfg);
}

NodeId skin_loss(Graph& g, NodeId features, std::span<const int> labels,
                 double temperature) {
  const Tensor& x = g.value(features);
  if (x.rank() != 2) throw Error("snnl: features must be [b,d]");
  if (labels.size() != x.dim(0)) throw Error("snnl: label count does not match batch");

  int max_label = 0;
  for (const int y : labels) max_label = std::max(max_label, y);

  SnnlConfig cfg;
  cfg.temperature = temperature;
  cfg.include_self = true;

  NodeId total{};
  bool have_term = false;
  for (int c = 0; c <= max_label; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) rows.push_back(i);
    }
    if (rows.size() < 2) continue;  // singleton classes contribute 0
    const std::vector<int> sub_labels(rows.size(), c);
    const NodeId sub = g.select_rows(features, std::move(rows));
    const NodeId term = snnl_loss(g, sub, sub_labels, cfg);
    total = have_term ? g.add(total, term) : term;
    have_term = true;
  }
  if (!have_term) return g.constant(Tensor::scalar(0.0));
  return total;
}

NodeId combined_loss(Graph& g, NodeId cross_entropy, std::span<const BlockLosses> blocks,
                     std::span<const double> alphas) {
  if (blocks.size() != alphas.size()) {
    throw Error("combined_loss: " + std::to_string(blocks.size()) + " blocks vs " +
                std::to_string(alphas.size()) + " alphas");
  }
  if (g.value(cross_entropy).size() != 1) throw Error("combined_loss: ce must be scalar");
  NodeId loss = cross_entropy;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (alphas[i] < 0.0) throw Error("combined_loss: alpha must be >= 0");
    if (alphas[i] == 0.0) continue;  // exact ablation identity
    loss = g.add(loss, g.scale(g.sub(blocks[i].disease, blocks[i].skin), alphas[i]));
  }
  return loss;
}

}  // namespace atten::snnl
