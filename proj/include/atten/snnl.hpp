#pragma once

#include <span>

#include "atten/autodiff.hpp"

namespace atten::snnl {

struct SnnlConfig {
  double temperature = 1.0;
  bool include_self = false;  // count the j == i term in the numerator
  double epsilon = 1e-12;     // numerator floor for anchors with no same-class neighbor
};

struct SnnlInfo {
  // anchors whose same-class numerator is structurally empty (loss floored)
  int degenerate_anchors = 0;
};

// Soft nearest neighbor loss over flattened per-sample features [b,d]:
//   -(1/b) sum_i log( sum_{j in num(i)} e^{-|x_i-x_j|^2/T}
//                   / sum_{k != i}      e^{-|x_i-x_k|^2/T} )
// where num(i) is the same-class set, excluding i itself unless
// cfg.include_self. High values mean classes are entangled in feature space.
NodeId snnl_loss(Graph& g, NodeId features, std::span<const int> labels,
                 const SnnlConfig& cfg, SnnlInfo* info = nullptr);

// Entanglement of the disease-focused features across the whole batch;
// minimized during training.
NodeId disease_loss(Graph& g, NodeId features, std::span<const int> labels,
                    double temperature);

// Per-class entanglement of the skin-focused features with numerator
// self-inclusion, summed over classes. Every per-class term is < 0 and the
// trainer maximizes the sum (it enters the objective with a minus sign).
// Classes with fewer than two samples in the batch contribute 0.
NodeId skin_loss(Graph& g, NodeId features, std::span<const int> labels,
                 double temperature);

struct BlockLosses {
  NodeId disease;
  NodeId skin;
};

// ce + sum_i alpha_i * (disease_i - skin_i). Terms with alpha_i == 0 are not
// added at all, so the all-zero case is the cross-entropy node itself.
NodeId combined_loss(Graph& g, NodeId cross_entropy, std::span<const BlockLosses> blocks,
                     std::span<const double> alphas);

}  // namespace atten::snnl
