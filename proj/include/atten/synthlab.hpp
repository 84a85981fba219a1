#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "atten/attention.hpp"
#include "atten/autodiff.hpp"
#include "atten/fairness.hpp"
#include "atten/rng.hpp"

namespace atten::synthlab {

// Synthetic lesion images: the class is decided by lesion radius bucket, the
// binary "tone" sensitive attribute is the background intensity and is
// spuriously correlated with class parity at strength `train_correlation`
// (P(dark | odd class) = rho, P(dark | even class) = 1 - rho).
struct SynthSpec {
  std::size_t image_size = 32;  // divisible by 4
  int num_classes = 3;
  double train_correlation = 0.9;  // applies to train and val
  double test_correlation = 0.5;   // balanced by default
  std::size_t total_samples = 600;  // split 6:2:2
  double noise_std = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthSample {
  std::string id;
  Tensor image;  // [1,S,S]
  int label = 0;
  int sensitive = 0;  // tone: 0 light, 1 dark; never read during training
  Tensor mask;        // [1,S,S] binary lesion region (the ground-truth guided mask)
};

struct Dataset {
  std::vector<SynthSample> train, val, test;
};

Dataset generate(const SynthSpec& spec);

// Two conv blocks (conv3x3 -> relu -> maxpool2), an AttEN block after each
// when attention is on, global average pooling and a linear head.
struct ToyModelConfig {
  std::size_t image_size = 32;
  int num_classes = 3;
  std::size_t conv1_channels = 4;
  std::size_t conv2_channels = 8;
  bool attention = false;
  bool use_guided_mask = false;
  std::size_t reduction = 2;
  std::size_t spatial_kernel = 7;

  attention::AttenConfig atten1_config() const;
  attention::AttenConfig atten2_config() const;
  void validate() const;
};

struct ToyModel {
  ToyModelConfig cfg;
  Tensor conv1_w, conv1_b;  // [C1,1,3,3], [C1]
  Tensor conv2_w, conv2_b;  // [C2,C1,3,3], [C2]
  Tensor fc_w, fc_b;        // [C2,K], [K]
  attention::AttenParams at1, at2;  // present when cfg.attention

  static ToyModel init(const ToyModelConfig& cfg, std::uint64_t seed);
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  bool bitwise_equal(const ToyModel& other) const;
};

// Handles to one graph's parameter leaves.
struct ModelNodes {
  NodeId conv1_w{}, conv1_b{}, conv2_w{}, conv2_b{}, fc_w{}, fc_b{};
  attention::AttenParamNodes at1, at2;
};
ModelNodes model_nodes(Graph& g, const ToyModel& model, bool trainable);

struct SampleOutputs {
  NodeId logits{};  // [K]
  // flattened per-block features; valid only when attention is on
  NodeId disease1{}, skin1{}, disease2{}, skin2{};
};
SampleOutputs forward_sample(Graph& g, const ToyModel& model, const ModelNodes& nodes,
                             const SynthSample& sample);

// Mean softmax cross entropy over logit rows [b,K].
NodeId cross_entropy(Graph& g, NodeId logits, std::span<const int> labels);

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  std::vector<double> alphas = {0.05, 0.05};  // one per AttEN block
  double temperature = 1.0;
  std::uint64_t seed = 1;  // shuffle stream; model init is seeded separately
  // Test hook: bypass the combined objective entirely and train on the bare
  // cross-entropy node. With all alphas zero the normal path must match this
  // bitwise; the ablation tests assert exactly that.
  bool force_ce_only = false;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> train_loss;  // per-epoch mean over samples
  std::vector<double> val_f1;     // per-epoch validation macro F1
  int best_epoch = -1;            // epoch whose parameters were kept
};

// Plain SGD on the combined objective (or bare CE for baseline models). The
// sensitive attribute is never read here; the best epoch by validation macro
// F1 is restored into `model` on return. Non-finite losses abort with the
// offending epoch/step named.
TrainTrace train(ToyModel& model, const std::vector<SynthSample>& train_data,
                 const std::vector<SynthSample>& val_data, const TrainConfig& cfg);

std::vector<int> predict(const ToyModel& model, std::span<const SynthSample> samples);

struct Evaluation {
  std::vector<fairness::PredictionRecord> records;
  fairness::FairnessReport report;
};
Evaluation evaluate(const ToyModel& model, std::span<const SynthSample> samples);

}  // namespace atten::synthlab
