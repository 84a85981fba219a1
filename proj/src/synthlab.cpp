#include "atten/synthlab.hpp"

#include <algorithm>
#include <cmath>

#include "atten/snnl.hpp"

namespace atten::synthlab {

void SynthSpec::validate() const {
  if (image_size < 8 || image_size % 4 != 0) {
    throw Error("synth: image_size must be >= 8 and divisible by 4");
  }
  if (num_classes < 2) throw Error("synth: need at least 2 classes");
  if (train_correlation < 0.0 || train_correlation > 1.0 || test_correlation < 0.0 ||
      test_correlation > 1.0) {
    throw Error("synth: correlations must lie in [0,1]");
  }
  if (total_samples < 10) throw Error("synth: need at least 10 samples");
  if (noise_std < 0.0) throw Error("synth: noise_std must be >= 0");
  // largest radius bucket must fit inside the image with a margin
  const double unit = static_cast<double>(image_size) / 32.0;
  const double r_max = (3.0 + 2.0 * (num_classes - 1) + 1.5) * unit;
  if (r_max + 2.0 >= static_cast<double>(image_size) / 2.0) {
    throw Error("synth: class count infeasible for image size (lesion would not fit)");
  }
}

namespace {

constexpr double kLightTone = 0.2;
constexpr double kDarkTone = 0.8;
constexpr double kLesionIntensity = 0.5;

SynthSample make_sample(const SynthSpec& spec, const std::string& id, int label,
                        double dark_given_odd, Rng rng) {
  const std::size_t s = spec.image_size;
  const double unit = static_cast<double>(s) / 32.0;

  const bool odd = label % 2 == 1;
  const double p_dark = odd ? dark_given_odd : 1.0 - dark_given_odd;
  const int tone = rng.next_bernoulli(p_dark) ? 1 : 0;

  const double r_lo = (3.0 + 2.0 * label) * unit;
  const double radius = r_lo + 1.5 * unit * rng.next_double();
  const double aspect = 0.85 + 0.3 * rng.next_double();  // mild ellipse jitter

  const double margin = radius * std::max(aspect, 1.0 / aspect) + 1.0;
  const double cx = margin + (static_cast<double>(s) - 2.0 * margin) * rng.next_double();
  const double cy = margin + (static_cast<double>(s) - 2.0 * margin) * rng.next_double();

  SynthSample out;
  out.id = id;
  out.label = label;
  out.sensitive = tone;
  out.image = Tensor(Dims{1, s, s});
  out.mask = Tensor(Dims{1, s, s});

  const double bg = tone ? kDarkTone : kLightTone;
  const double r2 = radius * radius;
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const double dx = (static_cast<double>(x) - cx) * aspect;
      const double dy = (static_cast<double>(y) - cy) / aspect;
      const bool lesion = dx * dx + dy * dy <= r2;
      const std::size_t i = y * s + x;
      out.mask[i] = lesion ? 1.0 : 0.0;
      out.image[i] = (lesion ? kLesionIntensity : bg) + spec.noise_std * rng.next_normal();
    }
  }
  return out;
}

std::vector<SynthSample> make_split(const SynthSpec& spec, const char* name,
                                    std::size_t count, double correlation) {
  const Rng split_rng = Rng(spec.seed).fork(name);
  std::vector<SynthSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04zu", name, i);
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
    out.push_back(make_sample(spec, id, label, correlation, split_rng.fork(i)));
  }
  return out;
}

}  // namespace

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n_train = spec.total_samples * 6 / 10;
  const std::size_t n_val = spec.total_samples * 2 / 10;
  const std::size_t n_test = spec.total_samples - n_train - n_val;
  Dataset d;
  d.train = make_split(spec, "train", n_train, spec.train_correlation);
  d.val = make_split(spec, "val", n_val, spec.train_correlation);
  d.test = make_split(spec, "test", n_test, spec.test_correlation);
  return d;
}

attention::AttenConfig ToyModelConfig::atten1_config() const {
  attention::AttenConfig c;
  c.channels = conv1_channels;
  c.reduction = reduction;
  c.spatial_kernel = spatial_kernel;
  c.use_guided_mask = use_guided_mask;
  return c;
}

attention::AttenConfig ToyModelConfig::atten2_config() const {
  attention::AttenConfig c = atten1_config();
  c.channels = conv2_channels;
  return c;
}

void ToyModelConfig::validate() const {
  if (image_size < 8 || image_size % 4 != 0) {
    throw Error("model: image_size must be >= 8 and divisible by 4");
  }
  if (num_classes < 2) throw Error("model: need at least 2 classes");
  if (conv1_channels == 0 || conv2_channels == 0) throw Error("model: zero channels");
  if (attention) {
    atten1_config().validate();
    atten2_config().validate();
  }
}

ToyModel ToyModel::init(const ToyModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ToyModel m;
  m.cfg = cfg;
  const Rng root(seed);
  const auto fill_normal = [&root](Tensor& t, const char* name, double stddev) {
    Rng r = root.fork(name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * r.next_normal();
  };

  m.conv1_w = Tensor(Dims{cfg.conv1_channels, 1, 3, 3});
  fill_normal(m.conv1_w, "conv1_w", std::sqrt(2.0 / 9.0));
  m.conv1_b = Tensor(Dims{cfg.conv1_channels}, 0.0);
  m.conv2_w = Tensor(Dims{cfg.conv2_channels, cfg.conv1_channels, 3, 3});
  fill_normal(m.conv2_w, "conv2_w", std::sqrt(2.0 / (9.0 * static_cast<double>(cfg.conv1_channels))));
  m.conv2_b = Tensor(Dims{cfg.conv2_channels}, 0.0);
  m.fc_w = Tensor(Dims{cfg.conv2_channels, static_cast<std::size_t>(cfg.num_classes)});
  fill_normal(m.fc_w, "fc_w", std::sqrt(1.0 / static_cast<double>(cfg.conv2_channels)));
  m.fc_b = Tensor(Dims{static_cast<std::size_t>(cfg.num_classes)}, 0.0);
  if (cfg.attention) {
    m.at1 = attention::AttenParams::init(cfg.atten1_config(), root.fork("atten1"));
    m.at2 = attention::AttenParams::init(cfg.atten2_config(), root.fork("atten2"));
  }
  return m;
}

std::vector<Tensor*> ToyModel::parameters() {
  std::vector<Tensor*> p = {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b};
  if (cfg.attention) {
    for (auto* a : {&at1, &at2}) {
      p.push_back(&a->mlp_w0);
      p.push_back(&a->mlp_w1);
      p.push_back(&a->conv_w);
      p.push_back(&a->conv_b);
    }
  }
  return p;
}

std::vector<const Tensor*> ToyModel::parameters() const {
  auto mut = const_cast<ToyModel*>(this)->parameters();
  return std::vector<const Tensor*>(mut.begin(), mut.end());
}

bool ToyModel::bitwise_equal(const ToyModel& other) const {
  const auto a = parameters();
  const auto b = other.parameters();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i]->bitwise_equal(*b[i])) return false;
  }
  return true;
}

ModelNodes model_nodes(Graph& g, const ToyModel& model, bool trainable) {
  ModelNodes n;
  n.conv1_w = g.input(model.conv1_w, trainable);
  n.conv1_b = g.input(model.conv1_b, trainable);
  n.conv2_w = g.input(model.conv2_w, trainable);
  n.conv2_b = g.input(model.conv2_b, trainable);
  n.fc_w = g.input(model.fc_w, trainable);
  n.fc_b = g.input(model.fc_b, trainable);
  if (model.cfg.attention) {
    n.at1 = attention::AttenParamNodes::of(g, model.at1, trainable);
    n.at2 = attention::AttenParamNodes::of(g, model.at2, trainable);
  }
  return n;
}

namespace {

NodeId conv_block(Graph& g, NodeId x, NodeId w, NodeId b, std::size_t channels) {
  const NodeId conv = g.conv2d(x, w, 1);
  const NodeId biased = g.add(conv, g.reshape(b, {channels, 1, 1}));
  return g.pool2d(g.relu(biased), 2, PoolMode::Max);
}

NodeId flatten(Graph& g, NodeId x) { return g.reshape(x, {g.value(x).size()}); }

}  // namespace

SampleOutputs forward_sample(Graph& g, const ToyModel& model, const ModelNodes& nodes,
                             const SynthSample& sample) {
  const ToyModelConfig& cfg = model.cfg;
  SampleOutputs out;
  const NodeId x = g.constant(sample.image);
  const Tensor* mask = cfg.attention && cfg.use_guided_mask ? &sample.mask : nullptr;

  NodeId h = conv_block(g, x, nodes.conv1_w, nodes.conv1_b, cfg.conv1_channels);
  if (cfg.attention) {
    const auto b1 = attention::atten_forward(g, h, mask, cfg.atten1_config(), nodes.at1);
    out.disease1 = flatten(g, b1.guided);
    out.skin1 = flatten(g, b1.inverse);
    h = b1.guided;
  }
  h = conv_block(g, h, nodes.conv2_w, nodes.conv2_b, cfg.conv2_channels);
  if (cfg.attention) {
    const auto b2 = attention::atten_forward(g, h, mask, cfg.atten2_config(), nodes.at2);
    out.disease2 = flatten(g, b2.guided);
    out.skin2 = flatten(g, b2.inverse);
    h = b2.guided;
  }

  const NodeId pooled = g.reshape(g.reduce(h, {1, 2}, ReduceMode::Mean),
                                  {1, cfg.conv2_channels});
  const NodeId logits = g.add(g.matmul(pooled, nodes.fc_w),
                              g.reshape(nodes.fc_b, {1, static_cast<std::size_t>(cfg.num_classes)}));
  out.logits = g.reshape(logits, {static_cast<std::size_t>(cfg.num_classes)});
  return out;
}

NodeId cross_entropy(Graph& g, NodeId logits, std::span<const int> labels) {
  const Tensor& lv = g.value(logits);
  if (lv.rank() != 2) throw Error("cross_entropy: logits must be [b,K]");
  const std::size_t b = lv.dim(0);
  const std::size_t k = lv.dim(1);
  if (labels.size() != b) throw Error("cross_entropy: label count mismatch");
  Tensor onehot(Dims{b, k}, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw Error("cross_entropy: label out of range");
    }
    onehot[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  const NodeId row_max = g.reshape(g.reduce(logits, {1}, ReduceMode::Max), {b, 1});
  const NodeId shifted = g.sub(logits, row_max);
  const NodeId lse = g.add(g.log(g.reduce(g.exp(shifted), {1}, ReduceMode::Sum)),
                           g.reshape(row_max, {b}));
  const NodeId picked = g.reduce(g.mul(logits, g.constant(std::move(onehot))), {1},
                                 ReduceMode::Sum);
  return g.reduce_all(g.sub(lse, picked), ReduceMode::Mean);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("train: epochs must be >= 1");
  if (batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error("train: learning rate must be >= 0");
  if (!(temperature > 0.0)) throw Error("train: temperature must be positive");
  for (const double a : alphas) {
    if (a < 0.0) throw Error("train: alphas must be >= 0");
  }
}

TrainTrace train(ToyModel& model, const std::vector<SynthSample>& train_data,
                 const std::vector<SynthSample>& val_data, const TrainConfig& cfg) {
  cfg.validate();
  model.cfg.validate();
  if (train_data.empty()) throw Error("train: no training data");
  if (val_data.empty()) throw Error("train: no validation data");
  if (model.cfg.attention && !cfg.force_ce_only && cfg.alphas.size() != 2) {
    throw Error("train: expected one alpha per AttEN block (2), got " +
                std::to_string(cfg.alphas.size()));
  }

  const Rng shuffle_root = Rng(cfg.seed).fork("shuffle");
  const std::size_t n = train_data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<int> val_true;
  val_true.reserve(val_data.size());
  for (const auto& s : val_data) val_true.push_back(s.label);

  TrainTrace trace;
  std::vector<Tensor> best_params;
  double best_f1 = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = shuffle_root.fork(static_cast<std::uint64_t>(epoch));
    erng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bsize = std::min(cfg.batch_size, n - start);
      try {
        Graph g;
        const ModelNodes nodes = model_nodes(g, model, true);
        std::vector<NodeId> logit_rows;
        std::vector<NodeId> d1, s1, d2, s2;
        std::vector<int> labels;
        logit_rows.reserve(bsize);
        labels.reserve(bsize);
        for (std::size_t i = 0; i < bsize; ++i) {
          const SynthSample& sample = train_data[order[start + i]];
          const SampleOutputs o = forward_sample(g, model, nodes, sample);
          logit_rows.push_back(o.logits);
          labels.push_back(sample.label);
          if (model.cfg.attention) {
            d1.push_back(o.disease1);
            s1.push_back(o.skin1);
            d2.push_back(o.disease2);
            s2.push_back(o.skin2);
          }
        }
        const NodeId logits = g.stack_rows(logit_rows);
        const NodeId ce = cross_entropy(g, logits, labels);

        NodeId loss = ce;
        if (!cfg.force_ce_only && model.cfg.attention && bsize >= 2) {
          const auto block = [&](std::vector<NodeId>& dv, std::vector<NodeId>& sv) {
            const NodeId df = g.stack_rows(dv);
            const NodeId sf = g.stack_rows(sv);
            return snnl::BlockLosses{snnl::disease_loss(g, df, labels, cfg.temperature),
                                     snnl::skin_loss(g, sf, labels, cfg.temperature)};
          };
          const snnl::BlockLosses blocks[2] = {block(d1, s1), block(d2, s2)};
          loss = snnl::combined_loss(g, ce, blocks, cfg.alphas);
        }

        loss_sum += g.value(loss)[0] * static_cast<double>(bsize);
        g.backward(loss);

        const std::vector<Tensor*> params = model.parameters();
        const NodeId param_ids[] = {nodes.conv1_w, nodes.conv1_b, nodes.conv2_w,
                                    nodes.conv2_b, nodes.fc_w,    nodes.fc_b,
                                    nodes.at1.mlp_w0, nodes.at1.mlp_w1, nodes.at1.conv_w,
                                    nodes.at1.conv_b, nodes.at2.mlp_w0, nodes.at2.mlp_w1,
                                    nodes.at2.conv_w, nodes.at2.conv_b};
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Tensor& grad = g.grad(param_ids[p]);
          Tensor& value = *params[p];
          for (std::size_t i = 0; i < value.size(); ++i) {
            value[i] -= cfg.learning_rate * grad[i];
          }
        }
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", step " +
                    std::to_string(start / cfg.batch_size) + ": " + e.what());
      }
    }
    trace.train_loss.push_back(loss_sum / static_cast<double>(n));

    const std::vector<int> val_pred = predict(model, val_data);
    const double f1 = fairness::macro_f1(val_true, val_pred, model.cfg.num_classes);
    trace.val_f1.push_back(f1);
    if (f1 > best_f1) {
      best_f1 = f1;
      trace.best_epoch = epoch;
      best_params.clear();
      for (const Tensor* t : model.parameters()) best_params.push_back(*t);
    }
  }

  const std::vector<Tensor*> params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
  return trace;
}

std::vector<int> predict(const ToyModel& model, std::span<const SynthSample> samples) {
  std::vector<int> preds;
  preds.reserve(samples.size());
  for (const SynthSample& s : samples) {
    Graph g;
    const ModelNodes nodes = model_nodes(g, model, false);
    const SampleOutputs o = forward_sample(g, model, nodes, s);
    const Tensor& logits = g.value(o.logits);
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k) {
      if (logits[k] > logits[best]) best = k;
    }
    preds.push_back(static_cast<int>(best));
  }
  return preds;
}

Evaluation evaluate(const ToyModel& model, std::span<const SynthSample> samples) {
  if (samples.empty()) throw Error("evaluate: empty split");
  const std::vector<int> preds = predict(model, samples);
  Evaluation ev;
  ev.records.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ev.records.push_back(
        {samples[i].id, samples[i].label, preds[i], samples[i].sensitive});
  }
  ev.report = fairness::eval(fairness::tally(ev.records, model.cfg.num_classes));
  return ev;
}

}  // namespace atten::synthlab
