#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "atten/snnl.hpp"
#include "atten/synthlab.hpp"
#include "test_util.hpp"

using namespace atten;
using namespace atten::synthlab;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.image_size = 16;
  spec.num_classes = 3;
  spec.total_samples = 60;
  spec.seed = 7;
  return spec;
}

ToyModelConfig small_model_config(bool attention, bool mask) {
  ToyModelConfig cfg;
  cfg.image_size = 16;
  cfg.num_classes = 3;
  cfg.conv1_channels = 2;
  cfg.conv2_channels = 4;
  cfg.attention = attention;
  cfg.use_guided_mask = mask;
  cfg.reduction = 2;
  cfg.spatial_kernel = 3;
  return cfg;
}

// test-side estimator: joint tone/class mutual information in nats
double mutual_information(const std::vector<SynthSample>& samples, int num_classes) {
  std::vector<double> joint(static_cast<std::size_t>(2 * num_classes), 0.0);
  for (const auto& s : samples) {
    joint[static_cast<std::size_t>(s.sensitive * num_classes + s.label)] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  double mi = 0.0;
  for (int t = 0; t < 2; ++t) {
    for (int c = 0; c < num_classes; ++c) {
      const double pxy = joint[static_cast<std::size_t>(t * num_classes + c)] / n;
      if (pxy == 0.0) continue;
      double px = 0.0, py = 0.0;
      for (int c2 = 0; c2 < num_classes; ++c2)
        px += joint[static_cast<std::size_t>(t * num_classes + c2)] / n;
      for (int t2 = 0; t2 < 2; ++t2)
        py += joint[static_cast<std::size_t>(t2 * num_classes + c)] / n;
      mi += pxy * std::log(pxy / (px * py));
    }
  }
  return mi;
}

}  // namespace

TEST_CASE("generate is deterministic and splits 6:2:2 disjointly") {
  const SynthSpec spec = small_spec();
  const Dataset a = generate(spec);
  const Dataset b = generate(spec);
  CHECK(a.train.size() == 36);
  CHECK(a.val.size() == 12);
  CHECK(a.test.size() == 12);

  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].image.bitwise_equal(b.train[i].image));
    CHECK(a.train[i].mask.bitwise_equal(b.train[i].mask));
    CHECK(a.train[i].label == b.train[i].label);
    CHECK(a.train[i].sensitive == b.train[i].sensitive);
  }

  std::set<std::string> ids;
  for (const auto* split : {&a.train, &a.val, &a.test}) {
    for (const auto& s : *split) ids.insert(s.id);
  }
  CHECK(ids.size() == 60);  // no id collisions across splits

  SynthSpec other = spec;
  other.seed = 8;
  const Dataset c = generate(other);
  CHECK_FALSE(a.train[0].image.bitwise_equal(c.train[0].image));
}

TEST_CASE("perfect correlation makes tone predict class parity") {
  SynthSpec spec = small_spec();
  spec.train_correlation = 1.0;
  spec.total_samples = 200;
  const Dataset d = generate(spec);
  for (const auto& s : d.train) CHECK(s.sensitive == s.label % 2);
  for (const auto& s : d.val) CHECK(s.sensitive == s.label % 2);
}

TEST_CASE("balanced correlation leaves tone and class independent") {
  SynthSpec spec;
  spec.image_size = 16;
  spec.num_classes = 3;
  spec.train_correlation = 0.5;
  spec.total_samples = 10000;
  spec.seed = 3;
  const Dataset d = generate(spec);
  std::vector<SynthSample> pool = d.train;
  pool.insert(pool.end(), d.val.begin(), d.val.end());
  CHECK(pool.size() == 8000);
  CHECK(std::abs(mutual_information(pool, 3)) < 0.02);
}

TEST_CASE("masks are binary, non-empty, and mark the lesion") {
  const Dataset d = generate(small_spec());
  for (const auto& s : d.train) {
    double area = 0.0;
    for (const double v : s.mask.vec()) {
      CHECK((v == 0.0 || v == 1.0));
      area += v;
    }
    CHECK(area > 0.0);
    CHECK(area < static_cast<double>(s.mask.size()));
  }
  // larger class buckets have larger lesions on average
  double mean_area[3] = {0, 0, 0};
  int count[3] = {0, 0, 0};
  for (const auto& s : d.train) {
    double area = 0.0;
    for (const double v : s.mask.vec()) area += v;
    mean_area[s.label] += area;
    ++count[s.label];
  }
  for (int c = 0; c < 3; ++c) mean_area[c] /= count[c];
  CHECK(mean_area[0] < mean_area[1]);
  CHECK(mean_area[1] < mean_area[2]);
}

TEST_CASE("spec validation") {
  SynthSpec bad = small_spec();
  bad.image_size = 30;
  CHECK_THROWS_AS(generate(bad), Error);
  bad = small_spec();
  bad.train_correlation = 1.5;
  CHECK_THROWS_AS(generate(bad), Error);
  bad = small_spec();
  bad.image_size = 8;
  bad.num_classes = 6;  // lesions would not fit
  CHECK_THROWS_AS(generate(bad), Error);
}

TEST_CASE("cross entropy value and gradient") {
  Graph g;
  const NodeId logits = g.input(Tensor(Dims{2, 3}, 0.0));
  const std::vector<int> labels = {0, 2};
  CHECK(g.value(cross_entropy(g, logits, labels))[0] ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Rng rng(70);
  const double err = grad_check(
      [&labels](Graph& g2, NodeId x) { return cross_entropy(g2, x, labels); },
      testutil::random_tensor(rng, {2, 3}), 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const Dataset d = generate(small_spec());
  ToyModel model = ToyModel::init(small_model_config(true, true), 5);
  const ToyModel before = model;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  cfg.seed = 5;
  train(model, d.train, d.val, cfg);
  CHECK(model.bitwise_equal(before));
}

TEST_CASE("all-zero alphas reproduce the pure-CE run bitwise") {
  const Dataset d = generate(small_spec());

  // attention architecture: combined objective with zero alphas vs bare CE
  ToyModel m1 = ToyModel::init(small_model_config(true, true), 9);
  ToyModel m2 = ToyModel::init(small_model_config(true, true), 9);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.seed = 9;
  cfg.alphas = {0.0, 0.0};
  const TrainTrace t1 = train(m1, d.train, d.val, cfg);
  TrainConfig ce_cfg = cfg;
  ce_cfg.force_ce_only = true;
  const TrainTrace t2 = train(m2, d.train, d.val, ce_cfg);
  CHECK(m1.bitwise_equal(m2));
  CHECK(t1.train_loss == t2.train_loss);
  CHECK(t1.val_f1 == t2.val_f1);

  // attention disabled: alphas are irrelevant
  ToyModel b1 = ToyModel::init(small_model_config(false, false), 9);
  ToyModel b2 = ToyModel::init(small_model_config(false, false), 9);
  TrainConfig bcfg = cfg;
  bcfg.alphas = {0.05, 0.05};
  const TrainTrace bt1 = train(b1, d.train, d.val, bcfg);
  TrainConfig bce = bcfg;
  bce.force_ce_only = true;
  const TrainTrace bt2 = train(b2, d.train, d.val, bce);
  CHECK(b1.bitwise_equal(b2));
  CHECK(bt1.train_loss == bt2.train_loss);
}

TEST_CASE("training never reads the sensitive attribute") {
  const Dataset d = generate(small_spec());
  Dataset scrambled = d;
  for (auto* split : {&scrambled.train, &scrambled.val}) {
    for (auto& s : *split) s.sensitive = 1 - s.sensitive;
  }
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 11;
  ToyModel m1 = ToyModel::init(small_model_config(true, true), 11);
  ToyModel m2 = ToyModel::init(small_model_config(true, true), 11);
  train(m1, d.train, d.val, cfg);
  train(m2, scrambled.train, scrambled.val, cfg);
  CHECK(m1.bitwise_equal(m2));
}

TEST_CASE("a small training subset is overfit within 200 epochs") {
  SynthSpec spec = small_spec();
  spec.total_samples = 60;
  spec.noise_std = 0.03;
  const Dataset d = generate(spec);
  std::vector<SynthSample> subset(d.train.begin(), d.train.begin() + 32);

  ToyModel model = ToyModel::init(small_model_config(false, false), 13);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.seed = 13;
  train(model, subset, subset, cfg);

  std::vector<int> y_true;
  for (const auto& s : subset) y_true.push_back(s.label);
  const double f1 = fairness::macro_f1(y_true, predict(model, subset), 3);
  CHECK(f1 >= 0.95);
}

TEST_CASE("constant-class model has zero gaps on every metric") {
  const Dataset d = generate(small_spec());
  ToyModel model = ToyModel::init(small_model_config(false, false), 5);
  for (Tensor* p : model.parameters()) {
    for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] = 0.0;
  }
  model.fc_b[0] = 1.0;  // always predicts class 0
  const auto ev = evaluate(model, d.test);
  for (const auto& r : ev.records) CHECK(r.y_pred == 0);
  CHECK(ev.report.eopp0 == 0.0);
  CHECK(ev.report.eopp1 == 0.0);
  CHECK(ev.report.eodd == 0.0);
}

TEST_CASE("evaluate rejects an empty split") {
  const ToyModel model = ToyModel::init(small_model_config(false, false), 5);
  const std::vector<SynthSample> empty;
  CHECK_THROWS_AS(evaluate(model, empty), Error);
}

TEST_CASE("divergence aborts with the offending step named") {
  const Dataset d = generate(small_spec());
  ToyModel model = ToyModel::init(small_model_config(false, false), 5);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e18;
  cfg.seed = 5;
  try {
    train(model, d.train, d.val, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("diverged at epoch") != std::string::npos);
  }
}

TEST_CASE("full two-block model gradients pass the finite-difference oracle") {
  SynthSpec spec;
  spec.image_size = 8;
  spec.num_classes = 2;
  spec.total_samples = 10;
  spec.seed = 17;
  const Dataset d = generate(spec);
  ToyModelConfig mc = small_model_config(true, true);
  mc.image_size = 8;
  mc.num_classes = 2;
  const ToyModel model = ToyModel::init(mc, 17);

  // batch of 3 samples; check every parameter tensor
  std::vector<SynthSample> batch(d.train.begin(), d.train.begin() + 3);
  std::vector<int> labels;
  for (const auto& s : batch) labels.push_back(s.label);

  const auto params = model.parameters();
  std::vector<Tensor> points;
  for (const Tensor* p : params) points.push_back(*p);

  const double err = grad_check_multi(
      [&](Graph& g, std::span<const NodeId> ids) {
        ToyModel probe = model;  // values are overridden by the graph inputs below
        ModelNodes nodes;
        nodes.conv1_w = ids[0];
        nodes.conv1_b = ids[1];
        nodes.conv2_w = ids[2];
        nodes.conv2_b = ids[3];
        nodes.fc_w = ids[4];
        nodes.fc_b = ids[5];
        nodes.at1 = {ids[6], ids[7], ids[8], ids[9]};
        nodes.at2 = {ids[10], ids[11], ids[12], ids[13]};
        std::vector<NodeId> rows, d1, s1, d2, s2;
        for (const auto& s : batch) {
          const SampleOutputs o = forward_sample(g, probe, nodes, s);
          rows.push_back(o.logits);
          d1.push_back(o.disease1);
          s1.push_back(o.skin1);
          d2.push_back(o.disease2);
          s2.push_back(o.skin2);
        }
        const NodeId ce = cross_entropy(g, g.stack_rows(rows), labels);
        const snnl::BlockLosses blocks[2] = {
            {snnl::disease_loss(g, g.stack_rows(d1), labels, 1.0),
             snnl::skin_loss(g, g.stack_rows(s1), labels, 1.0)},
            {snnl::disease_loss(g, g.stack_rows(d2), labels, 1.0),
             snnl::skin_loss(g, g.stack_rows(s2), labels, 1.0)}};
        const double alphas[2] = {0.05, 0.05};
        return snnl::combined_loss(g, ce, blocks, alphas);
      },
      points, 1e-5);
  CHECK(err < 1e-4);
}
