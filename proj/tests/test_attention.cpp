#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "atten/attention.hpp"
#include "atten/io.hpp"
#include "atten/rng.hpp"
#include "test_util.hpp"

using namespace atten;
using namespace atten::attention;
using testutil::random_tensor;

namespace {

AttenConfig toy_config(bool mask = false) {
  AttenConfig cfg;
  cfg.channels = 4;
  cfg.reduction = 2;
  cfg.spatial_kernel = 3;
  cfg.use_guided_mask = mask;
  return cfg;
}

}  // namespace

TEST_CASE("attention maps have the right shapes and live strictly in (0,1)") {
  Rng rng(60);
  const AttenConfig cfg = toy_config();
  const AttenParams p = AttenParams::init(cfg, rng.fork("p"));

  Graph g;
  const NodeId f = g.input(random_tensor(rng, {4, 6, 6}));
  const auto nodes = AttenParamNodes::of(g, p, true);
  const auto bundle = atten_forward(g, f, nullptr, cfg, nodes);

  const Tensor& mc = g.value(bundle.channel_map);
  CHECK(mc.dims() == Dims{4, 1, 1});
  for (const double v : mc.vec()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  const Tensor& ms = g.value(bundle.spatial_map);
  CHECK(ms.dims() == Dims{1, 6, 6});
  for (const double v : ms.vec()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(g.value(bundle.refined).dims() == Dims{4, 6, 6});
  CHECK(g.value(bundle.inverse).dims() == Dims{4, 6, 6});
  CHECK(g.value(bundle.guided).dims() == Dims{4, 6, 6});
}

TEST_CASE("zero-initialized parameters give 0.5 maps") {
  const AttenConfig cfg = toy_config();
  AttenParams p;
  p.mlp_w0 = Tensor(Dims{4, 2}, 0.0);
  p.mlp_w1 = Tensor(Dims{2, 4}, 0.0);
  p.conv_w = Tensor(Dims{1, 2, 3, 3}, 0.0);
  p.conv_b = Tensor(Dims{1, 1, 1}, 0.0);

  Rng rng(61);
  Graph g;
  const NodeId f = g.input(random_tensor(rng, {4, 4, 4}));
  const auto nodes = AttenParamNodes::of(g, p, true);
  const auto bundle = atten_forward(g, f, nullptr, cfg, nodes);
  for (const double v : g.value(bundle.channel_map).vec()) CHECK(v == 0.5);
  for (const double v : g.value(bundle.spatial_map).vec()) CHECK(v == 0.5);
}

TEST_CASE("bundle identities: refined, inverse, and map complementarity") {
  Rng rng(62);
  const AttenConfig cfg = toy_config();
  const AttenParams p = AttenParams::init(cfg, rng.fork("p"));

  Graph g;
  const Tensor ft = random_tensor(rng, {4, 4, 4});
  const NodeId f = g.input(ft);
  const auto nodes = AttenParamNodes::of(g, p, true);
  const auto bundle = atten_forward(g, f, nullptr, cfg, nodes);

  const Tensor& mc = g.value(bundle.channel_map);
  const Tensor& ms = g.value(bundle.spatial_map);
  const Tensor& refined = g.value(bundle.refined);
  const Tensor& inverse = g.value(bundle.inverse);

  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 4; ++x) {
        const double fcv = mc.at({c, 0, 0}) * ft.at({c, y, x});
        CHECK(refined.at({c, y, x}) == ms.at({0, y, x}) * fcv);
        CHECK(inverse.at({c, y, x}) ==
              doctest::Approx((1.0 - ms.at({0, y, x})) * ft.at({c, y, x})).epsilon(1e-15));
        // spatial weights on refined and inverse sum to one
        CHECK(ms.at({0, y, x}) + (1.0 - ms.at({0, y, x})) ==
              doctest::Approx(1.0).epsilon(1e-15));
      }
    }
  }
  // no mask: guided IS the refined node
  CHECK(bundle.guided == bundle.refined);
}

TEST_CASE("mask pooling fixture and guided injection") {
  Rng rng(63);
  const AttenConfig cfg = toy_config(true);
  const AttenParams p = AttenParams::init(cfg, rng.fork("p"));

  Tensor mask(Dims{1, 4, 4}, 0.0);
  mask.at({0, 0, 0}) = 1.0;
  mask.at({0, 2, 3}) = 1.0;
  const Tensor pooled = pool_mask(mask, 2, 2);
  CHECK(pooled.at({0, 0, 0}) == 1.0);
  CHECK(pooled.at({0, 0, 1}) == 0.0);
  CHECK(pooled.at({0, 1, 0}) == 0.0);
  CHECK(pooled.at({0, 1, 1}) == 1.0);

  Graph g;
  const Tensor ft = random_tensor(rng, {4, 2, 2}, 0.0, 1.0);
  const NodeId f = g.input(ft);
  const auto nodes = AttenParamNodes::of(g, p, true);
  const auto bundle = atten_forward(g, f, &mask, cfg, nodes);

  const Tensor& refined = g.value(bundle.refined);
  const Tensor& guided = g.value(bundle.guided);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t x = 0; x < 2; ++x) {
        const double delta = guided.at({c, y, x}) - refined.at({c, y, x});
        if (pooled.at({0, y, x}) == 1.0) {
          CHECK(delta == doctest::Approx(ft.at({c, y, x})).epsilon(1e-15));
        } else {
          // non-destructive where the pooled mask is zero
          CHECK(guided.at({c, y, x}) == refined.at({c, y, x}));
        }
      }
    }
  }
}

TEST_CASE("all-zero mask reproduces the no-mask forward bitwise") {
  Rng rng(64);
  const AttenParams p = AttenParams::init(toy_config(), rng.fork("p"));
  const Tensor ft = random_tensor(rng, {4, 4, 4}, 0.0, 2.0);
  const Tensor zero_mask(Dims{1, 8, 8}, 0.0);

  Graph g1;
  const auto b1 = atten_forward(g1, g1.input(ft), &zero_mask, toy_config(true),
                                AttenParamNodes::of(g1, p, true));
  Graph g2;
  const auto b2 = atten_forward(g2, g2.input(ft), nullptr, toy_config(false),
                                AttenParamNodes::of(g2, p, true));
  CHECK(g1.value(b1.guided).bitwise_equal(g2.value(b2.guided)));
  CHECK(g1.value(b1.refined).bitwise_equal(g2.value(b2.refined)));
  CHECK(g1.value(b1.inverse).bitwise_equal(g2.value(b2.inverse)));
}

TEST_CASE("mask validation errors") {
  Tensor bad_ratio(Dims{1, 6, 6}, 0.0);
  CHECK_THROWS_AS(pool_mask(bad_ratio, 4, 4), Error);
  Tensor non_square(Dims{1, 8, 4}, 0.0);
  CHECK_THROWS_AS(pool_mask(non_square, 4, 4), Error);
  Tensor not_binary(Dims{1, 4, 4}, 0.5);
  CHECK_THROWS_AS(pool_mask(not_binary, 2, 2), Error);

  Rng rng(65);
  const AttenConfig cfg = toy_config(true);
  const AttenParams p = AttenParams::init(cfg, rng.fork("p"));
  Graph g;
  const NodeId f = g.input(random_tensor(rng, {4, 4, 4}));
  CHECK_THROWS_AS(atten_forward(g, f, nullptr, cfg, AttenParamNodes::of(g, p, true)),
                  Error);
}

TEST_CASE("config validation") {
  AttenConfig cfg;
  cfg.channels = 2;
  cfg.reduction = 8;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.channels = 8;
  cfg.spatial_kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("gradient flows through both attention stages") {
  Rng rng(66);
  const AttenConfig cfg = toy_config();
  const AttenParams p = AttenParams::init(cfg, rng.fork("p"));
  const Tensor pts[5] = {random_tensor(rng, {4, 4, 4}), p.mlp_w0, p.mlp_w1, p.conv_w,
                         p.conv_b};

  const auto with_params = [&cfg](Graph& g, std::span<const NodeId> ids) {
    AttenParamNodes nodes;
    nodes.mlp_w0 = ids[1];
    nodes.mlp_w1 = ids[2];
    nodes.conv_w = ids[3];
    nodes.conv_b = ids[4];
    return std::pair(ids[0], nodes);
  };

  const double err_mc = grad_check_multi(
      [&](Graph& g, std::span<const NodeId> ids) {
        const auto [f, nodes] = with_params(g, ids);
        return g.reduce_all(channel_attention(g, f, nodes, cfg), ReduceMode::Sum);
      },
      pts, 1e-5);
  CHECK(err_mc < 1e-5);

  const double err_ms = grad_check_multi(
      [&](Graph& g, std::span<const NodeId> ids) {
        const auto [f, nodes] = with_params(g, ids);
        return g.reduce_all(spatial_attention(g, f, nodes, cfg), ReduceMode::Sum);
      },
      pts, 1e-5);
  CHECK(err_ms < 1e-5);

  // whole block: loss = sum over every bundle output
  const double err_block = grad_check_multi(
      [&](Graph& g, std::span<const NodeId> ids) {
        const auto [f, nodes] = with_params(g, ids);
        const auto bundle = atten_forward(g, f, nullptr, cfg, nodes);
        NodeId s = g.reduce_all(bundle.refined, ReduceMode::Sum);
        s = g.add(s, g.reduce_all(bundle.inverse, ReduceMode::Sum));
        s = g.add(s, g.reduce_all(bundle.channel_map, ReduceMode::Sum));
        s = g.add(s, g.reduce_all(bundle.spatial_map, ReduceMode::Sum));
        return g.add(s, g.reduce_all(bundle.guided, ReduceMode::Sum));
      },
      pts, 1e-5);
  CHECK(err_block < 1e-5);
}

TEST_CASE("identical inputs give bitwise-identical bundles") {
  Rng rng(67);
  const AttenConfig cfg = toy_config(true);
  const AttenParams p = AttenParams::init(cfg, rng.fork("p"));
  const Tensor ft = random_tensor(rng, {4, 4, 4});
  Tensor mask(Dims{1, 8, 8}, 0.0);
  mask.at({0, 3, 3}) = 1.0;

  const auto run = [&](Tensor& mc, Tensor& ms, Tensor& r, Tensor& i, Tensor& gd) {
    Graph g;
    const auto b = atten_forward(g, g.input(ft), &mask, cfg, AttenParamNodes::of(g, p, true));
    mc = g.value(b.channel_map);
    ms = g.value(b.spatial_map);
    r = g.value(b.refined);
    i = g.value(b.inverse);
    gd = g.value(b.guided);
  };
  Tensor mc1, ms1, r1, i1, gd1, mc2, ms2, r2, i2, gd2;
  run(mc1, ms1, r1, i1, gd1);
  run(mc2, ms2, r2, i2, gd2);
  CHECK(mc1.bitwise_equal(mc2));
  CHECK(ms1.bitwise_equal(ms2));
  CHECK(r1.bitwise_equal(r2));
  CHECK(i1.bitwise_equal(i2));
  CHECK(gd1.bitwise_equal(gd2));
}

TEST_CASE("pgm mask loading") {
  const std::string path = "test_mask_tmp.pgm";
  {
    std::ofstream os(path, std::ios::binary);
    os << "P5\n# lesion mask\n3 2\n255\n";
    const unsigned char px[6] = {0, 127, 128, 255, 10, 200};
    os.write(reinterpret_cast<const char*>(px), 6);
  }
  const Tensor m = load_pgm_mask(path);
  CHECK(m.dims() == Dims{1, 2, 3});
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 0.0);  // 127 < 128
  CHECK(m[2] == 1.0);  // 128 -> 1
  CHECK(m[3] == 1.0);
  CHECK(m[4] == 0.0);
  CHECK(m[5] == 1.0);
  std::remove(path.c_str());

  {
    std::ofstream os(path, std::ios::binary);
    os << "P2\n3 2\n255\n0 0 0 0 0 0\n";
  }
  CHECK_THROWS_AS(load_pgm_mask(path), Error);
  std::remove(path.c_str());

  {
    std::ofstream os(path, std::ios::binary);
    os << "P5\n3 2\n65535\n";
    const unsigned char px[12] = {0};
    os.write(reinterpret_cast<const char*>(px), 12);
  }
  CHECK_THROWS_AS(load_pgm_mask(path), Error);
  std::remove(path.c_str());

  {
    std::ofstream os(path, std::ios::binary);
    os << "P5\n3 2\n255\n";
    const unsigned char px[3] = {0, 1, 2};  // truncated
    os.write(reinterpret_cast<const char*>(px), 3);
  }
  CHECK_THROWS_AS(load_pgm_mask(path), Error);
  std::remove(path.c_str());
}
