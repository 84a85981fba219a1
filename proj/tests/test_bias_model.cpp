#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "atten/bias_model.hpp"
#include "atten/rng.hpp"

using namespace atten;
using namespace atten::bias_model;

namespace {

const ConfusionQuad kBase{8, 4, 36, 2};  // tp, fp, tn, fn
const BiasParams kParams{Rat(2), 6, 2};

// uniformly drawn parameters that synthesize to valid quads
BiasParams random_valid_params(Rng& rng, const ConfusionQuad& base) {
  const long long alpha = 1 + static_cast<long long>(rng.next_below(4));
  const long long max_x = alpha * base.tn;
  const long long max_y = alpha * base.fn;
  return BiasParams{Rat(alpha), static_cast<long long>(rng.next_below(max_x + 1)),
                    static_cast<long long>(rng.next_below(max_y + 1))};
}

ConfusionQuad random_base(Rng& rng) {
  return ConfusionQuad{1 + static_cast<long long>(rng.next_below(40)),
                       1 + static_cast<long long>(rng.next_below(40)),
                       1 + static_cast<long long>(rng.next_below(60)),
                       1 + static_cast<long long>(rng.next_below(20))};
}

}  // namespace

TEST_CASE("synthesize fixture") {
  const auto [a, ap] = synthesize(kBase, kParams);
  CHECK(a.tp == 18);
  CHECK(a.fn == 2);
  CHECK(a.fp == 14);
  CHECK(a.tn == 66);
  CHECK(ap == kBase);
}

TEST_CASE("synthesize identity at alpha=1, X=Y=0") {
  const auto [a, ap] = synthesize(kBase, BiasParams{Rat(1), 0, 0});
  CHECK(a == kBase);
  CHECK(ap == kBase);
}

TEST_CASE("synthesize preserves the positives scaling identity") {
  Rng rng(41);
  for (int iter = 0; iter < 50; ++iter) {
    const auto base = random_base(rng);
    const auto p = random_valid_params(rng, base);
    const auto [a, ap] = synthesize(base, p);
    CHECK(Rat(a.tp + a.fn) == p.alpha * Rat(ap.tp + ap.fn));
    CHECK(Rat(a.tn + a.fp) == p.alpha * Rat(ap.tn + ap.fp));
    CHECK(a.total() == (p.alpha * Rat(ap.total())).num());
  }
}

TEST_CASE("synthesize error paths name the violated bound") {
  try {
    synthesize(kBase, BiasParams{Rat(1), 37, 0});  // X > TN'
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("TN_A") != std::string::npos);
  }
  try {
    synthesize(kBase, BiasParams{Rat(1), 0, 3});  // Y > FN'
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("FN_A") != std::string::npos);
  }
  // non-integral alpha * count is an error, not a rounding
  CHECK_THROWS_AS(synthesize(ConfusionQuad{3, 4, 36, 2}, BiasParams{Rat(1, 2), 0, 0}),
                  Error);
  CHECK_THROWS_AS(synthesize(kBase, BiasParams{Rat(-1), 0, 0}), Error);
}

TEST_CASE("closed-form gaps fixture") {
  const auto g = closed_form_gaps(kBase, kParams);
  CHECK(g.eopp0 == Rat(6, 80));
  CHECK(g.eopp1 == Rat(2, 20));
  CHECK(g.eodd == Rat(6, 80) + Rat(2, 20));
  CHECK(g.eopp0.to_double() == doctest::Approx(0.075));
  CHECK(g.eopp1.to_double() == doctest::Approx(0.1));
  CHECK(g.eodd.to_double() == doctest::Approx(0.175));
}

TEST_CASE("closed-form gaps vanish without bias") {
  const auto g = closed_form_gaps(kBase, BiasParams{Rat(2), 0, 0});
  CHECK(g.eopp0 == Rat(0));
  CHECK(g.eopp1 == Rat(0));
  CHECK(g.eodd == Rat(0));
}

TEST_CASE("doubling X doubles eopp0 and shifts eodd, eopp1 unchanged") {
  const BiasParams p1{Rat(2), 3, 2};
  const BiasParams p2{Rat(2), 6, 2};
  const auto g1 = closed_form_gaps(kBase, p1);
  const auto g2 = closed_form_gaps(kBase, p2);
  CHECK(g2.eopp0 == Rat(2) * g1.eopp0);
  CHECK(g2.eopp1 == g1.eopp1);
  CHECK(g2.eodd == g1.eodd + g1.eopp0);
}

TEST_CASE("monotonicity in X and Y") {
  // eopp0 strictly increasing in X, eopp1 in Y, eodd in both
  Rat prev_eopp0(-1);
  for (long long x = 0; x <= 20; ++x) {
    const auto g = closed_form_gaps(kBase, BiasParams{Rat(2), x, 2});
    CHECK(g.eopp0 > prev_eopp0);
    prev_eopp0 = g.eopp0;
  }
  Rat prev_eopp1(-1);
  for (long long y = 0; y <= 4; ++y) {
    const auto g = closed_form_gaps(kBase, BiasParams{Rat(2), 6, y});
    CHECK(g.eopp1 > prev_eopp1);
    prev_eopp1 = g.eopp1;
  }
}

TEST_CASE("scale invariance of the closed forms") {
  Rng rng(42);
  for (int iter = 0; iter < 30; ++iter) {
    const auto base = random_base(rng);
    const auto p = random_valid_params(rng, base);
    const auto g = closed_form_gaps(base, p);
    const long long c = 2 + static_cast<long long>(rng.next_below(5));
    const ConfusionQuad scaled{base.tp * c, base.fp * c, base.tn * c, base.fn * c};
    const BiasParams ps{p.alpha, p.x * c, p.y * c};
    const auto gs = closed_form_gaps(scaled, ps);
    CHECK(gs.eopp0 == g.eopp0);
    CHECK(gs.eopp1 == g.eopp1);
    CHECK(gs.eodd == g.eodd);
  }
}

TEST_CASE("estimate inverts synthesize") {
  Rng rng(43);
  for (int iter = 0; iter < 100; ++iter) {
    const auto base = random_base(rng);
    const auto p = random_valid_params(rng, base);
    const auto [a, ap] = synthesize(base, p);
    const auto est = estimate(a, ap);
    REQUIRE_FALSE(est.misfit);
    CHECK(est.as_params() == p);
  }
}

TEST_CASE("estimate fixture and parity case") {
  const auto est = estimate(ConfusionQuad{18, 14, 66, 2}, kBase);
  REQUIRE_FALSE(est.misfit);
  CHECK(est.alpha == Rat(2));
  CHECK(est.x == Rat(6));
  CHECK(est.y == Rat(2));

  // identical rates, equal totals
  const auto id = estimate(kBase, kBase);
  REQUIRE_FALSE(id.misfit);
  CHECK(id.alpha == Rat(1));
  CHECK(id.x == Rat(0));
  CHECK(id.y == Rat(0));
}

TEST_CASE("estimate flags model misfit without clamping") {
  // positives do not scale by total-ratio alpha
  const auto est = estimate(ConfusionQuad{20, 10, 60, 10}, ConfusionQuad{2, 10, 30, 8});
  CHECK(est.misfit);
  CHECK_FALSE(est.misfit_reasons.empty());
  CHECK_THROWS_AS(est.as_params(), Error);

  // negative Y survives as a signed value
  const auto neg = estimate(ConfusionQuad{6, 4, 36, 4}, ConfusionQuad{8, 4, 36, 2});
  CHECK(neg.misfit);
  CHECK(neg.y.is_negative());

  CHECK_THROWS_AS(estimate(kBase, ConfusionQuad{0, 0, 0, 0}), Error);
}

TEST_CASE("dual-path consistency on the worked fixture") {
  const auto rep = verify_consistency(kBase, kParams);
  CHECK(rep.equal);
  CHECK(rep.closed.eopp0 == Rat(6, 80));
  CHECK(rep.closed.eopp1 == Rat(1, 10));
  CHECK(rep.via_metrics.eopp0 == Rat(6, 80));
  CHECK(rep.via_metrics.eopp1 == Rat(1, 10));
  CHECK(rep.via_metrics.eodd == Rat(7, 40));
}

TEST_CASE("dual-path consistency on random draws") {
  Rng rng(44);
  for (int iter = 0; iter < 100; ++iter) {
    const auto base = random_base(rng);
    const auto p = random_valid_params(rng, base);
    const auto rep = verify_consistency(base, p);
    CHECK(rep.equal);
  }
}

TEST_CASE("dual-path zero case") {
  const auto rep = verify_consistency(kBase, BiasParams{Rat(2), 0, 0});
  CHECK(rep.equal);
  CHECK(rep.closed.eopp0 == Rat(0));
  CHECK(rep.closed.eopp1 == Rat(0));
  CHECK(rep.closed.eodd == Rat(0));
}
