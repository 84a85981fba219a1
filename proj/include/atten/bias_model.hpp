#pragma once

#include <string>
#include <utility>
#include <vector>

#include "atten/fairness.hpp"
#include "atten/rational.hpp"

namespace atten::bias_model {

// One class, one group.
struct ConfusionQuad {
  long long tp = 0, fp = 0, tn = 0, fn = 0;

  long long total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionQuad&) const = default;
};

// Shortcut-bias parameterization: group A is alpha times the size of the
// reference group A', X excess false positives and Y excess false negatives
// land in A relative to exact parity.
struct BiasParams {
  Rat alpha = Rat(1);
  long long x = 0;
  long long y = 0;

  bool operator==(const BiasParams&) const = default;
};

// A-quad = (alpha*TP' + Y, alpha*FP' + X, alpha*TN' - X, alpha*FN' - Y).
// Requires alpha*count integral for every base count and non-negative
// results; violations throw with the offending bound named.
std::pair<ConfusionQuad, ConfusionQuad> synthesize(const ConfusionQuad& base,
                                                   const BiasParams& params);

struct Gaps {
  Rat eopp0, eopp1, eodd;

  bool operator==(const Gaps&) const = default;
};

// Closed forms for the single class under analysis:
//   eopp0 = X / (TN_A + FP_A), eopp1 = Y / (TP_A + FN_A), eodd = their sum.
Gaps closed_form_gaps(const ConfusionQuad& base, const BiasParams& params);

// Inversion of the parity-plus-bias model. Estimates are exact rationals and
// are NOT clamped; misfit flags quads that violate the model's assumptions
// (per-outcome scaling by alpha, integral non-negative X and Y).
struct BiasEstimate {
  Rat alpha;
  Rat x;
  Rat y;
  bool misfit = false;
  std::vector<std::string> misfit_reasons;

  // Valid only when !misfit.
  BiasParams as_params() const;
};

BiasEstimate estimate(const ConfusionQuad& quad_a, const ConfusionQuad& quad_a_prime);

// Computes the fairness gaps along both routes - the closed forms above and
// fairness_metrics evaluation of records expanded from the two quads (class k
// against rest, group A as sensitive value 1) - and reports whether they
// agree exactly.
struct ConsistencyReport {
  Gaps closed;
  Gaps via_metrics;
  bool equal = false;
};

ConsistencyReport verify_consistency(const ConfusionQuad& base, const BiasParams& params);

// The record expansion used by the metrics route; exposed for tests.
std::vector<fairness::PredictionRecord> expand_records(const ConfusionQuad& quad_a,
                                                       const ConfusionQuad& quad_a_prime);

}  // namespace atten::bias_model
