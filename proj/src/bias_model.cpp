#include "atten/bias_model.hpp"

namespace atten::bias_model {

namespace {

// alpha * count, required integral
long long scaled(const Rat& alpha, long long count, const char* what) {
  const Rat v = alpha * Rat(count);
  if (!v.is_integer()) {
    throw Error(std::string("synthesize: alpha*") + what + " = " + v.to_string() +
                " is not an integer");
  }
  return v.num();
}

}  // namespace

std::pair<ConfusionQuad, ConfusionQuad> synthesize(const ConfusionQuad& base,
                                                   const BiasParams& params) {
  if (!(params.alpha > Rat(0))) throw Error("synthesize: alpha must be positive");
  if (params.x < 0 || params.y < 0) throw Error("synthesize: X and Y must be >= 0");
  if (base.tp < 0 || base.fp < 0 || base.tn < 0 || base.fn < 0) {
    throw Error("synthesize: negative base count");
  }
  ConfusionQuad a;
  a.tp = scaled(params.alpha, base.tp, "TP'") + params.y;
  a.fp = scaled(params.alpha, base.fp, "FP'") + params.x;
  a.tn = scaled(params.alpha, base.tn, "TN'") - params.x;
  a.fn = scaled(params.alpha, base.fn, "FN'") - params.y;
  if (a.tn < 0) {
    throw Error("synthesize: X = " + std::to_string(params.x) +
                " exceeds alpha*TN' = " + std::to_string(a.tn + params.x) +
                " (TN_A would be negative)");
  }
  if (a.fn < 0) {
    throw Error("synthesize: Y = " + std::to_string(params.y) +
                " exceeds alpha*FN' = " + std::to_string(a.fn + params.y) +
                " (FN_A would be negative)");
  }
  return {a, base};
}

Gaps closed_form_gaps(const ConfusionQuad& base, const BiasParams& params) {
  const auto [a, a_prime] = synthesize(base, params);
  const long long neg_a = a.tn + a.fp;
  const long long pos_a = a.tp + a.fn;
  if (neg_a <= 0) throw Error("closed_form_gaps: TN_A + FP_A must be positive");
  if (pos_a <= 0) throw Error("closed_form_gaps: TP_A + FN_A must be positive");
  Gaps g;
  g.eopp0 = Rat(params.x, neg_a);
  g.eopp1 = Rat(params.y, pos_a);
  g.eodd = g.eopp0 + g.eopp1;
  return g;
}

BiasParams BiasEstimate::as_params() const {
  if (misfit) throw Error("estimate: parameters requested from a misfit estimate");
  return BiasParams{alpha, x.num(), y.num()};
}

BiasEstimate estimate(const ConfusionQuad& quad_a, const ConfusionQuad& quad_a_prime) {
  const long long total_prime = quad_a_prime.total();
  if (total_prime <= 0) throw Error("estimate: group A' has no cases");
  BiasEstimate e;
  e.alpha = Rat(quad_a.total(), total_prime);
  e.x = Rat(quad_a.fp) - e.alpha * Rat(quad_a_prime.fp);
  e.y = e.alpha * Rat(quad_a_prime.fn) - Rat(quad_a.fn);

  const Rat pos_a(quad_a.tp + quad_a.fn);
  const Rat pos_p(quad_a_prime.tp + quad_a_prime.fn);
  const Rat neg_a(quad_a.tn + quad_a.fp);
  const Rat neg_p(quad_a_prime.tn + quad_a_prime.fp);
  if (pos_a != e.alpha * pos_p) {
    e.misfit = true;
    e.misfit_reasons.push_back("positives do not scale by alpha: " + pos_a.to_string() +
                               " vs alpha*" + pos_p.to_string());
  }
  if (neg_a != e.alpha * neg_p) {
    e.misfit = true;
    e.misfit_reasons.push_back("negatives do not scale by alpha: " + neg_a.to_string() +
                               " vs alpha*" + neg_p.to_string());
  }
  if (e.x.is_negative()) {
    e.misfit = true;
    e.misfit_reasons.push_back("X is negative: " + e.x.to_string());
  }
  if (e.y.is_negative()) {
    e.misfit = true;
    e.misfit_reasons.push_back("Y is negative: " + e.y.to_string());
  }
  if (!e.x.is_integer()) {
    e.misfit = true;
    e.misfit_reasons.push_back("X is fractional: " + e.x.to_string());
  }
  if (!e.y.is_integer()) {
    e.misfit = true;
    e.misfit_reasons.push_back("Y is fractional: " + e.y.to_string());
  }
  return e;
}

std::vector<fairness::PredictionRecord> expand_records(const ConfusionQuad& quad_a,
                                                       const ConfusionQuad& quad_a_prime) {
  std::vector<fairness::PredictionRecord> recs;
  recs.reserve(static_cast<std::size_t>(quad_a.total() + quad_a_prime.total()));
  const auto emit = [&recs](long long n, int y, int p, int a) {
    for (long long i = 0; i < n; ++i) {
      recs.push_back({"q" + std::to_string(recs.size()), y, p, a});
    }
  };
  const auto emit_quad = [&emit](const ConfusionQuad& q, int a) {
    emit(q.tp, 1, 1, a);  // class under analysis is label 1, rest is label 0
    emit(q.fn, 1, 0, a);
    emit(q.fp, 0, 1, a);
    emit(q.tn, 0, 0, a);
  };
  emit_quad(quad_a, 1);
  emit_quad(quad_a_prime, 0);
  return recs;
}

ConsistencyReport verify_consistency(const ConfusionQuad& base, const BiasParams& params) {
  ConsistencyReport rep;
  rep.closed = closed_form_gaps(base, params);

  const auto [a, a_prime] = synthesize(base, params);
  const auto records = expand_records(a, a_prime);
  const auto exact = fairness::eval_exact(fairness::tally(records, 2));
  const auto& term = exact.per_class[1];  // class under analysis
  if (!term.eopp0_term || !term.eopp1_term || !term.eodd_term) {
    throw Error("verify_consistency: metrics route skipped the analyzed class");
  }
  rep.via_metrics = Gaps{*term.eopp0_term, *term.eopp1_term, *term.eodd_term};
  rep.equal = rep.closed == rep.via_metrics;
  return rep;
}

}  // namespace atten::bias_model
