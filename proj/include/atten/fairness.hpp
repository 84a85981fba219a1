#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atten/rational.hpp"

namespace atten::fairness {

// One labeled prediction with its binary sensitive attribute. The attribute
// is only ever consumed here, at evaluation time.
struct PredictionRecord {
  std::string sample_id;
  int y_true = 0;
  int y_pred = 0;
  int sensitive = 0;  // 0 or 1
};

// One-vs-rest counts for a single (class, group) cell.
struct ConfusionCell {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct GroupConfusion {
  int num_classes = 0;
  long long group_count[2] = {0, 0};
  std::vector<ConfusionCell> cells[2];  // cells[group][class]

  const ConfusionCell& cell(int group, int k) const { return cells[group][k]; }
};

GroupConfusion tally(const std::vector<PredictionRecord>& records, int num_classes);

struct SkippedRate {
  int class_index = 0;
  int group = 0;
  std::string rate;  // "TPR", "TNR", "FPR" or "precision"

  bool operator==(const SkippedRate&) const = default;
};

// Exact per-class pieces of the three metrics. A missing optional means the
// class term was skipped because a needed rate had a zero denominator.
struct PerClassTerms {
  std::optional<Rat> tpr[2], tnr[2], fpr[2];
  std::optional<Rat> eopp0_term, eopp1_term, eodd_term;
};

struct ExactReport {
  int num_classes = 0;
  Rat eopp0, eopp1, eodd;
  std::vector<PerClassTerms> per_class;
  std::vector<SkippedRate> skipped;
  // macro over classes, per group; classes whose cell leaves a value
  // undefined are excluded from that macro mean
  Rat precision[2], recall[2], f1[2];
  Rat macro_f1_all;  // group-agnostic macro F1 (the default FATE accuracy)
  Rat accuracy_all;
};

// Requires at least one record in each group.
ExactReport eval_exact(const GroupConfusion& confusion);

struct FairnessReport {
  int num_classes = 0;
  double eopp0 = 0, eopp1 = 0, eodd = 0;
  double precision[2] = {0, 0}, recall[2] = {0, 0}, f1[2] = {0, 0};
  double macro_f1_all = 0;
  double accuracy_all = 0;
  std::vector<SkippedRate> skipped;
};

FairnessReport to_report(const ExactReport& exact);
FairnessReport eval(const GroupConfusion& confusion);

// FATE = (acc_m - acc_b)/acc_b - lambda * (fc_m - fc_b)/fc_b.
// Positive baselines required.
double fate(double acc_base, double acc_mitig, double fc_base, double fc_mitig,
            double lambda);
std::vector<std::pair<double, double>> fate_sweep(double acc_base, double acc_mitig,
                                                  double fc_base, double fc_mitig,
                                                  const std::vector<double>& lambdas);

// Group-agnostic macro F1 straight from label vectors; used for validation
// model selection where no report is wanted.
double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                int num_classes);

// CSV with header `sample_id,y_true,y_pred,sensitive`. Header mismatches are
// UsageError; malformed rows are Error carrying the 1-based line number.
std::vector<PredictionRecord> read_prediction_csv(std::istream& is, int num_classes);
std::string write_prediction_csv(const std::vector<PredictionRecord>& records);

std::string report_to_json(const FairnessReport& report);
FairnessReport report_from_json(const std::string& text);
std::string report_to_markdown(const FairnessReport& report);

}  // namespace atten::fairness
