#include "atten/fairness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

namespace atten::fairness {

using nlohmann::json;

GroupConfusion tally(const std::vector<PredictionRecord>& records, int num_classes) {
  if (num_classes < 2) throw Error("tally: need at least 2 classes");
  if (records.empty()) throw Error("tally: no records");
  GroupConfusion out;
  out.num_classes = num_classes;
  out.cells[0].assign(static_cast<std::size_t>(num_classes), {});
  out.cells[1].assign(static_cast<std::size_t>(num_classes), {});
  for (const auto& r : records) {
    if (r.y_true < 0 || r.y_true >= num_classes || r.y_pred < 0 || r.y_pred >= num_classes) {
      throw Error("tally: class index out of range for sample '" + r.sample_id + "'");
    }
    if (r.sensitive != 0 && r.sensitive != 1) {
      throw Error("tally: sensitive attribute must be 0 or 1 for sample '" + r.sample_id +
                  "'");
    }
    ++out.group_count[r.sensitive];
    auto& cells = out.cells[r.sensitive];
    for (int k = 0; k < num_classes; ++k) {
      const bool pos = r.y_true == k;
      const bool pred = r.y_pred == k;
      auto& c = cells[static_cast<std::size_t>(k)];
      if (pos && pred)
        ++c.tp;
      else if (pos && !pred)
        ++c.fn;
      else if (!pos && pred)
        ++c.fp;
      else
        ++c.tn;
    }
  }
  return out;
}

namespace {

std::optional<Rat> rate(long long num, long long den) {
  if (den <= 0) return std::nullopt;
  return Rat(num, den);
}

struct MacroAcc {
  Rat sum;
  long long n = 0;
  void add(const Rat& r) {
    sum = sum + r;
    ++n;
  }
  Rat mean() const { return n == 0 ? Rat(0) : sum / Rat(n); }
};

Rat f1_of(const Rat& p, const Rat& r) {
  const Rat s = p + r;
  if (s == Rat(0)) return Rat(0);
  return Rat(2) * p * r / s;
}

}  // namespace

ExactReport eval_exact(const GroupConfusion& confusion) {
  if (confusion.num_classes < 2) throw Error("eval: confusion has no classes");
  if (confusion.group_count[0] == 0 || confusion.group_count[1] == 0) {
    throw Error("eval: a sensitive group has no records; report cannot be formed");
  }
  ExactReport rep;
  rep.num_classes = confusion.num_classes;
  rep.per_class.resize(static_cast<std::size_t>(confusion.num_classes));

  MacroAcc prec_acc[2], rec_acc[2], f1_acc[2], f1_all_acc;
  long long correct_all = 0;
  const long long total_all = confusion.group_count[0] + confusion.group_count[1];

  for (int k = 0; k < confusion.num_classes; ++k) {
    auto& terms = rep.per_class[static_cast<std::size_t>(k)];
    for (int a = 0; a < 2; ++a) {
      const ConfusionCell& c = confusion.cell(a, k);
      terms.tpr[a] = rate(c.tp, c.tp + c.fn);
      terms.tnr[a] = rate(c.tn, c.tn + c.fp);
      terms.fpr[a] = rate(c.fp, c.fp + c.tn);
      if (!terms.tpr[a]) rep.skipped.push_back({k, a, "TPR"});
      if (!terms.tnr[a]) rep.skipped.push_back({k, a, "TNR"});
      if (!terms.fpr[a]) rep.skipped.push_back({k, a, "FPR"});

      const auto prec = rate(c.tp, c.tp + c.fp);
      if (!prec) rep.skipped.push_back({k, a, "precision"});
      if (prec) prec_acc[a].add(*prec);
      if (terms.tpr[a]) rec_acc[a].add(*terms.tpr[a]);
      if (prec && terms.tpr[a]) f1_acc[a].add(f1_of(*prec, *terms.tpr[a]));
    }
    if (terms.tnr[0] && terms.tnr[1]) {
      terms.eopp0_term = abs(*terms.tnr[1] - *terms.tnr[0]);
      rep.eopp0 = rep.eopp0 + *terms.eopp0_term;
    }
    if (terms.tpr[0] && terms.tpr[1]) {
      terms.eopp1_term = abs(*terms.tpr[1] - *terms.tpr[0]);
      rep.eopp1 = rep.eopp1 + *terms.eopp1_term;
    }
    if (terms.tpr[0] && terms.tpr[1] && terms.fpr[0] && terms.fpr[1]) {
      // absolute value around the whole per-class sum; gaps may cancel
      terms.eodd_term =
          abs(*terms.tpr[1] - *terms.tpr[0] + *terms.fpr[1] - *terms.fpr[0]);
      rep.eodd = rep.eodd + *terms.eodd_term;
    }

    // group-agnostic one-vs-rest cell
    const ConfusionCell& c0 = confusion.cell(0, k);
    const ConfusionCell& c1 = confusion.cell(1, k);
    const long long tp = c0.tp + c1.tp, fp = c0.fp + c1.fp, fn = c0.fn + c1.fn;
    correct_all += tp;
    const auto prec = rate(tp, tp + fp);
    const auto rec = rate(tp, tp + fn);
    if (prec && rec) f1_all_acc.add(f1_of(*prec, *rec));
  }

  for (int a = 0; a < 2; ++a) {
    rep.precision[a] = prec_acc[a].mean();
    rep.recall[a] = rec_acc[a].mean();
    rep.f1[a] = f1_acc[a].mean();
  }
  rep.macro_f1_all = f1_all_acc.mean();
  rep.accuracy_all = Rat(correct_all, total_all);
  return rep;
}

FairnessReport to_report(const ExactReport& exact) {
  FairnessReport r;
  r.num_classes = exact.num_classes;
  r.eopp0 = exact.eopp0.to_double();
  r.eopp1 = exact.eopp1.to_double();
  r.eodd = exact.eodd.to_double();
  for (int a = 0; a < 2; ++a) {
    r.precision[a] = exact.precision[a].to_double();
    r.recall[a] = exact.recall[a].to_double();
    r.f1[a] = exact.f1[a].to_double();
  }
  r.macro_f1_all = exact.macro_f1_all.to_double();
  r.accuracy_all = exact.accuracy_all.to_double();
  r.skipped = exact.skipped;
  return r;
}

FairnessReport eval(const GroupConfusion& confusion) {
  return to_report(eval_exact(confusion));
}

double fate(double acc_base, double acc_mitig, double fc_base, double fc_mitig,
            double lambda) {
  if (!(acc_base > 0.0)) throw Error("fate: baseline accuracy must be positive");
  if (!(fc_base > 0.0)) throw Error("fate: baseline fairness score must be positive");
  return (acc_mitig - acc_base) / acc_base - lambda * (fc_mitig - fc_base) / fc_base;
}

std::vector<std::pair<double, double>> fate_sweep(double acc_base, double acc_mitig,
                                                  double fc_base, double fc_mitig,
                                                  const std::vector<double>& lambdas) {
  std::vector<std::pair<double, double>> out;
  out.reserve(lambdas.size());
  for (const double l : lambdas) {
    out.emplace_back(l, fate(acc_base, acc_mitig, fc_base, fc_mitig, l));
  }
  return out;
}

double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                int num_classes) {
  if (y_true.size() != y_pred.size()) throw Error("macro_f1: length mismatch");
  if (y_true.empty()) throw Error("macro_f1: no samples");
  double sum = 0.0;
  int counted = 0;
  for (int k = 0; k < num_classes; ++k) {
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool pos = y_true[i] == k;
      const bool pred = y_pred[i] == k;
      tp += pos && pred;
      fp += !pos && pred;
      fn += pos && !pred;
    }
    if (tp + fn == 0 || tp + fp == 0) continue;  // undefined recall or precision
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    sum += (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

int parse_int_field(const std::string& field, const char* name, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(field, &pos);
    if (pos != field.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("CSV line " + std::to_string(line_no) + ": bad " + name + " '" + field +
                "'");
  }
}

}  // namespace

std::vector<PredictionRecord> read_prediction_csv(std::istream& is, int num_classes) {
  std::string line;
  if (!std::getline(is, line)) throw Error("CSV: no records");
  if (strip_cr(line) != "sample_id,y_true,y_pred,sensitive") {
    throw UsageError("CSV: unknown header '" + strip_cr(line) +
                     "', expected 'sample_id,y_true,y_pred,sensitive'");
  }
  std::vector<PredictionRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) {
      throw Error("CSV line " + std::to_string(line_no) + ": expected 4 fields, got " +
                  std::to_string(fields.size()));
    }
    PredictionRecord r;
    r.sample_id = fields[0];
    r.y_true = parse_int_field(fields[1], "y_true", line_no);
    r.y_pred = parse_int_field(fields[2], "y_pred", line_no);
    r.sensitive = parse_int_field(fields[3], "sensitive", line_no);
    if (r.y_true < 0 || r.y_true >= num_classes || r.y_pred < 0 || r.y_pred >= num_classes) {
      throw Error("CSV line " + std::to_string(line_no) + ": class index out of range");
    }
    if (r.sensitive != 0 && r.sensitive != 1) {
      throw Error("CSV line " + std::to_string(line_no) + ": sensitive must be 0 or 1");
    }
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error("CSV: no records");
  return out;
}

std::string write_prediction_csv(const std::vector<PredictionRecord>& records) {
  std::string out = "sample_id,y_true,y_pred,sensitive\n";
  for (const auto& r : records) {
    out += r.sample_id + ',' + std::to_string(r.y_true) + ',' + std::to_string(r.y_pred) +
           ',' + std::to_string(r.sensitive) + '\n';
  }
  return out;
}

std::string report_to_json(const FairnessReport& report) {
  json j;
  j["num_classes"] = report.num_classes;
  j["eopp0"] = report.eopp0;
  j["eopp1"] = report.eopp1;
  j["eodd"] = report.eodd;
  for (int a = 0; a < 2; ++a) {
    json g;
    g["precision"] = report.precision[a];
    g["recall"] = report.recall[a];
    g["f1"] = report.f1[a];
    j["per_group"][std::to_string(a)] = g;
  }
  j["macro_f1"] = report.macro_f1_all;
  j["accuracy"] = report.accuracy_all;
  j["skipped"] = json::array();
  for (const auto& s : report.skipped) {
    j["skipped"].push_back({{"class", s.class_index}, {"group", s.group}, {"rate", s.rate}});
  }
  return j.dump(2) + "\n";
}

FairnessReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("report JSON: ") + e.what());
  }
  try {
    FairnessReport r;
    r.num_classes = j.at("num_classes").get<int>();
    r.eopp0 = j.at("eopp0").get<double>();
    r.eopp1 = j.at("eopp1").get<double>();
    r.eodd = j.at("eodd").get<double>();
    for (int a = 0; a < 2; ++a) {
      const json& g = j.at("per_group").at(std::to_string(a));
      r.precision[a] = g.at("precision").get<double>();
      r.recall[a] = g.at("recall").get<double>();
      r.f1[a] = g.at("f1").get<double>();
    }
    r.macro_f1_all = j.at("macro_f1").get<double>();
    r.accuracy_all = j.at("accuracy").get<double>();
    if (j.contains("skipped")) {
      for (const auto& s : j["skipped"]) {
        r.skipped.push_back(
            {s.at("class").get<int>(), s.at("group").get<int>(), s.at("rate").get<std::string>()});
      }
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("report JSON: missing or bad field: ") + e.what());
  }
}

namespace {
std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}
}  // namespace

std::string report_to_markdown(const FairnessReport& report) {
  std::string md;
  md += "| Group | Precision | Recall | F1-score |\n";
  md += "|---|---|---|---|\n";
  for (int a = 0; a < 2; ++a) {
    md += "| " + std::to_string(a) + " | " + fmt4(report.precision[a]) + " | " +
          fmt4(report.recall[a]) + " | " + fmt4(report.f1[a]) + " |\n";
  }
  md += "\n| Eopp0 | Eopp1 | Eodd | Macro-F1 | Accuracy |\n";
  md += "|---|---|---|---|---|\n";
  md += "| " + fmt4(report.eopp0) + " | " + fmt4(report.eopp1) + " | " + fmt4(report.eodd) +
        " | " + fmt4(report.macro_f1_all) + " | " + fmt4(report.accuracy_all) + " |\n";
  return md;
}

}  // namespace atten::fairness
