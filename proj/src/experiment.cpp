#include "atten/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "atten/io.hpp"

namespace atten::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::Baseline:
      return "baseline";
    case Mode::AttenFull:
      return "atten_full";
    case Mode::AttenNoMask:
      return "atten_no_mask";
    case Mode::AttenNoSnnl:
      return "atten_no_snnl";
  }
  return "unknown";
}

Mode mode_from_name(const std::string& name) {
  if (name == "baseline") return Mode::Baseline;
  if (name == "atten_full") return Mode::AttenFull;
  if (name == "atten_no_mask") return Mode::AttenNoMask;
  if (name == "atten_no_snnl") return Mode::AttenNoSnnl;
  throw Error("unknown experiment mode '" + name + "'");
}

void ExperimentConfig::validate() const {
  data.validate();
  train.validate();
  if (seeds.empty()) throw Error("experiment: need at least one seed");
  if (modes.empty()) throw Error("experiment: need at least one mode");
  bool has_baseline = false, has_atten = false;
  for (const Mode m : modes) {
    has_baseline = has_baseline || m == Mode::Baseline;
    has_atten = has_atten || m != Mode::Baseline;
  }
  if (!has_baseline || !has_atten) {
    throw Error("experiment: modes must include baseline and at least one atten mode");
  }
  for (std::size_t i = 0; i < modes.size(); ++i) {
    for (std::size_t j = i + 1; j < modes.size(); ++j) {
      if (modes[i] == modes[j]) throw Error("experiment: duplicate mode");
    }
  }
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("data")) {
      const json& d = j["data"];
      if (d.contains("image_size")) cfg.data.image_size = d["image_size"].get<std::size_t>();
      if (d.contains("num_classes")) cfg.data.num_classes = d["num_classes"].get<int>();
      if (d.contains("train_correlation"))
        cfg.data.train_correlation = d["train_correlation"].get<double>();
      if (d.contains("test_correlation"))
        cfg.data.test_correlation = d["test_correlation"].get<double>();
      if (d.contains("total_samples"))
        cfg.data.total_samples = d["total_samples"].get<std::size_t>();
      if (d.contains("noise_std")) cfg.data.noise_std = d["noise_std"].get<double>();
      if (d.contains("seed")) cfg.data.seed = d["seed"].get<std::uint64_t>();
    }
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : j["modes"]) cfg.modes.push_back(mode_from_name(m.get<std::string>()));
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
      if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
      if (t.contains("learning_rate"))
        cfg.train.learning_rate = t["learning_rate"].get<double>();
      if (t.contains("alphas")) cfg.train.alphas = t["alphas"].get<std::vector<double>>();
      if (t.contains("temperature")) cfg.train.temperature = t["temperature"].get<double>();
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw Error(std::string("config JSON: bad field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["data"] = {{"image_size", cfg.data.image_size},
               {"num_classes", cfg.data.num_classes},
               {"train_correlation", cfg.data.train_correlation},
               {"test_correlation", cfg.data.test_correlation},
               {"total_samples", cfg.data.total_samples},
               {"noise_std", cfg.data.noise_std},
               {"seed", cfg.data.seed}};
  j["modes"] = json::array();
  for (const Mode m : cfg.modes) j["modes"].push_back(mode_name(m));
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"alphas", cfg.train.alphas},
                {"temperature", cfg.train.temperature}};
  j["seeds"] = cfg.seeds;
  return j.dump(2) + "\n";
}

synthlab::ToyModelConfig model_config_for(Mode mode, const ExperimentConfig& cfg) {
  synthlab::ToyModelConfig mc;
  mc.image_size = cfg.data.image_size;
  mc.num_classes = cfg.data.num_classes;
  mc.attention = mode != Mode::Baseline;
  mc.use_guided_mask = mode == Mode::AttenFull || mode == Mode::AttenNoSnnl;
  return mc;
}

std::vector<double> alphas_for(Mode mode, const ExperimentConfig& cfg) {
  if (mode == Mode::Baseline || mode == Mode::AttenNoSnnl) {
    return std::vector<double>(cfg.train.alphas.size(), 0.0);
  }
  return cfg.train.alphas;
}

namespace {

Aggregate aggregate_of(const std::vector<double>& xs) {
  Aggregate a;
  if (xs.empty()) return a;
  double sum = 0.0;
  for (const double x : xs) sum += x;
  a.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

template <typename Get>
Aggregate over_runs(const std::vector<RunResult>& runs, Get get) {
  std::vector<double> xs;
  xs.reserve(runs.size());
  for (const auto& r : runs) xs.push_back(get(r));
  return aggregate_of(xs);
}

std::optional<Aggregate> fate_aggregate(const std::vector<RunResult>& base,
                                        const std::vector<RunResult>& runs,
                                        double fairness::FairnessReport::*metric) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double fc_b = base[i].report.*metric;
    const double acc_b = base[i].report.macro_f1_all;
    if (!(fc_b > 0.0) || !(acc_b > 0.0)) return std::nullopt;
    xs.push_back(fairness::fate(acc_b, runs[i].report.macro_f1_all, fc_b,
                                runs[i].report.*metric, 1.0));
  }
  return aggregate_of(xs);
}

}  // namespace

ComparisonReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ComparisonReport out;
  out.config = cfg;
  out.modes.resize(cfg.modes.size());

  const std::size_t n_jobs = cfg.modes.size() * cfg.seeds.size();
  std::vector<RunResult> results(n_jobs);
  std::vector<std::string> errors(n_jobs);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t job = 0; job < static_cast<std::ptrdiff_t>(n_jobs); ++job) {
    const std::size_t mi = static_cast<std::size_t>(job) / cfg.seeds.size();
    const std::size_t si = static_cast<std::size_t>(job) % cfg.seeds.size();
    try {
      const std::uint64_t seed = cfg.seeds[si];
      synthlab::SynthSpec spec = cfg.data;
      spec.seed = Rng(cfg.data.seed).fork(seed).next_u64();

      const synthlab::Dataset ds = synthlab::generate(spec);
      synthlab::ToyModel model =
          synthlab::ToyModel::init(model_config_for(cfg.modes[mi], cfg), seed);
      synthlab::TrainConfig tcfg = cfg.train;
      tcfg.seed = seed;
      tcfg.alphas = alphas_for(cfg.modes[mi], cfg);

      RunResult r;
      r.seed = seed;
      r.dataset_seed = spec.seed;
      r.trace = synthlab::train(model, ds.train, ds.val, tcfg);
      auto ev = synthlab::evaluate(model, ds.test);
      r.report = std::move(ev.report);
      r.predictions = std::move(ev.records);
      results[static_cast<std::size_t>(job)] = std::move(r);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(job)] =
          mode_name(cfg.modes[mi]) + "/seed " + std::to_string(cfg.seeds[si]) + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error("experiment run failed: " + e);
  }

  std::size_t base_index = 0;
  for (std::size_t mi = 0; mi < cfg.modes.size(); ++mi) {
    if (cfg.modes[mi] == Mode::Baseline) base_index = mi;
  }

  for (std::size_t mi = 0; mi < cfg.modes.size(); ++mi) {
    ModeSummary& s = out.modes[mi];
    s.mode = cfg.modes[mi];
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      s.runs.push_back(results[mi * cfg.seeds.size() + si]);
    }
  }
  const std::vector<RunResult>& base_runs = out.modes[base_index].runs;

  for (ModeSummary& s : out.modes) {
    s.eopp0 = over_runs(s.runs, [](const RunResult& r) { return r.report.eopp0; });
    s.eopp1 = over_runs(s.runs, [](const RunResult& r) { return r.report.eopp1; });
    s.eodd = over_runs(s.runs, [](const RunResult& r) { return r.report.eodd; });
    s.macro_f1 = over_runs(s.runs, [](const RunResult& r) { return r.report.macro_f1_all; });
    for (int a = 0; a < 2; ++a) {
      s.precision[a] =
          over_runs(s.runs, [a](const RunResult& r) { return r.report.precision[a]; });
      s.recall[a] = over_runs(s.runs, [a](const RunResult& r) { return r.report.recall[a]; });
      s.f1[a] = over_runs(s.runs, [a](const RunResult& r) { return r.report.f1[a]; });
    }
    s.fate_eopp0 = fate_aggregate(base_runs, s.runs, &fairness::FairnessReport::eopp0);
    s.fate_eopp1 = fate_aggregate(base_runs, s.runs, &fairness::FairnessReport::eopp1);
    s.fate_eodd = fate_aggregate(base_runs, s.runs, &fairness::FairnessReport::eodd);
  }
  return out;
}

namespace {

std::string pm(const Aggregate& a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f±%.3f", a.mean, a.stddev);
  return buf;
}

std::string pm_fate(const Aggregate& m, const std::optional<Aggregate>& f) {
  if (!f) return pm(m) + " / n/a";
  return pm(m) + " / " + pm(*f);
}

json aggregate_json(const Aggregate& a) {
  return json{{"mean", a.mean}, {"std", a.stddev}};
}

}  // namespace

std::string ComparisonReport::to_markdown() const {
  std::string md;
  md += "| Method | Group | Precision | Recall | F1-score | Eopp0 / FATE | Eopp1 / FATE "
        "| Eodd / FATE |\n";
  md += "|---|---|---|---|---|---|---|---|\n";
  for (const ModeSummary& s : modes) {
    for (int a = 0; a < 2; ++a) {
      md += "| " + (a == 0 ? mode_name(s.mode) : std::string()) + " | " + std::to_string(a) +
            " | " + pm(s.precision[a]) + " | " + pm(s.recall[a]) + " | " + pm(s.f1[a]) +
            " | ";
      if (a == 0) {
        md += pm_fate(s.eopp0, s.fate_eopp0) + " | " + pm_fate(s.eopp1, s.fate_eopp1) +
              " | " + pm_fate(s.eodd, s.fate_eodd) + " |\n";
      } else {
        md += " | " + std::string(" | ") + " |\n";
      }
    }
  }
  return md;
}

std::string ComparisonReport::to_json() const {
  json j;
  j["config"] = json::parse(config_to_json(config));
  j["modes"] = json::array();
  for (const ModeSummary& s : modes) {
    json m;
    m["mode"] = mode_name(s.mode);
    m["eopp0"] = aggregate_json(s.eopp0);
    m["eopp1"] = aggregate_json(s.eopp1);
    m["eodd"] = aggregate_json(s.eodd);
    m["macro_f1"] = aggregate_json(s.macro_f1);
    for (int a = 0; a < 2; ++a) {
      m["per_group"][std::to_string(a)] = {{"precision", aggregate_json(s.precision[a])},
                                           {"recall", aggregate_json(s.recall[a])},
                                           {"f1", aggregate_json(s.f1[a])}};
    }
    m["fate_eopp0"] = s.fate_eopp0 ? aggregate_json(*s.fate_eopp0) : json(nullptr);
    m["fate_eopp1"] = s.fate_eopp1 ? aggregate_json(*s.fate_eopp1) : json(nullptr);
    m["fate_eodd"] = s.fate_eodd ? aggregate_json(*s.fate_eodd) : json(nullptr);
    m["runs"] = json::array();
    for (const RunResult& r : s.runs) {
      m["runs"].push_back({{"seed", r.seed},
                           {"dataset_seed", r.dataset_seed},
                           {"best_epoch", r.trace.best_epoch},
                           {"report", json::parse(fairness::report_to_json(r.report))}});
    }
    j["modes"].push_back(std::move(m));
  }
  return j.dump(2) + "\n";
}

namespace {

void atomic_write_ften(const std::string& path, const Tensor& t) {
  const std::string tmp = path + ".tmp";
  write_ften(tmp, t);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("rename failed: " + tmp + ": " + ec.message());
}

Tensor stack_images(const std::vector<synthlab::SynthSample>& samples, bool masks) {
  const std::size_t s = samples[0].image.dim(1);
  Tensor out(Dims{samples.size(), 1, s, s});
  const std::size_t plane = s * s;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& src = masks ? samples[i].mask : samples[i].image;
    std::copy(src.data(), src.data() + plane, out.data() + i * plane);
  }
  return out;
}

void export_split(const fs::path& dir, const char* split,
                  const std::vector<synthlab::SynthSample>& samples, std::string& manifest) {
  atomic_write_ften((dir / (std::string(split) + "_images.ften")).string(),
                    stack_images(samples, false));
  atomic_write_ften((dir / (std::string(split) + "_masks.ften")).string(),
                    stack_images(samples, true));
  for (const auto& s : samples) {
    manifest += s.id + ',' + split + ',' + std::to_string(s.label) + ',' +
                std::to_string(s.sensitive) + '\n';
  }
}

}  // namespace

void write_artifacts(const ComparisonReport& report, const std::string& out_dir,
                     bool export_data) {
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error("cannot create output directory " + out_dir + ": " + ec.message());

  atomic_write_text((root / "config.json").string(), config_to_json(report.config));

  json manifest;
  manifest["seeds"] = report.config.seeds;
  json per_seed = json::array();
  if (!report.modes.empty()) {
    for (const RunResult& r : report.modes[0].runs) {
      per_seed.push_back({{"seed", r.seed}, {"dataset_seed", r.dataset_seed}});
    }
  }
  manifest["datasets"] = per_seed;
  atomic_write_text((root / "seed_manifest.json").string(), manifest.dump(2) + "\n");

  for (const ModeSummary& s : report.modes) {
    const fs::path mdir = root / mode_name(s.mode);
    fs::create_directories(mdir, ec);
    if (ec) throw Error("cannot create " + mdir.string() + ": " + ec.message());
    json summary;
    summary["mode"] = mode_name(s.mode);
    summary["eopp0"] = aggregate_json(s.eopp0);
    summary["eopp1"] = aggregate_json(s.eopp1);
    summary["eodd"] = aggregate_json(s.eodd);
    summary["macro_f1"] = aggregate_json(s.macro_f1);
    atomic_write_text((mdir / "summary.json").string(), summary.dump(2) + "\n");
    for (const RunResult& r : s.runs) {
      const fs::path rdir = mdir / ("seed_" + std::to_string(r.seed));
      fs::create_directories(rdir, ec);
      if (ec) throw Error("cannot create " + rdir.string() + ": " + ec.message());
      atomic_write_text((rdir / "predictions.csv").string(),
                        fairness::write_prediction_csv(r.predictions));
      atomic_write_text((rdir / "report.json").string(),
                        fairness::report_to_json(r.report));
    }
  }

  atomic_write_text((root / "comparison.md").string(), report.to_markdown());
  atomic_write_text((root / "comparison.json").string(), report.to_json());

  if (export_data) {
    for (const std::uint64_t seed : report.config.seeds) {
      synthlab::SynthSpec spec = report.config.data;
      spec.seed = Rng(report.config.data.seed).fork(seed).next_u64();
      const synthlab::Dataset ds = synthlab::generate(spec);
      const fs::path ddir = root / "data" / ("seed_" + std::to_string(seed));
      fs::create_directories(ddir, ec);
      if (ec) throw Error("cannot create " + ddir.string() + ": " + ec.message());
      std::string labels = "sample_id,split,label,sensitive\n";
      export_split(ddir, "train", ds.train, labels);
      export_split(ddir, "val", ds.val, labels);
      export_split(ddir, "test", ds.test, labels);
      atomic_write_text((ddir / "labels.csv").string(), labels);
    }
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sign_test_p(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("sign test: length mismatch");
  int n = 0, k = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;  // drop ties
    ++n;
    if (a[i] > b[i]) ++k;
  }
  if (n == 0) return 1.0;
  const int m = std::min(k, n - k);
  // p = 2 * P(X <= m), X ~ Binomial(n, 1/2)
  double tail = 0.0;
  double binom = 1.0;  // C(n, 0)
  for (int i = 0; i <= m; ++i) {
    tail += binom;
    binom = binom * static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  const double p = 2.0 * tail * std::pow(0.5, n);
  return std::min(p, 1.0);
}

}  // namespace atten::experiment
