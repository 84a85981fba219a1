#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atten/synthlab.hpp"

namespace atten::experiment {

enum class Mode { Baseline, AttenFull, AttenNoMask, AttenNoSnnl };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct ExperimentConfig {
  synthlab::SynthSpec data;
  std::vector<Mode> modes = {Mode::Baseline, Mode::AttenFull};
  synthlab::TrainConfig train;  // its seed field is overridden per run
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  void validate() const;  // modes must include baseline plus an atten mode
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

// Model/alpha wiring per mode: no_mask drops only the guided masks, no_snnl
// zeroes every alpha but keeps attention.
synthlab::ToyModelConfig model_config_for(Mode mode, const ExperimentConfig& cfg);
std::vector<double> alphas_for(Mode mode, const ExperimentConfig& cfg);

struct RunResult {
  std::uint64_t seed = 0;
  std::uint64_t dataset_seed = 0;
  fairness::FairnessReport report;  // balanced test split
  synthlab::TrainTrace trace;
  std::vector<fairness::PredictionRecord> predictions;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct ModeSummary {
  Mode mode = Mode::Baseline;
  std::vector<RunResult> runs;  // ordered by the seed list
  Aggregate eopp0, eopp1, eodd;
  Aggregate precision[2], recall[2], f1[2];
  Aggregate macro_f1;
  // vs the baseline mode at lambda = 1, paired by seed; missing when a
  // baseline fairness score is zero for some seed
  std::optional<Aggregate> fate_eopp0, fate_eopp1, fate_eodd;
};

struct ComparisonReport {
  ExperimentConfig config;
  std::vector<ModeSummary> modes;

  std::string to_markdown() const;
  std::string to_json() const;
};

// Runs every (mode, seed) pair; pairs share the dataset for their seed.
// Independent runs may execute on separate threads; aggregation order is
// fixed by the config, so output is deterministic.
ComparisonReport run_experiment(const ExperimentConfig& cfg);

// Writes config echo, seed manifest, per-run predictions.csv + report.json,
// per-mode summary.json, comparison.md/json, and optionally the datasets as
// FTEN tensors with CSV label manifests. Creates out_dir if needed.
void write_artifacts(const ComparisonReport& report, const std::string& out_dir,
                     bool export_data);

double median(std::vector<double> values);

// Exact two-sided paired sign test; ties are dropped. Returns 1.0 when every
// pair ties.
double sign_test_p(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace atten::experiment
