#pragma once

// File formats and the end-to-end runs behind the command-line tool.
//
// Logit files are JSON Lines, one record per line:
//   {"id":"q1","k":2,"plm_logits":[1.0,0.0],"polm_logits":[2.0,0.0],
//    "label":0,"split":"test"}
// `label` and `split` are optional. Doubles are written in shortest
// round-trip form, so write -> read -> write is byte-stable.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "daca/align.h"
#include "daca/core.h"
#include "daca/metrics.h"
#include "daca/synthetic.h"

namespace daca {

const char* ToolkitVersion();

// Parses JSONL. Any malformed line rejects the whole input with kParse and
// a message of the form "<source>:<line>: <reason>".
Dataset ParseLogitsJsonl(std::istream& in, const std::string& source = "<input>");
Dataset ReadLogitsJsonl(const std::filesystem::path& path);

std::string FormatLogitsJsonl(const Dataset& ds);
void WriteLogitsJsonl(const std::filesystem::path& path, const Dataset& ds);

// {"kind":"scalar","k":0,"values":[1.7]}; matrix values are row-major.
std::string FormatParamsJson(const ScalingParams& params);
ScalingParams ParseParamsJson(const std::string& text);
ScalingParams ReadParamsJson(const std::filesystem::path& path);

struct RunConfig {
  std::filesystem::path val_path;     // calibrate only
  std::filesystem::path test_path;
  std::filesystem::path params_path;  // evaluate only
  std::filesystem::path out_dir;
  Objective objective = Objective::kDaca;
  ScalingKind shape = ScalingKind::kScalar;
  OptimizerConfig optimizer;
  int num_bins = 10;
  std::vector<double> thresholds = DefaultSelectiveThresholds();
};

struct DatasetCounts {
  std::size_t total = 0;
  std::size_t agreement = 0;
  std::size_t disagreement = 0;
};

DatasetCounts CountAgreement(const Dataset& ds);

struct EvaluationBlock {
  MetricSummary metrics;
  ReliabilityTable reliability;
  std::vector<SelectivePoint> selective;
};

struct OptimizerSummary {
  int epochs_run = 0;
  double final_loss = 0.0;
  std::size_t examples_used = 0;
  std::size_t examples_filtered = 0;
  bool diverged = false;
};

struct CalibrationReport {
  std::string command;  // "calibrate" or "evaluate"
  RunConfig config;
  ScalingParams params = ScalingParams::Scalar(1.0);
  std::optional<OptimizerSummary> optimizer;
  std::optional<DatasetCounts> validation_counts;
  DatasetCounts test_counts;
  EvaluationBlock pre;   // identity scaling
  EvaluationBlock post;  // learned scaling
};

EvaluationBlock Evaluate(const Dataset& test, const ScalingParams& params,
                         int num_bins, const std::vector<double>& thresholds);

std::string FormatReportJson(const CalibrationReport& report);

// Fits on the validation file, evaluates on the test file and writes
// report.json, params.json, reliability.csv, selective.csv and trace.csv
// into cfg.out_dir. Throws daca::Error; a diverged fit still writes the
// report and sets optimizer->diverged.
CalibrationReport RunCalibrate(const RunConfig& cfg);

// Applies saved parameters to the test file; writes report.json,
// reliability.csv and selective.csv.
CalibrationReport RunEvaluate(const RunConfig& cfg);

struct SimulateConfig {
  MixtureConfig mixture;
  OptimizerConfig optimizer;
  TemperatureGrid grid{0.05, 100.0, 2000, true};
};

// Reads a JSON object with the MixtureConfig fields at top level and
// optional "optimizer" and "grid" objects. Throws kConfig naming the field.
SimulateConfig ParseSimulateConfig(const std::string& text);
SimulateConfig ReadSimulateConfig(const std::filesystem::path& path);

struct SimulationResult {
  std::vector<PropositionReport> propositions;
  std::vector<SubsetTrace> traces;
};

// Writes validation.jsonl, test.jsonl, propositions.json and trace.csv.
SimulationResult RunSimulate(const SimulateConfig& cfg,
                             const std::filesystem::path& out_dir);

struct OracleCheckResult {
  GridResult grid;
  double adam_tau = 0.0;
  double adam_loss = 0.0;
  double relative_tau_gap = 0.0;
  double loss_gap = 0.0;  // adam_loss - grid.loss
  bool diverged = false;
  bool passed = false;  // within 2% relative tau and 1e-4 loss
};

OracleCheckResult RunOracleCheck(const Dataset& ds, Objective objective,
                                 const OptimizerConfig& cfg,
                                 const TemperatureGrid& grid);

std::string FormatOracleCheckJson(const OracleCheckResult& result);

}  // namespace daca
