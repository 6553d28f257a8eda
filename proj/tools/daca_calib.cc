// daca-calib: command-line front end for fitting, evaluating and simulating
// post-hoc confidence calibration.
//
// Exit status:
//   0 success            4 optimizer diverged (report still written)
//   1 usage/input error  5 config error
//   2 parse error        6 missing label
//   3 all records disagree (daca impossible)
//   7 io error           8 oracle-check mismatch

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "daca/io.h"

namespace {

enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kParseError = 2,
  kAllDisagree = 3,
  kDiverged = 4,
  kConfigError = 5,
  kMissingLabel = 6,
  kIoError = 7,
  kOracleMismatch = 8,
};

int ExitFor(daca::ErrorCode code) {
  switch (code) {
    case daca::ErrorCode::kParse: return kParseError;
    case daca::ErrorCode::kAllDisagree: return kAllDisagree;
    case daca::ErrorCode::kConfig: return kConfigError;
    case daca::ErrorCode::kMissingLabel: return kMissingLabel;
    case daca::ErrorCode::kIo: return kIoError;
    case daca::ErrorCode::kInput:
    case daca::ErrorCode::kDomain: return kUsage;
  }
  return kUsage;
}

// Diagnostics go to stderr so oracle-check JSON on stdout stays clean.
void ConfigureLogging() {
  spdlog::set_default_logger(spdlog::stderr_color_st("daca-calib"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CALIB_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

void AddOptimizerFlags(CLI::App* cmd, daca::OptimizerConfig& opt) {
  cmd->add_option("--lr", opt.learning_rate, "Adam learning rate")
      ->capture_default_str();
  cmd->add_option("--epochs", opt.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch", opt.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Shuffling seed")->capture_default_str();
}

const std::map<std::string, daca::Objective> kObjectives = {
    {"daca", daca::Objective::kDaca},
    {"naive", daca::Objective::kNaive},
    {"supervised", daca::Objective::kSupervisedNll},
    {"supervised_nll", daca::Objective::kSupervisedNll},
};

const std::map<std::string, daca::ScalingKind> kShapes = {
    {"scalar", daca::ScalingKind::kScalar},
    {"vector", daca::ScalingKind::kVector},
    {"matrix", daca::ScalingKind::kMatrix},
};

void LogMetrics(const char* stage, const daca::MetricSummary& m) {
  spdlog::info("{:>4}: ECE {:.4f}  MCE {:.4f}  AECE {:.4f}  Brier {:.4f}  NLL {:.4f}  acc {:.4f}",
               stage, m.ece, m.mce, m.aece, m.brier, m.nll, m.accuracy);
}

}  // namespace

int main(int argc, char** argv) {
  ConfigureLogging();

  CLI::App app{"Post-hoc confidence calibration for post-trained language models"};
  app.set_version_flag("--version", std::string(daca::ToolkitVersion()));
  app.require_subcommand(1);

  daca::RunConfig run;

  auto* calibrate = app.add_subcommand("calibrate", "Fit scaling on validation logits, evaluate on test");
  calibrate->add_option("--val", run.val_path, "Validation JSONL")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--test", run.test_path, "Test JSONL (labeled)")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--objective", run.objective, "daca | naive | supervised")
      ->transform(CLI::CheckedTransformer(kObjectives, CLI::ignore_case))
      ->capture_default_str();
  calibrate->add_option("--shape", run.shape, "scalar | vector | matrix")
      ->transform(CLI::CheckedTransformer(kShapes, CLI::ignore_case))
      ->capture_default_str();
  calibrate->add_option("--bins", run.num_bins, "Confidence bins")->capture_default_str()
      ->check(CLI::PositiveNumber);
  calibrate->add_option("--thresholds", run.thresholds, "Selective-classification thresholds");
  calibrate->add_option("--out", run.out_dir, "Output directory")->required();
  AddOptimizerFlags(calibrate, run.optimizer);

  auto* evaluate = app.add_subcommand("evaluate", "Apply saved parameters to test logits");
  evaluate->add_option("--test", run.test_path, "Test JSONL (labeled)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--params", run.params_path, "Parameter JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--bins", run.num_bins, "Confidence bins")->capture_default_str()
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--thresholds", run.thresholds, "Selective-classification thresholds");
  evaluate->add_option("--out", run.out_dir, "Output directory")->required();

  std::filesystem::path sim_config;
  std::filesystem::path sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic mixture and check the propositions");
  simulate->add_option("--config", sim_config, "Mixture config JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "Output directory")->required();

  std::filesystem::path oracle_val;
  daca::Objective oracle_objective = daca::Objective::kDaca;
  daca::OptimizerConfig oracle_opt;
  daca::TemperatureGrid oracle_grid;
  auto* oracle = app.add_subcommand("oracle-check", "Compare Adam against exhaustive temperature search");
  oracle->add_option("--val", oracle_val, "Validation JSONL")->required()->check(CLI::ExistingFile);
  oracle->add_option("--objective", oracle_objective, "daca | naive | supervised")
      ->transform(CLI::CheckedTransformer(kObjectives, CLI::ignore_case))
      ->capture_default_str();
  oracle->add_option("--grid-min", oracle_grid.tau_min)->capture_default_str();
  oracle->add_option("--grid-max", oracle_grid.tau_max)->capture_default_str();
  oracle->add_option("--grid-points", oracle_grid.num_points)->capture_default_str();
  AddOptimizerFlags(oracle, oracle_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*calibrate) {
      const daca::CalibrationReport report = daca::RunCalibrate(run);
      const auto& counts = *report.validation_counts;
      spdlog::info("validation: {} records, {} agreement, {} disagreement", counts.total,
                   counts.agreement, counts.disagreement);
      LogMetrics("pre", report.pre.metrics);
      LogMetrics("post", report.post.metrics);
      if (report.optimizer->diverged) {
        spdlog::error("optimizer diverged: scale exceeded {:g} after {} epochs",
                      daca::kDivergenceGuard, report.optimizer->epochs_run);
        return kDiverged;
      }
      return kOk;
    }
    if (*evaluate) {
      const daca::CalibrationReport report = daca::RunEvaluate(run);
      LogMetrics("pre", report.pre.metrics);
      LogMetrics("post", report.post.metrics);
      return kOk;
    }
    if (*simulate) {
      const daca::SimulateConfig cfg = daca::ReadSimulateConfig(sim_config);
      const daca::SimulationResult result = daca::RunSimulate(cfg, sim_out);
      for (const auto& p : result.propositions) {
        spdlog::info("{}: measured {:.6g} predicted {:.6g} -> {}", p.name, p.measured,
                     p.predicted, p.passed ? "pass" : "FAIL");
      }
      for (const auto& t : result.traces) {
        if (!t.warning.empty()) spdlog::warn("{}", t.warning);
      }
      return kOk;
    }
    if (*oracle) {
      const daca::Dataset ds = daca::ReadLogitsJsonl(oracle_val);
      const auto result = daca::RunOracleCheck(ds, oracle_objective, oracle_opt, oracle_grid);
      std::cout << daca::FormatOracleCheckJson(result);
      return result.passed ? kOk : kOracleMismatch;
    }
  } catch (const daca::Error& e) {
    spdlog::error("{}: {}", daca::ToString(e.code()), e.what());
    return ExitFor(e.code());
  } catch (const std::exception& e) {
    spdlog::critical("{}", e.what());
    return kUsage;
  }
  return kUsage;
}
