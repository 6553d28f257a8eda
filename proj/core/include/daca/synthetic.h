#pragma once

// Controlled paired-logit datasets drawn from a two-component
// agreement/disagreement mixture, plus executable checks of the
// propositions about naive confidence alignment.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "daca/align.h"
#include "daca/core.h"

namespace daca {

// Mixture P = (1 - pi) P_agree + pi P_dis.
//
// Every record uses a two-level logit profile: the predicted class j gets
// ln(c (k-1) / (1-c)) and every other class 0, so max softmax equals c.
// The pre-trained model's confidence is its regional accuracy (calibrated by
// construction); the post-trained model's logits are its own calibrated
// profile multiplied by conf_sharpness (> 1 means over-confident).
struct MixtureConfig {
  double pi = 0.3;
  std::size_t n = 1000;
  std::size_t k = 4;
  std::uint64_t seed = 0;
  double acc_f_agree = 0.6;
  double acc_g_agree = 0.6;
  double acc_f_dis = 0.3;
  double acc_g_dis = 0.5;
  double conf_sharpness = 2.0;

  // Throws kConfig naming the offending field. Both models predict the same
  // class on agreement records, so acc_f_agree must equal acc_g_agree; on
  // disagreement records at most one model can be right, so
  // acc_f_dis + acc_g_dis <= 1 (== 1 when k == 2). Every regional accuracy
  // used as a confidence must lie in (1/k, 1).
  void Validate() const;

  std::size_t NumDisagreement() const;
};

// Deterministic given cfg.seed. Record ids are "<prefix><index>".
Dataset GenerateMixture(const MixtureConfig& cfg,
                        std::optional<Split> split = std::nullopt,
                        const std::string& id_prefix = "syn-");

// Logit vector whose softmax maximum is `confidence`, placed on `cls`.
std::vector<double> TwoLevelLogits(std::size_t k, std::size_t cls,
                                   double confidence);

struct PropositionReport {
  std::string name;
  double measured = 0.0;
  double predicted = 0.0;
  double gap = 0.0;        // |measured - predicted|
  double tolerance = 0.0;
  bool passed = false;
  std::size_t sample_count = 0;
  double standard_error = 0.0;
  std::optional<double> binned_ece;  // reference value, 10 equal-width bins
};

// Perfect-alignment ECE: the post-trained model reports the pre-trained
// model's confidence on every record while keeping its own predictions.
// measured = |mean confidence - mean accuracy|; predicted =
// pi * |acc_f_dis - acc_g_dis|; tolerance = tolerance_scale / sqrt(N).
PropositionReport VerifyPerfectAlignmentEce(const MixtureConfig& cfg,
                                            double tolerance_scale = 3.0);

// A record whose post-trained argmax c has pre-trained probability
// sigma_c(plm) < 1/k. The post-trained logits are two-level, which makes
// the single-record naive loss strictly decreasing in tau.
LogitRecord MakeDivergentRecord(std::size_t k, std::uint64_t seed);

// Checks that the naive loss at tau = kDivergenceGuard is strictly below
// every point of `grid`. measured = loss at the guard; predicted = grid
// minimum.
PropositionReport VerifyDivergentTemperature(const Dataset& ds,
                                             const TemperatureGrid& grid);

enum class Subset { kAgreement, kDisagreement, kAll };

std::string_view ToString(Subset subset);

struct SubsetTrace {
  Subset subset;
  std::optional<OptimizationTrace> trace;
  std::string warning;  // set when the subset is empty and was skipped
};

// Naive scalar alignment trained independently on each requested subset.
std::vector<SubsetTrace> TemperatureTrace(const Dataset& ds,
                                          const std::set<Subset>& subsets,
                                          const OptimizerConfig& cfg);

}  // namespace daca
