#pragma once

// Calibration and selective-classification metrics over labeled data.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "daca/align.h"
#include "daca/core.h"

namespace daca {

struct EvalSample {
  std::size_t prediction;
  double confidence;  // in (0, 1]
  bool correct;
};

enum class BinScheme { kEqualWidth, kEqualMass };

std::string_view ToString(BinScheme scheme);

struct BinPartition {
  BinScheme scheme;
  int num_bins;
  std::vector<int> assignments;   // one bin index per sample
  std::vector<double> boundaries; // num_bins + 1 edges
};

struct ReliabilityRow {
  int bin;
  std::size_t count;
  std::optional<double> confidence;  // empty for an empty bin
  std::optional<double> accuracy;
};

using ReliabilityTable = std::vector<ReliabilityRow>;

struct SelectivePoint {
  double threshold;
  double coverage;
  std::optional<double> accuracy;  // empty when nothing is retained
};

// Equal-width bins are [g/G, (g+1)/G) with the top bin closed at 1.
// Equal-mass bins hold sorted runs whose sizes differ by at most one; ties
// keep input order.
BinPartition Partition(std::span<const EvalSample> samples, BinScheme scheme,
                       int num_bins);

double Ece(std::span<const EvalSample> samples, const BinPartition& partition);
double Mce(std::span<const EvalSample> samples, const BinPartition& partition);
double Aece(std::span<const EvalSample> samples, int num_bins);
double Brier(std::span<const EvalSample> samples);

// Mean -log p(label), clamped at kProbabilityFloor.
double NllMetric(
    std::span<const std::pair<ProbabilityVector, std::optional<int>>> samples);

ReliabilityTable MakeReliabilityTable(std::span<const EvalSample> samples,
                                      const BinPartition& partition);

// Retains samples with confidence >= threshold. Thresholds must be
// ascending and inside [0, 1].
std::vector<SelectivePoint> SelectiveAccuracy(
    std::span<const EvalSample> samples, std::span<const double> thresholds);

// 0.50, 0.55, ..., 0.95.
std::vector<double> DefaultSelectiveThresholds();

// Predictions of sigma(phi(polm)) against gold labels; kMissingLabel if any
// record is unlabeled.
std::vector<EvalSample> MakeEvalSamples(const Dataset& ds,
                                        const ScalingParams& params);

struct MetricSummary {
  double ece;
  double mce;
  double aece;
  double brier;
  double nll;
  double accuracy;
};

MetricSummary Summarize(const Dataset& ds, const ScalingParams& params,
                        int num_bins);

}  // namespace daca
