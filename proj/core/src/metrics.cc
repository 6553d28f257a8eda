#include "daca/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace daca {
namespace {

struct BinStats {
  std::size_t count = 0;
  double confidence_sum = 0.0;
  double correct_sum = 0.0;

  double confidence() const { return confidence_sum / static_cast<double>(count); }
  double accuracy() const { return correct_sum / static_cast<double>(count); }
  double gap() const { return std::abs(accuracy() - confidence()); }
};

std::vector<BinStats> Accumulate(std::span<const EvalSample> samples,
                                 const BinPartition& partition) {
  if (partition.assignments.size() != samples.size()) {
    Fail(ErrorCode::kInput, "partition was built for a different sample set");
  }
  std::vector<BinStats> bins(static_cast<std::size_t>(partition.num_bins));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    BinStats& b = bins[static_cast<std::size_t>(partition.assignments[i])];
    ++b.count;
    b.confidence_sum += samples[i].confidence;
    b.correct_sum += samples[i].correct ? 1.0 : 0.0;
  }
  return bins;
}

int EqualWidthBin(double confidence, int num_bins) {
  const double g = static_cast<double>(num_bins);
  int bin = std::clamp(static_cast<int>(std::floor(confidence * g)), 0, num_bins - 1);
  // Snap against the exact edges bin/G so the [lower, upper) rule holds even
  // where confidence * G rounds across an integer.
  while (bin > 0 && confidence < static_cast<double>(bin) / g) --bin;
  while (bin < num_bins - 1 && confidence >= static_cast<double>(bin + 1) / g) ++bin;
  return bin;
}

}  // namespace

std::string_view ToString(BinScheme scheme) {
  return scheme == BinScheme::kEqualWidth ? "equal_width" : "equal_mass";
}

BinPartition Partition(std::span<const EvalSample> samples, BinScheme scheme,
                       int num_bins) {
  if (num_bins < 1) Fail(ErrorCode::kInput, "bin count must be >= 1");
  if (samples.empty()) Fail(ErrorCode::kInput, "no samples to partition");
  for (const auto& s : samples) {
    if (!(s.confidence > 0.0 && s.confidence <= 1.0)) {
      Fail(ErrorCode::kInput, "sample confidence outside (0, 1]");
    }
  }

  BinPartition out{scheme, num_bins, std::vector<int>(samples.size()), {}};
  out.boundaries.resize(static_cast<std::size_t>(num_bins) + 1);

  if (scheme == BinScheme::kEqualWidth) {
    for (int g = 0; g <= num_bins; ++g) {
      out.boundaries[g] = static_cast<double>(g) / static_cast<double>(num_bins);
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      out.assignments[i] = EqualWidthBin(samples[i].confidence, num_bins);
    }
    return out;
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].confidence < samples[b].confidence;
  });
  const std::size_t n = samples.size();
  const auto g_count = static_cast<std::size_t>(num_bins);
  for (std::size_t rank = 0; rank < n; ++rank) {
    out.assignments[order[rank]] = static_cast<int>(rank * g_count / n);
  }
  // Edge g is the smallest confidence in bin g; empty bins repeat the
  // previous edge.
  out.boundaries.front() = 0.0;
  out.boundaries.back() = 1.0;
  for (std::size_t g = 1; g < g_count; ++g) {
    const std::size_t first_rank = (g * n + g_count - 1) / g_count;
    out.boundaries[g] = first_rank < n ? samples[order[first_rank]].confidence
                                       : out.boundaries[g - 1];
    out.boundaries[g] = std::max(out.boundaries[g], out.boundaries[g - 1]);
  }
  return out;
}

double Ece(std::span<const EvalSample> samples, const BinPartition& partition) {
  const auto bins = Accumulate(samples, partition);
  const double n = static_cast<double>(samples.size());
  double ece = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    ece += static_cast<double>(b.count) / n * b.gap();
  }
  return ece;
}

double Mce(std::span<const EvalSample> samples, const BinPartition& partition) {
  const auto bins = Accumulate(samples, partition);
  double mce = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    mce = std::max(mce, b.gap());
  }
  return mce;
}

double Aece(std::span<const EvalSample> samples, int num_bins) {
  return Ece(samples, Partition(samples, BinScheme::kEqualMass, num_bins));
}

double Brier(std::span<const EvalSample> samples) {
  if (samples.empty()) Fail(ErrorCode::kInput, "no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    const double d = s.confidence - (s.correct ? 1.0 : 0.0);
    total += d * d;
  }
  return total / static_cast<double>(samples.size());
}

double NllMetric(
    std::span<const std::pair<ProbabilityVector, std::optional<int>>> samples) {
  if (samples.empty()) Fail(ErrorCode::kInput, "no samples");
  double total = 0.0;
  for (const auto& [pv, label] : samples) {
    if (!label) Fail(ErrorCode::kMissingLabel, "NLL needs a gold label");
    if (*label < 0 || static_cast<std::size_t>(*label) >= pv.size()) {
      Fail(ErrorCode::kInput, "label outside [0, k)");
    }
    total -= std::log(std::max(pv[static_cast<std::size_t>(*label)], kProbabilityFloor));
  }
  return total / static_cast<double>(samples.size());
}

ReliabilityTable MakeReliabilityTable(std::span<const EvalSample> samples,
                                      const BinPartition& partition) {
  const auto bins = Accumulate(samples, partition);
  ReliabilityTable table;
  table.reserve(bins.size());
  for (std::size_t g = 0; g < bins.size(); ++g) {
    ReliabilityRow row{static_cast<int>(g), bins[g].count, std::nullopt, std::nullopt};
    if (bins[g].count > 0) {
      row.confidence = bins[g].confidence();
      row.accuracy = bins[g].accuracy();
    }
    table.push_back(row);
  }
  return table;
}

std::vector<SelectivePoint> SelectiveAccuracy(
    std::span<const EvalSample> samples, std::span<const double> thresholds) {
  if (samples.empty()) Fail(ErrorCode::kInput, "no samples");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) {
      Fail(ErrorCode::kInput, "selective threshold outside [0, 1]");
    }
    if (i > 0 && thresholds[i] < thresholds[i - 1]) {
      Fail(ErrorCode::kInput, "selective thresholds must be ascending");
    }
  }
  std::vector<SelectivePoint> out;
  out.reserve(thresholds.size());
  const double n = static_cast<double>(samples.size());
  for (double t : thresholds) {
    std::size_t kept = 0;
    std::size_t correct = 0;
    for (const auto& s : samples) {
      if (s.confidence >= t) {
        ++kept;
        correct += s.correct ? 1 : 0;
      }
    }
    SelectivePoint point{t, static_cast<double>(kept) / n, std::nullopt};
    if (kept > 0) point.accuracy = static_cast<double>(correct) / static_cast<double>(kept);
    out.push_back(point);
  }
  return out;
}

std::vector<double> DefaultSelectiveThresholds() {
  std::vector<double> out;
  for (int i = 10; i <= 19; ++i) out.push_back(static_cast<double>(i) * 0.05);
  return out;
}

std::vector<EvalSample> MakeEvalSamples(const Dataset& ds,
                                        const ScalingParams& params) {
  std::vector<EvalSample> out;
  out.reserve(ds.size());
  for (const auto& rec : ds.records()) {
    if (!rec.label) {
      Fail(ErrorCode::kMissingLabel, "record '" + rec.id + "' has no label");
    }
    const ProbabilityVector q = ApplyScaling(rec, params);
    const std::size_t pred = ArgmaxPrediction(q.probs());
    out.push_back({pred, Confidence(q), static_cast<int>(pred) == *rec.label});
  }
  return out;
}

MetricSummary Summarize(const Dataset& ds, const ScalingParams& params,
                        int num_bins) {
  const auto samples = MakeEvalSamples(ds, params);
  const auto width = Partition(samples, BinScheme::kEqualWidth, num_bins);

  std::vector<std::pair<ProbabilityVector, std::optional<int>>> probs;
  probs.reserve(ds.size());
  for (const auto& rec : ds.records()) probs.emplace_back(ApplyScaling(rec, params), rec.label);

  const double correct = static_cast<double>(std::count_if(
      samples.begin(), samples.end(), [](const EvalSample& s) { return s.correct; }));
  return MetricSummary{
      Ece(samples, width),
      Mce(samples, width),
      Aece(samples, num_bins),
      Brier(samples),
      NllMetric(probs),
      correct / static_cast<double>(samples.size()),
  };
}

}  // namespace daca
