#pragma once

// Calibration objectives (naive confidence alignment, disagreement-aware
// alignment, supervised NLL), their analytic gradients, the Adam training
// loop and an exhaustive temperature grid used as an independent oracle.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "daca/core.h"

namespace daca {

enum class ScalingKind { kScalar, kVector, kMatrix };
enum class Objective { kDaca, kNaive, kSupervisedNll };

std::string_view ToString(ScalingKind kind);
std::string_view ToString(Objective objective);
std::optional<ScalingKind> ParseScalingKind(std::string_view text);
// Accepts "daca", "naive", "supervised" and "supervised_nll".
std::optional<Objective> ParseObjective(std::string_view text);

// Learned rescaling of the post-trained model's logits:
//   scalar: z / tau            (tau > 0)
//   vector: z ./ v             (every v_i > 0)
//   matrix: W z                (W is k x k, row-major, unconstrained)
//
// Optimization runs in "raw" coordinates: log(tau), log(v_i), or the matrix
// entries themselves, so positivity holds without projection.
class ScalingParams {
 public:
  static ScalingParams Scalar(double tau);
  static ScalingParams Vector(std::vector<double> scales);
  static ScalingParams Matrix(std::size_t k, std::vector<double> row_major);
  // tau = 1, v = ones or W = I: the uncalibrated model.
  static ScalingParams Identity(ScalingKind kind, std::size_t k);
  static ScalingParams FromRaw(ScalingKind kind, std::size_t k,
                               std::span<const double> raw);

  ScalingKind kind() const { return kind_; }
  // 0 for scalar parameters, which fit any k.
  std::size_t num_classes() const { return k_; }
  const std::vector<double>& values() const { return values_; }
  double temperature() const;  // scalar only

  std::vector<double> ToRaw() const;

  // Largest positive-constrained parameter (tau or max v_i); 0 for matrix.
  double MaxScale() const;

  // Throws kInput when the parameter shape does not fit k.
  void CheckCompatible(std::size_t k) const;

  // Rescaled logits phi(z).
  std::vector<double> Transform(std::span<const double> logits) const;

  friend bool operator==(const ScalingParams&, const ScalingParams&) = default;

 private:
  ScalingParams(ScalingKind kind, std::size_t k, std::vector<double> values);

  ScalingKind kind_;
  std::size_t k_;
  std::vector<double> values_;
};

struct OptimizerConfig {
  double learning_rate = 0.05;
  int epochs = 400;
  int batch_size = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void Validate() const;  // throws kConfig
};

// Training stops with `diverged` once tau (or any vector scale) exceeds this.
inline constexpr double kDivergenceGuard = 1e6;

struct TraceEntry {
  int epoch;
  ScalingParams params;
  double loss;  // objective over the full training set after the epoch
};

struct OptimizationTrace {
  std::vector<TraceEntry> entries;
  ScalingParams final_params = ScalingParams::Scalar(1.0);
  double final_loss = 0.0;
  std::size_t num_used = 0;
  std::size_t num_filtered = 0;  // dropped by the agreement mask
  bool diverged = false;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // with respect to ScalingParams::ToRaw()
};

double KlDivergence(const ProbabilityVector& p, const ProbabilityVector& q);

// sigma(phi(polm_logits)).
ProbabilityVector ApplyScaling(const LogitRecord& record,
                               const ScalingParams& params);

// Mean KL(sigma(plm) || sigma(phi(polm))) over every record.
double NaiveAlignmentLoss(const Dataset& ds, const ScalingParams& params);

// Same KL averaged over agreement records only; kAllDisagree if none.
double DacaLoss(const Dataset& ds, const ScalingParams& params);

// Mean -log sigma_label(polm / tau); kMissingLabel on unlabeled records.
double NllLoss(const Dataset& ds, double tau);
double NllLoss(const Dataset& ds, const ScalingParams& params);

double ObjectiveLoss(const Dataset& ds, Objective objective,
                     const ScalingParams& params);

// Records that contribute to `objective`. For daca the agreement mask is
// evaluated once on raw logits; for supervised_nll every record must carry a
// label. Throws kAllDisagree / kMissingLabel / kInput (empty).
std::vector<const LogitRecord*> SelectTrainingRecords(const Dataset& ds,
                                                      Objective objective);

// Mean loss and raw-coordinate gradient over `batch`. The agreement mask is
// not applied here; pass the output of SelectTrainingRecords.
LossGradient BatchLossAndGradient(std::span<const LogitRecord* const> batch,
                                  Objective objective,
                                  const ScalingParams& params);

// Adam over shuffled mini-batches, starting from the identity map.
OptimizationTrace Optimize(const Dataset& ds, Objective objective,
                           ScalingKind shape, const OptimizerConfig& cfg);

struct TemperatureGrid {
  double tau_min = 0.05;
  double tau_max = 100.0;
  int num_points = 2000;
  bool log_spaced = true;

  std::vector<double> Points() const;
};

struct GridResult {
  double tau;
  double loss;
};

// Exhaustive scalar-temperature search; returns the first minimizer.
GridResult GridSearchTemperature(const Dataset& ds, Objective objective,
                                 const TemperatureGrid& grid);

}  // namespace daca
