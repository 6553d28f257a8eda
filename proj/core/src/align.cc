#include "daca/align.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace daca {
namespace {

const double kLogFloor = std::log(kProbabilityFloor);

// dLoss/dz for one record, where z are the rescaled post-trained logits.
// Returns the per-record loss. Clamped probabilities contribute no gradient,
// matching the clamp used in the loss value.
double RecordLossAndLogitGradient(const LogitRecord& rec, Objective objective,
                                  std::span<const double> z,
                                  std::span<double> dz) {
  const std::vector<double> log_q = LogSoftmax(z);
  const std::size_t k = z.size();
  std::vector<double> q(k);
  for (std::size_t j = 0; j < k; ++j) q[j] = std::exp(log_q[j]);

  if (objective == Objective::kSupervisedNll) {
    const auto y = static_cast<std::size_t>(*rec.label);
    if (log_q[y] < kLogFloor) {
      std::fill(dz.begin(), dz.end(), 0.0);
      return -kLogFloor;
    }
    for (std::size_t j = 0; j < k; ++j) dz[j] = q[j] - (j == y ? 1.0 : 0.0);
    return -log_q[y];
  }

  const ProbabilityVector p = Softmax(rec.plm_logits);
  double loss = 0.0;
  double active_mass = 0.0;
  std::vector<double> w(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (p[i] <= 0.0) continue;
    const bool clamped = log_q[i] < kLogFloor;
    loss += p[i] * (std::log(p[i]) - (clamped ? kLogFloor : log_q[i]));
    if (!clamped) {
      w[i] = p[i];
      active_mass += p[i];
    }
  }
  for (std::size_t j = 0; j < k; ++j) dz[j] = q[j] * active_mass - w[j];
  return loss;
}

double RecordLoss(const LogitRecord& rec, Objective objective,
                  const ScalingParams& params) {
  const ProbabilityVector q = ApplyScaling(rec, params);
  if (objective == Objective::kSupervisedNll) {
    const double qy = q[static_cast<std::size_t>(*rec.label)];
    return -std::log(std::max(qy, kProbabilityFloor));
  }
  return KlDivergence(Softmax(rec.plm_logits), q);
}

double MeanLoss(std::span<const LogitRecord* const> records,
                Objective objective, const ScalingParams& params) {
  double total = 0.0;
  for (const LogitRecord* rec : records) {
    total += RecordLoss(*rec, objective, params);
  }
  return total / static_cast<double>(records.size());
}

void CheckPositive(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      Fail(ErrorCode::kDomain, std::string(what) + " must be positive and finite");
    }
  }
}

void Shuffle(std::vector<std::size_t>& order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
}

}  // namespace

std::string_view ToString(ScalingKind kind) {
  switch (kind) {
    case ScalingKind::kScalar: return "scalar";
    case ScalingKind::kVector: return "vector";
    case ScalingKind::kMatrix: return "matrix";
  }
  return "scalar";
}

std::string_view ToString(Objective objective) {
  switch (objective) {
    case Objective::kDaca: return "daca";
    case Objective::kNaive: return "naive";
    case Objective::kSupervisedNll: return "supervised_nll";
  }
  return "daca";
}

std::optional<ScalingKind> ParseScalingKind(std::string_view text) {
  if (text == "scalar") return ScalingKind::kScalar;
  if (text == "vector") return ScalingKind::kVector;
  if (text == "matrix") return ScalingKind::kMatrix;
  return std::nullopt;
}

std::optional<Objective> ParseObjective(std::string_view text) {
  if (text == "daca") return Objective::kDaca;
  if (text == "naive") return Objective::kNaive;
  if (text == "supervised" || text == "supervised_nll") {
    return Objective::kSupervisedNll;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ScalingParams

ScalingParams::ScalingParams(ScalingKind kind, std::size_t k,
                             std::vector<double> values)
    : kind_(kind), k_(k), values_(std::move(values)) {}

ScalingParams ScalingParams::Scalar(double tau) {
  CheckPositive(std::span<const double>(&tau, 1), "temperature");
  return ScalingParams(ScalingKind::kScalar, 0, {tau});
}

ScalingParams ScalingParams::Vector(std::vector<double> scales) {
  if (scales.empty()) Fail(ErrorCode::kInput, "empty scaling vector");
  CheckPositive(scales, "vector scale");
  const std::size_t k = scales.size();
  return ScalingParams(ScalingKind::kVector, k, std::move(scales));
}

ScalingParams ScalingParams::Matrix(std::size_t k, std::vector<double> row_major) {
  if (k == 0 || row_major.size() != k * k) {
    Fail(ErrorCode::kInput, "matrix scaling needs k*k entries");
  }
  for (double w : row_major) {
    if (!std::isfinite(w)) Fail(ErrorCode::kDomain, "non-finite matrix entry");
  }
  return ScalingParams(ScalingKind::kMatrix, k, std::move(row_major));
}

ScalingParams ScalingParams::Identity(ScalingKind kind, std::size_t k) {
  switch (kind) {
    case ScalingKind::kScalar:
      return Scalar(1.0);
    case ScalingKind::kVector:
      return Vector(std::vector<double>(k, 1.0));
    case ScalingKind::kMatrix: {
      std::vector<double> w(k * k, 0.0);
      for (std::size_t i = 0; i < k; ++i) w[i * k + i] = 1.0;
      return Matrix(k, std::move(w));
    }
  }
  return Scalar(1.0);
}

ScalingParams ScalingParams::FromRaw(ScalingKind kind, std::size_t k,
                                     std::span<const double> raw) {
  switch (kind) {
    case ScalingKind::kScalar:
      if (raw.size() != 1) Fail(ErrorCode::kInput, "scalar raw size != 1");
      return Scalar(std::exp(raw[0]));
    case ScalingKind::kVector: {
      if (raw.size() != k) Fail(ErrorCode::kInput, "vector raw size != k");
      std::vector<double> v(k);
      std::transform(raw.begin(), raw.end(), v.begin(),
                     [](double r) { return std::exp(r); });
      return Vector(std::move(v));
    }
    case ScalingKind::kMatrix:
      return Matrix(k, std::vector<double>(raw.begin(), raw.end()));
  }
  return Scalar(1.0);
}

double ScalingParams::temperature() const {
  if (kind_ != ScalingKind::kScalar) {
    Fail(ErrorCode::kInput, "temperature() on non-scalar parameters");
  }
  return values_[0];
}

std::vector<double> ScalingParams::ToRaw() const {
  if (kind_ == ScalingKind::kMatrix) return values_;
  std::vector<double> raw(values_.size());
  std::transform(values_.begin(), values_.end(), raw.begin(),
                 [](double v) { return std::log(v); });
  return raw;
}

double ScalingParams::MaxScale() const {
  if (kind_ == ScalingKind::kMatrix) return 0.0;
  return *std::max_element(values_.begin(), values_.end());
}

void ScalingParams::CheckCompatible(std::size_t k) const {
  if (kind_ != ScalingKind::kScalar && k_ != k) {
    Fail(ErrorCode::kInput, std::string(ToString(kind_)) +
                                " parameters built for k=" + std::to_string(k_) +
                                " applied to k=" + std::to_string(k));
  }
}

std::vector<double> ScalingParams::Transform(
    std::span<const double> logits) const {
  CheckCompatible(logits.size());
  const std::size_t k = logits.size();
  std::vector<double> z(k);
  switch (kind_) {
    case ScalingKind::kScalar:
      for (std::size_t i = 0; i < k; ++i) z[i] = logits[i] / values_[0];
      break;
    case ScalingKind::kVector:
      for (std::size_t i = 0; i < k; ++i) z[i] = logits[i] / values_[i];
      break;
    case ScalingKind::kMatrix:
      for (std::size_t i = 0; i < k; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += values_[i * k + j] * logits[j];
        z[i] = acc;
      }
      break;
  }
  return z;
}

void OptimizerConfig::Validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    Fail(ErrorCode::kConfig, "learning_rate must be > 0");
  }
  if (epochs < 1) Fail(ErrorCode::kConfig, "epochs must be >= 1");
  if (batch_size < 1) Fail(ErrorCode::kConfig, "batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) {
    Fail(ErrorCode::kConfig, "adam_beta1 must be in [0, 1)");
  }
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    Fail(ErrorCode::kConfig, "adam_beta2 must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) Fail(ErrorCode::kConfig, "adam_eps must be > 0");
}

// ---------------------------------------------------------------------------
// Losses

double KlDivergence(const ProbabilityVector& p, const ProbabilityVector& q) {
  if (p.size() != q.size()) {
    Fail(ErrorCode::kInput, "KL divergence of distributions with different k");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kProbabilityFloor));
  }
  // Rounding can push an exact zero slightly negative.
  return std::max(kl, 0.0);
}

ProbabilityVector ApplyScaling(const LogitRecord& record,
                               const ScalingParams& params) {
  return Softmax(params.Transform(record.polm_logits));
}

double ObjectiveLoss(const Dataset& ds, Objective objective,
                     const ScalingParams& params) {
  const auto records = SelectTrainingRecords(ds, objective);
  params.CheckCompatible(ds.num_classes());
  return MeanLoss(records, objective, params);
}

double NaiveAlignmentLoss(const Dataset& ds, const ScalingParams& params) {
  return ObjectiveLoss(ds, Objective::kNaive, params);
}

double DacaLoss(const Dataset& ds, const ScalingParams& params) {
  return ObjectiveLoss(ds, Objective::kDaca, params);
}

double NllLoss(const Dataset& ds, double tau) {
  return ObjectiveLoss(ds, Objective::kSupervisedNll, ScalingParams::Scalar(tau));
}

double NllLoss(const Dataset& ds, const ScalingParams& params) {
  return ObjectiveLoss(ds, Objective::kSupervisedNll, params);
}

std::vector<const LogitRecord*> SelectTrainingRecords(const Dataset& ds,
                                                      Objective objective) {
  if (ds.empty()) Fail(ErrorCode::kInput, "empty dataset");
  std::vector<const LogitRecord*> out;
  out.reserve(ds.size());
  for (const auto& rec : ds.records()) {
    switch (objective) {
      case Objective::kDaca:
        if (AgreementMask(rec)) out.push_back(&rec);
        break;
      case Objective::kNaive:
        out.push_back(&rec);
        break;
      case Objective::kSupervisedNll:
        if (!rec.label) {
          Fail(ErrorCode::kMissingLabel,
               "record '" + rec.id + "' has no label (supervised objective)");
        }
        out.push_back(&rec);
        break;
    }
  }
  if (out.empty()) {
    Fail(ErrorCode::kAllDisagree,
         "no agreement records among " + std::to_string(ds.size()));
  }
  return out;
}

LossGradient BatchLossAndGradient(std::span<const LogitRecord* const> batch,
                                  Objective objective,
                                  const ScalingParams& params) {
  if (batch.empty()) Fail(ErrorCode::kInput, "empty batch");
  const std::size_t k = batch.front()->num_classes();
  params.CheckCompatible(k);

  LossGradient out;
  out.gradient.assign(params.values().size(), 0.0);
  std::vector<double> dz(k);

  for (const LogitRecord* rec : batch) {
    const std::vector<double> z = params.Transform(rec->polm_logits);
    out.loss += RecordLossAndLogitGradient(*rec, objective, z, dz);
    switch (params.kind()) {
      case ScalingKind::kScalar:
        // z_j = g_j * exp(-r)  =>  dz_j/dr = -z_j
        for (std::size_t j = 0; j < k; ++j) out.gradient[0] -= dz[j] * z[j];
        break;
      case ScalingKind::kVector:
        for (std::size_t j = 0; j < k; ++j) out.gradient[j] -= dz[j] * z[j];
        break;
      case ScalingKind::kMatrix:
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            out.gradient[i * k + j] += dz[i] * rec->polm_logits[j];
          }
        }
        break;
    }
  }
  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  for (double& g : out.gradient) g /= n;
  return out;
}

// ---------------------------------------------------------------------------
// Training

OptimizationTrace Optimize(const Dataset& ds, Objective objective,
                           ScalingKind shape, const OptimizerConfig& cfg) {
  cfg.Validate();
  const auto records = SelectTrainingRecords(ds, objective);
  const std::size_t k = ds.num_classes();

  OptimizationTrace trace;
  trace.num_used = records.size();
  trace.num_filtered = ds.size() - records.size();
  trace.entries.reserve(static_cast<std::size_t>(cfg.epochs));

  ScalingParams params = ScalingParams::Identity(shape, k);
  std::vector<double> raw = params.ToRaw();
  std::vector<double> m(raw.size(), 0.0);
  std::vector<double> v(raw.size(), 0.0);
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  std::vector<std::size_t> order(records.size());
  std::vector<const LogitRecord*> batch;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs && !trace.diverged; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Shuffle(order, cfg.seed + static_cast<std::uint64_t>(epoch));

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(records[order[i]]);

      const LossGradient lg = BatchLossAndGradient(batch, objective, params);
      beta1_pow *= cfg.adam_beta1;
      beta2_pow *= cfg.adam_beta2;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const double g = lg.gradient[i];
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double m_hat = m[i] / (1.0 - beta1_pow);
        const double v_hat = v[i] / (1.0 - beta2_pow);
        raw[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
      }
      params = ScalingParams::FromRaw(shape, k, raw);
      if (params.MaxScale() > kDivergenceGuard) {
        trace.diverged = true;
        break;
      }
    }
    trace.entries.push_back({epoch, params, MeanLoss(records, objective, params)});
  }

  trace.final_params = params;
  trace.final_loss = trace.entries.back().loss;
  return trace;
}

std::vector<double> TemperatureGrid::Points() const {
  if (!(tau_min > 0.0) || !(tau_max > tau_min) || !std::isfinite(tau_max)) {
    Fail(ErrorCode::kDomain, "grid needs 0 < tau_min < tau_max < inf");
  }
  if (num_points < 2) Fail(ErrorCode::kInput, "grid needs at least 2 points");
  std::vector<double> pts(static_cast<std::size_t>(num_points));
  const double denom = static_cast<double>(num_points - 1);
  if (log_spaced) {
    const double lo = std::log(tau_min);
    const double hi = std::log(tau_max);
    for (int i = 0; i < num_points; ++i) {
      pts[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / denom);
    }
  } else {
    for (int i = 0; i < num_points; ++i) {
      pts[i] = tau_min + (tau_max - tau_min) * static_cast<double>(i) / denom;
    }
  }
  pts.front() = tau_min;
  pts.back() = tau_max;
  return pts;
}

GridResult GridSearchTemperature(const Dataset& ds, Objective objective,
                                 const TemperatureGrid& grid) {
  const std::vector<double> points = grid.Points();
  const auto records = SelectTrainingRecords(ds, objective);
  GridResult best{points.front(), 0.0};
  bool first = true;
  for (double tau : points) {
    const double loss = MeanLoss(records, objective, ScalingParams::Scalar(tau));
    if (first || loss < best.loss) {
      best = {tau, loss};
      first = false;
    }
  }
  return best;
}

}  // namespace daca
