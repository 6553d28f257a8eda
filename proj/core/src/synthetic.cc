#include "daca/synthetic.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "daca/metrics.h"

namespace daca {
namespace {

// Portable draws on top of mt19937_64 so generated files are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  std::size_t Index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  // Uniform over [0, k) excluding `a`.
  std::size_t OtherThan(std::size_t k, std::size_t a) {
    return (a + 1 + Index(k - 1)) % k;
  }

 private:
  std::mt19937_64 engine_;
};

void CheckConfidence(double value, std::size_t k, const char* field) {
  const double floor = 1.0 / static_cast<double>(k);
  if (!(value > floor && value < 1.0)) {
    Fail(ErrorCode::kConfig,
         std::string("field '") + field + "': " + std::to_string(value) +
             " must lie in (1/k, 1) = (" + std::to_string(floor) +
             ", 1) to be a calibrated confidence");
  }
}

void CheckProbability(double value, const char* field) {
  if (!(value >= 0.0 && value <= 1.0)) {
    Fail(ErrorCode::kConfig, std::string("field '") + field + "' must be in [0, 1]");
  }
}

}  // namespace

std::string_view ToString(Subset subset) {
  switch (subset) {
    case Subset::kAgreement: return "agreement";
    case Subset::kDisagreement: return "disagreement";
    case Subset::kAll: return "all";
  }
  return "all";
}

void MixtureConfig::Validate() const {
  if (!(pi > 0.0 && pi <= 1.0)) Fail(ErrorCode::kConfig, "field 'pi' must be in (0, 1]");
  if (n < 1) Fail(ErrorCode::kConfig, "field 'n' must be >= 1");
  if (k < 2) Fail(ErrorCode::kConfig, "field 'k' must be >= 2");
  if (!(conf_sharpness > 0.0) || !std::isfinite(conf_sharpness)) {
    Fail(ErrorCode::kConfig, "field 'conf_sharpness' must be > 0");
  }
  CheckProbability(acc_f_agree, "acc_f_agree");
  CheckProbability(acc_g_agree, "acc_g_agree");
  CheckProbability(acc_f_dis, "acc_f_dis");
  CheckProbability(acc_g_dis, "acc_g_dis");
  if (std::abs(acc_f_agree - acc_g_agree) > 1e-12) {
    Fail(ErrorCode::kConfig,
         "fields 'acc_f_agree' and 'acc_g_agree' must be equal: both models "
         "predict the same class on agreement records");
  }
  CheckConfidence(acc_f_agree, k, "acc_f_agree");
  if (NumDisagreement() > 0) {
    CheckConfidence(acc_f_dis, k, "acc_f_dis");
    CheckConfidence(acc_g_dis, k, "acc_g_dis");
    if (acc_f_dis + acc_g_dis > 1.0 + 1e-12) {
      Fail(ErrorCode::kConfig,
           "fields 'acc_f_dis' + 'acc_g_dis' must be <= 1: the models predict "
           "different classes on disagreement records");
    }
  }
}

std::size_t MixtureConfig::NumDisagreement() const {
  return static_cast<std::size_t>(std::llround(pi * static_cast<double>(n)));
}

std::vector<double> TwoLevelLogits(std::size_t k, std::size_t cls,
                                   double confidence) {
  if (k < 2 || cls >= k) Fail(ErrorCode::kInput, "class index outside [0, k)");
  CheckConfidence(confidence, k, "confidence");
  std::vector<double> logits(k, 0.0);
  logits[cls] = std::log(confidence * static_cast<double>(k - 1) / (1.0 - confidence));
  return logits;
}

Dataset GenerateMixture(const MixtureConfig& cfg, std::optional<Split> split,
                        const std::string& id_prefix) {
  cfg.Validate();
  Rng rng(cfg.seed);
  const std::size_t n_dis = cfg.NumDisagreement();

  std::vector<bool> disagree(cfg.n, false);
  std::fill(disagree.begin(), disagree.begin() + static_cast<std::ptrdiff_t>(n_dis), true);
  for (std::size_t i = cfg.n; i > 1; --i) {
    const std::size_t j = rng.Index(i);
    const bool tmp = disagree[i - 1];
    disagree[i - 1] = disagree[j];
    disagree[j] = tmp;
  }

  std::vector<LogitRecord> records;
  records.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t f_cls = rng.Index(cfg.k);
    const std::size_t g_cls = disagree[i] ? rng.OtherThan(cfg.k, f_cls) : f_cls;
    const double u = rng.Uniform();

    std::size_t label;
    double f_conf;
    double g_conf;
    if (!disagree[i]) {
      label = u < cfg.acc_f_agree ? f_cls : rng.OtherThan(cfg.k, f_cls);
      f_conf = cfg.acc_f_agree;
      g_conf = cfg.acc_g_agree;
    } else {
      if (u < cfg.acc_f_dis) {
        label = f_cls;
      } else if (u < cfg.acc_f_dis + cfg.acc_g_dis || cfg.k == 2) {
        label = g_cls;
      } else {
        // Uniform over the k - 2 classes neither model predicted.
        std::size_t pick = rng.Index(cfg.k - 2);
        label = 0;
        for (std::size_t c = 0; c < cfg.k; ++c) {
          if (c == f_cls || c == g_cls) continue;
          if (pick-- == 0) {
            label = c;
            break;
          }
        }
      }
      f_conf = cfg.acc_f_dis;
      g_conf = cfg.acc_g_dis;
    }

    LogitRecord rec;
    rec.id = id_prefix + std::to_string(i);
    rec.plm_logits = TwoLevelLogits(cfg.k, f_cls, f_conf);
    rec.polm_logits = TwoLevelLogits(cfg.k, g_cls, g_conf);
    for (double& z : rec.polm_logits) z *= cfg.conf_sharpness;
    rec.label = static_cast<int>(label);
    rec.split = split;
    records.push_back(std::move(rec));
  }
  return Dataset(cfg.k, std::move(records));
}

PropositionReport VerifyPerfectAlignmentEce(const MixtureConfig& cfg,
                                            double tolerance_scale) {
  const Dataset ds = GenerateMixture(cfg);
  const double n = static_cast<double>(ds.size());

  std::vector<EvalSample> aligned;
  aligned.reserve(ds.size());
  std::vector<double> diff;
  diff.reserve(ds.size());
  for (const auto& rec : ds.records()) {
    const double conf = Confidence(Softmax(rec.plm_logits));
    const std::size_t pred = ArgmaxPrediction(rec.polm_logits);
    const bool correct = static_cast<int>(pred) == *rec.label;
    aligned.push_back({pred, conf, correct});
    diff.push_back(conf - (correct ? 1.0 : 0.0));
  }

  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= n;
  double var = 0.0;
  for (double d : diff) var += (d - mean) * (d - mean);
  var = diff.size() > 1 ? var / (n - 1.0) : 0.0;

  PropositionReport report;
  report.name = "perfect_alignment_ece";
  report.measured = std::abs(mean);
  report.predicted = cfg.pi * std::abs(cfg.acc_f_dis - cfg.acc_g_dis);
  report.gap = std::abs(report.measured - report.predicted);
  report.tolerance = tolerance_scale / std::sqrt(n);
  report.passed = report.gap <= report.tolerance;
  report.sample_count = ds.size();
  report.standard_error = std::sqrt(var / n);
  report.binned_ece = Ece(aligned, Partition(aligned, BinScheme::kEqualWidth, 10));
  return report;
}

LogitRecord MakeDivergentRecord(std::size_t k, std::uint64_t seed) {
  if (k < 2) Fail(ErrorCode::kInput, "divergent record needs k >= 2");
  Rng rng(seed);
  const std::size_t c = rng.Index(k);

  LogitRecord rec;
  rec.id = "divergent-k" + std::to_string(k) + "-" + std::to_string(seed);
  rec.polm_logits.assign(k, 0.0);
  rec.polm_logits[c] = rng.Uniform(1.0, 5.0);

  rec.plm_logits.resize(k);
  double lowest = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == c) continue;
    rec.plm_logits[i] = rng.Uniform(-3.0, 3.0);
    lowest = first ? rec.plm_logits[i] : std::min(lowest, rec.plm_logits[i]);
    first = false;
  }
  // A strict minimum sits strictly below the mean probability 1/k.
  rec.plm_logits[c] = lowest - rng.Uniform(0.5, 2.0);

  const double p_c = Softmax(rec.plm_logits)[c];
  if (!(p_c < 1.0 / static_cast<double>(k)) || AgreementMask(rec) ||
      ArgmaxPrediction(rec.polm_logits) != c) {
    throw std::logic_error("divergent record construction violated its precondition");
  }
  return rec;
}

PropositionReport VerifyDivergentTemperature(const Dataset& ds,
                                             const TemperatureGrid& grid) {
  PropositionReport report;
  report.name = "divergent_temperature";
  report.measured = NaiveAlignmentLoss(ds, ScalingParams::Scalar(kDivergenceGuard));
  report.predicted = GridSearchTemperature(ds, Objective::kNaive, grid).loss;
  report.gap = std::abs(report.measured - report.predicted);
  report.tolerance = 0.0;
  report.passed = report.measured < report.predicted;
  report.sample_count = ds.size();
  return report;
}

std::vector<SubsetTrace> TemperatureTrace(const Dataset& ds,
                                          const std::set<Subset>& subsets,
                                          const OptimizerConfig& cfg) {
  std::vector<SubsetTrace> out;
  for (Subset subset : subsets) {
    const Dataset part = subset == Subset::kAgreement      ? ds.AgreementSubset()
                         : subset == Subset::kDisagreement ? ds.DisagreementSubset()
                                                           : ds;
    SubsetTrace entry{subset, std::nullopt, {}};
    if (part.empty()) {
      entry.warning = "subset '" + std::string(ToString(subset)) + "' is empty; skipped";
    } else {
      entry.trace = Optimize(part, Objective::kNaive, ScalingKind::kScalar, cfg);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace daca
