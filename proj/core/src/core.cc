#include "daca/core.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace daca {

const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInput: return "input error";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kAllDisagree: return "all records disagree";
    case ErrorCode::kMissingLabel: return "missing label";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kIo: return "io error";
  }
  return "unknown error";
}

void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

std::string_view ToString(Split split) {
  return split == Split::kValidation ? "validation" : "test";
}

std::optional<Split> ParseSplit(std::string_view text) {
  if (text == "validation") return Split::kValidation;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

void LogitRecord::Validate() const {
  if (plm_logits.empty()) {
    Fail(ErrorCode::kInput, "record '" + id + "': empty logit vector");
  }
  if (plm_logits.size() != polm_logits.size()) {
    Fail(ErrorCode::kInput, "record '" + id + "': plm_logits has " +
                                std::to_string(plm_logits.size()) +
                                " entries but polm_logits has " +
                                std::to_string(polm_logits.size()));
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(plm_logits.begin(), plm_logits.end(), finite) ||
      !std::all_of(polm_logits.begin(), polm_logits.end(), finite)) {
    Fail(ErrorCode::kInput, "record '" + id + "': non-finite logit");
  }
  if (label && (*label < 0 ||
                static_cast<std::size_t>(*label) >= plm_logits.size())) {
    Fail(ErrorCode::kInput, "record '" + id + "': label " +
                                std::to_string(*label) + " outside [0, " +
                                std::to_string(plm_logits.size()) + ")");
  }
}

ProbabilityVector::ProbabilityVector(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) Fail(ErrorCode::kInput, "empty probability vector");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      Fail(ErrorCode::kInput, "probability entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    Fail(ErrorCode::kInput, "probabilities do not sum to 1");
  }
}

Dataset::Dataset(std::size_t num_classes, std::vector<LogitRecord> records)
    : num_classes_(num_classes), records_(std::move(records)) {
  if (num_classes_ == 0) Fail(ErrorCode::kInput, "class count must be >= 1");
  std::unordered_set<std::string> ids;
  ids.reserve(records_.size());
  for (const auto& rec : records_) {
    rec.Validate();
    if (rec.num_classes() != num_classes_) {
      Fail(ErrorCode::kInput, "record '" + rec.id + "' has k=" +
                                  std::to_string(rec.num_classes()) +
                                  ", dataset has k=" +
                                  std::to_string(num_classes_));
    }
    if (!ids.insert(rec.id).second) {
      Fail(ErrorCode::kInput, "duplicate record id '" + rec.id + "'");
    }
  }
}

Dataset Dataset::FromRecords(std::vector<LogitRecord> records) {
  if (records.empty()) Fail(ErrorCode::kInput, "empty dataset");
  const std::size_t k = records.front().num_classes();
  return Dataset(k, std::move(records));
}

Dataset Dataset::Filter(
    const std::function<bool(const LogitRecord&)>& keep) const {
  std::vector<LogitRecord> kept;
  for (const auto& rec : records_) {
    if (keep(rec)) kept.push_back(rec);
  }
  return Dataset(num_classes_, std::move(kept));
}

Dataset Dataset::AgreementSubset() const { return Filter(AgreementMask); }

Dataset Dataset::DisagreementSubset() const {
  return Filter([](const LogitRecord& r) { return !AgreementMask(r); });
}

std::size_t Dataset::CountAgreement() const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), AgreementMask));
}

bool Dataset::AllLabeled() const {
  return std::all_of(records_.begin(), records_.end(),
                     [](const LogitRecord& r) { return r.label.has_value(); });
}

ProbabilityVector Softmax(std::span<const double> logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    Fail(ErrorCode::kDomain, "temperature must be positive and finite");
  }
  if (logits.empty()) Fail(ErrorCode::kInput, "empty logit vector");
  for (double z : logits) {
    if (!std::isfinite(z)) Fail(ErrorCode::kInput, "non-finite logit");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - max_logit) / tau);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return ProbabilityVector(ProbabilityVector::Trusted{}, std::move(out));
}

std::vector<double> LogSoftmax(std::span<const double> logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - max_logit);
  const double log_norm = max_logit + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

std::size_t ArgmaxPrediction(std::span<const double> logits) {
  if (logits.empty()) Fail(ErrorCode::kInput, "empty logit vector");
  // std::max_element returns the first maximal element.
  return static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double Confidence(const ProbabilityVector& pv) {
  const auto probs = pv.probs();
  return *std::max_element(probs.begin(), probs.end());
}

bool AgreementMask(const LogitRecord& record) {
  return ArgmaxPrediction(record.plm_logits) ==
         ArgmaxPrediction(record.polm_logits);
}

}  // namespace daca
