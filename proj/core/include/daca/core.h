#pragma once

// Probability kernels, prediction/agreement logic and the paired-logit
// dataset model shared by the rest of the library.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daca/error.h"

namespace daca {

// Probabilities below this floor are clamped before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

// Tolerance on the simplex constraint sum(p) == 1.
inline constexpr double kSimplexTolerance = 1e-9;

enum class Split { kValidation, kTest };

std::string_view ToString(Split split);
std::optional<Split> ParseSplit(std::string_view text);

// One prompt's raw logits from the pre-trained model (plm) and the
// post-trained model (polm), plus the gold answer index when known.
struct LogitRecord {
  std::string id;
  std::vector<double> plm_logits;
  std::vector<double> polm_logits;
  std::optional<int> label;
  std::optional<Split> split;

  std::size_t num_classes() const { return plm_logits.size(); }

  // Throws kInput when the two logit vectors differ in length, are empty,
  // contain a non-finite entry, or the label is outside [0, k).
  void Validate() const;
};

// A point on the probability simplex. Construction validates the
// invariants (entries in [0, 1], sum within kSimplexTolerance of 1).
class ProbabilityVector {
 public:
  explicit ProbabilityVector(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  struct Trusted {};
  ProbabilityVector(Trusted, std::vector<double> probs)
      : probs_(std::move(probs)) {}
  friend ProbabilityVector Softmax(std::span<const double>, double);

  std::vector<double> probs_;
};

// Immutable ordered collection of records sharing one class count, with
// unique ids. A dataset may be empty (e.g. an empty agreement subset);
// operations that need records reject empty datasets themselves.
class Dataset {
 public:
  Dataset(std::size_t num_classes, std::vector<LogitRecord> records);

  // Infers k from the first record; throws kInput on an empty vector.
  static Dataset FromRecords(std::vector<LogitRecord> records);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<LogitRecord>& records() const { return records_; }
  const LogitRecord& operator[](std::size_t i) const { return records_[i]; }

  Dataset Filter(const std::function<bool(const LogitRecord&)>& keep) const;
  Dataset AgreementSubset() const;
  Dataset DisagreementSubset() const;

  std::size_t CountAgreement() const;
  bool AllLabeled() const;

 private:
  std::size_t num_classes_;
  std::vector<LogitRecord> records_;
};

// sigma(logits / tau), computed with max-subtraction. Throws kDomain for a
// non-positive or non-finite tau and kInput for empty or non-finite logits.
ProbabilityVector Softmax(std::span<const double> logits, double tau = 1.0);

// log sigma(logits) without clamping; caller guarantees finite input.
std::vector<double> LogSoftmax(std::span<const double> logits);

// Index of the maximal entry; the lowest index wins on exact ties.
std::size_t ArgmaxPrediction(std::span<const double> logits);

// Maximum entry of the distribution.
double Confidence(const ProbabilityVector& pv);

// True iff the raw-logit predictions of the two models coincide.
bool AgreementMask(const LogitRecord& record);

}  // namespace daca
