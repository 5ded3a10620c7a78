#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtdetect/classifier.hpp"

namespace mtdetect {

struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 42;
  bool stratified = true;
  bool pairs_grouped = false;
  /// Fold index per row, aligned with the rows the plan was built from.
  std::vector<int> assignments;

  std::vector<std::size_t> test_rows(int fold) const;
  std::vector<std::size_t> train_rows(int fold) const;
};

struct FoldOptions {
  /// Keep rows sharing a pair id in one fold.
  bool group_pairs = true;
};

/// Seeded stratified partition. Pair groups are dealt first to the least
/// loaded fold, then single rows to the fold with fewest rows of their
/// class, which keeps per-class fold sizes within one row of each other.
FoldPlan make_folds(const std::vector<CoherenceVector>& rows, int k, std::uint64_t seed,
                    const FoldOptions& options = {});

struct ScoredLabel {
  double score = 0.0;
  Label label = Label::Human;
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

/// Sweep over the sorted unique scores plus +inf; a score >= t counts as
/// Machine. FPR is the share of humans called machine, FNR the share of
/// machines called human.
std::vector<RocPoint> roc_points(std::span<const ScoredLabel> scores);

/// Value where FPR and FNR cross, linearly interpolated between the two
/// adjacent thresholds that bracket the sign change of FPR - FNR.
double compute_eer(std::span<const ScoredLabel> scores);

struct Confusion {
  std::size_t tp = 0;  // machine called machine
  std::size_t tn = 0;
  std::size_t fp = 0;  // human called machine
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const Confusion&) const = default;
};

struct FoldMetrics {
  std::size_t rows = 0;
  double accuracy = 0.0;
  /// NaN when the fold lacks one class.
  double eer = 0.0;
  Confusion confusion;
};

struct EvalReport {
  double accuracy = 0.0;
  /// Pooled over all out-of-fold scores.
  double eer = 0.0;
  Confusion confusion;
  std::vector<FoldMetrics> per_fold;
  std::vector<ScoredLabel> pooled_scores;
  std::vector<std::string> pooled_ids;

  Optimizer optimizer = Optimizer::SmoSvm;
  Statistic statistic = Statistic::Combination;
  std::string metric;
  std::size_t effective_dimension = 0;
  int k = 0;
  std::uint64_t seed = 0;
  bool pairs_grouped = false;
  Hyperparams hyperparams;

  std::string to_json() const;
};

struct CvOptions {
  Statistic statistic = Statistic::Combination;
  /// Explicit column subset; overrides `statistic` when set.
  std::optional<std::vector<std::size_t>> columns;
  unsigned jobs = 1;
};

/// Per fold: standardize and train on k-1 folds, score the held-out fold.
EvalReport cross_validate(const FeatureSet& features, Optimizer optimizer, const Hyperparams& hp,
                          const FoldPlan& plan, const CvOptions& options = {});

/// Cross-validates the selected statistic half. `metric_tag` must match the
/// feature header ("euclidean" / "cosine").
EvalReport ablate(const FeatureSet& features, Statistic which, const std::string& metric_tag, Optimizer optimizer,
                  const Hyperparams& hp, const FoldPlan& plan, unsigned jobs = 1);

struct RankedPair {
  std::size_t group = 0;
  std::string name;
  double mean_accuracy = 0.0;
  double variance_accuracy = 0.0;
  double combination_accuracy = 0.0;
};

/// Cross-validates each group's mean, variance and both together; sorted by
/// combination accuracy (descending, ties by group index), truncated to
/// `top` when nonzero.
std::vector<RankedPair> rank_single_features(const FeatureSet& features, const FoldPlan& plan, Optimizer optimizer,
                                             const Hyperparams& hp, std::size_t top = 0, unsigned jobs = 1);

std::string ranking_to_json(const std::vector<RankedPair>& ranking);

}  // namespace mtdetect
