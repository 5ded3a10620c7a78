#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtdetect/features.hpp"

namespace mtdetect {

enum class Optimizer { Linear, SgdSvm, SmoSvm };

std::string_view optimizer_name(Optimizer o);
/// "linear", "sgd" or "smo".
Optimizer parse_optimizer(std::string_view s);

/// Which halves of the coherence vector a model sees.
enum class Statistic { MeanOnly, VarianceOnly, Combination };

std::string_view statistic_name(Statistic s);
/// "mean", "variance" or "combination".
Statistic parse_statistic(std::string_view s);
/// Column indices selected by `s` for a layout with `group_count` groups.
std::vector<std::size_t> statistic_columns(Statistic s, std::size_t group_count);

struct Hyperparams {
  double C = 1.0;
  /// SGD passes over the data.
  int epochs = 20;
  /// SMO pair updates.
  std::int64_t max_iter = 1'000'000;
  /// SMO: KKT violation bound. Linear: relative gradient norm.
  double tolerance = 1e-3;
  /// Newton iterations for the logistic baseline.
  int newton_iter = 100;
  std::uint64_t seed = 42;

  bool operator==(const Hyperparams&) const = default;
};

/// Per-feature z-scoring. Constant columns keep std = 1 and map to 0.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> constant;

  std::size_t size() const noexcept { return mean.size(); }
  bool operator==(const Standardization&) const = default;
};

Standardization standardize_fit(const Eigen::MatrixXd& rows);
Standardization standardize_fit(const std::vector<CoherenceVector>& rows);
Eigen::MatrixXd standardize_apply(const Standardization& s, const Eigen::MatrixXd& rows);

/// Labels as +1 (machine) / -1 (human). Throws on unlabeled rows.
Eigen::VectorXd label_vector(const std::vector<CoherenceVector>& rows);
/// Row-per-paragraph matrix restricted to `columns`. Throws on non-finite
/// values, naming the row.
Eigen::MatrixXd design_matrix(const std::vector<CoherenceVector>& rows, std::span<const std::size_t> columns);

struct LinearSolution {
  Eigen::VectorXd weights;
  double bias = 0.0;
  /// SMO only: pair updates performed.
  std::int64_t iterations = 0;
  /// SMO only, when requested: dual objective after every pair update.
  std::vector<double> dual_objective;
};

struct TrainOptions {
  bool record_dual_objective = false;
};

/// Trains on already standardized rows with labels in {-1, +1}.
///  - Linear: L2-regularized logistic regression, truncated Newton.
///  - SgdSvm: Pegasos hinge-loss subgradient descent, lambda = 1/(C n),
///    seeded shuffling per epoch, bias as a constant extra feature.
///  - SmoSvm: dual coordinate pairs with second-order working-set
///    selection, linear kernel.
LinearSolution train_standardized(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Optimizer optimizer,
                                  const Hyperparams& hp, const TrainOptions& options = {});

struct SvmModel {
  Optimizer optimizer = Optimizer::SmoSvm;
  Hyperparams hyperparams;
  Statistic statistic = Statistic::Combination;
  Standardization standardization;
  /// Full layout length; columns outside `statistic` carry weight 0.
  std::vector<double> weights;
  double bias = 0.0;
  FeatureHeader binding;
  std::size_t trained_rows = 0;
  std::size_t trained_human = 0;
  std::size_t trained_machine = 0;

  bool operator==(const SvmModel&) const = default;
};

SvmModel train(const FeatureSet& features, Optimizer optimizer, const Hyperparams& hp = {},
               Statistic statistic = Statistic::Combination);

struct Prediction {
  std::string id;
  double score = 0.0;
  Label label = Label::Human;
  /// Score exactly 0, resolved to Human.
  bool tie = false;
};

/// Throws LayoutMismatch if the feature header binds another layout.
std::vector<Prediction> predict(const SvmModel& model, const FeatureSet& features, unsigned jobs = 1);
double decision_score(const SvmModel& model, std::span<const double> values);

void save_model(const SvmModel& model, const std::filesystem::path& path);
std::string model_to_json(const SvmModel& model);
SvmModel load_model(const std::filesystem::path& path);
SvmModel model_from_json(const std::string& text);

}  // namespace mtdetect
