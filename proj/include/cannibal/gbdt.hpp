#ifndef CANNIBAL_GBDT_HPP
#define CANNIBAL_GBDT_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cannibal {

using Eigen::Index;

/// Dense design matrix with an explicit per-cell missing flag.
///
/// Missing cells keep a value of 0 in the backing matrix; callers must
/// consult is_missing() before trusting value().
class FeatureMatrix {
 public:
  using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

  FeatureMatrix() = default;
  /// All cells start present with value 0.
  FeatureMatrix(Index rows, Index cols);
  explicit FeatureMatrix(Eigen::MatrixXd values);
  FeatureMatrix(Eigen::MatrixXd values, MissingMask missing);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  double value(Index row, Index col) const { return values_(row, col); }
  bool is_missing(Index row, Index col) const { return missing_(row, col); }

  void set(Index row, Index col, double v);
  void set_missing(Index row, Index col);

  const Eigen::MatrixXd& values() const { return values_; }
  const MissingMask& missing() const { return missing_; }

 private:
  Eigen::MatrixXd values_;
  MissingMask missing_;
};

struct TrainConfig {
  int n_rounds = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 0.0;
  int min_samples_leaf = 1;
  // Unset means "use the objective's default", which is the label mean for
  // every objective shipped here.
  std::optional<double> base_score;
  std::uint64_t seed = 0;
  // Split search fans out over features; results do not depend on this.
  int n_threads = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Flat node record. A node is a leaf iff feature < 0.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// Node 0 is the root. Rows with x < threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  int leaf_of(const FeatureMatrix& features, Index row) const;
  double output(const FeatureMatrix& features, Index row) const {
    return nodes[static_cast<std::size_t>(leaf_of(features, row))].weight;
  }
};

struct BoostedEnsemble {
  std::vector<RegressionTree> trees;
  double learning_rate = 1.0;
  double base_score = 0.0;
  Index n_features = 0;

  /// First k trees with the same base score and shrinkage.
  BoostedEnsemble truncated(std::size_t k) const;
};

/// Per-row first and (diagonal) second derivatives of a loss taken over the
/// whole prediction vector, plus the loss itself at its reported scale.
struct ObjectiveEval {
  Eigen::VectorXd grad;
  Eigen::VectorXd hess;
  double loss_value = 0.0;
};

/// Losses see the full prediction vector every round, so row-coupled terms
/// (weekly group sums) can be expressed.
using ObjectiveFn = std::function<ObjectiveEval(const Eigen::VectorXd& preds)>;

struct Objective {
  ObjectiveFn eval;
  double default_base_score = 0.0;
};

struct Split {
  Index feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
  bool default_left = true;
};

inline constexpr double kHessianFloor = 1e-6;

/// Optimal second-order leaf value -G/(H+lambda).
double leaf_weight(double grad_sum, double hess_sum, double lambda);

/// Exact greedy split over all features and all midpoints between
/// consecutive distinct values of the rows in `rows`.
///
/// Gain is 0.5 * [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma and must
/// be strictly positive. Missing-valued rows are tried on both sides; the
/// better side becomes the default branch (left on ties, and left when the
/// node has no missing rows). Ties between candidates go to the lowest
/// feature index, then the lowest threshold.
std::optional<Split> best_split(const FeatureMatrix& features,
                                std::span<const Index> rows,
                                const Eigen::VectorXd& grad,
                                const Eigen::VectorXd& hess,
                                const TrainConfig& config);

/// Second-order boosting with exactly config.n_rounds trees.
BoostedEnsemble fit(const FeatureMatrix& features, const Objective& objective,
                    const TrainConfig& config);

Eigen::VectorXd predict(const BoostedEnsemble& ensemble,
                        const FeatureMatrix& features);

// Text format, version 1:
//
//   cannibal-gbdt 1
//   n_features <d>
//   base_score <real>
//   learning_rate <real>
//   n_trees <k>
//   tree <index> <node count>
//   <id> split <feature> <threshold> <L|R> <left id> <right id>
//   <id> leaf <weight>
//   ...
//   end
//
// Reals are written in shortest round-trip form, so save/load is lossless.
void save_ensemble(const BoostedEnsemble& ensemble, std::ostream& out);
BoostedEnsemble load_ensemble(std::istream& in);

}  // namespace cannibal

#endif  // CANNIBAL_GBDT_HPP
