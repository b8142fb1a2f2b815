#ifndef CANNIBAL_OBJECTIVES_HPP
#define CANNIBAL_OBJECTIVES_HPP

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cannibal/gbdt.hpp"

namespace cannibal {

/// Assigns every row to one (category, week) group and carries the known
/// group total S. Totals may be NaN for groups that no constrained loss
/// touches; require_totals() turns that into an error.
class GroupIndex {
 public:
  GroupIndex() = default;
  GroupIndex(std::vector<Index> group_of_row, Eigen::VectorXd totals,
             std::vector<std::string> names = {});

  Index rows() const { return static_cast<Index>(group_of_row_.size()); }
  Index groups() const { return totals_.size(); }
  Index group_of(Index row) const {
    return group_of_row_[static_cast<std::size_t>(row)];
  }
  Index count(Index group) const {
    return counts_[static_cast<std::size_t>(group)];
  }
  double total(Index group) const { return totals_[group]; }
  const Eigen::VectorXd& totals() const { return totals_; }
  const std::string& name(Index group) const {
    return names_[static_cast<std::size_t>(group)];
  }

  /// Throws ConstraintDataError naming the first group without a finite total.
  void require_totals() const;

  /// Per-group sums of a row vector.
  Eigen::VectorXd group_sums(const Eigen::VectorXd& per_row) const;

 private:
  std::vector<Index> group_of_row_;
  std::vector<Index> counts_;
  Eigen::VectorXd totals_;
  std::vector<std::string> names_;
};

/// Per-row share of the row's group total in stage-1 predictions.
using RatioVector = Eigen::VectorXd;

enum class FinetuneMode {
  // (p_i - r_i S)^2 anchor.
  kSquared,
  // Linear anchor (p_i - r_i S). Zero curvature; the engine's Hessian floor
  // applies.
  kLiteral,
};

FinetuneMode parse_finetune_mode(std::string_view text);
std::string_view to_string(FinetuneMode mode);

// Gradients below are d(scale * loss_value)/dp where scale is the row count:
// the common 1/m or 1/n normalizer is dropped, the per-week 1/count_i weight
// is not. loss_value itself keeps the exact normalization.

/// Mean squared error. grad 2(p - y), hess 2.
ObjectiveEval se_eval(const Eigen::VectorXd& preds,
                      const Eigen::VectorXd& labels);

/// Squared error plus the weekly category-sum penalty
/// sum_i (S_w(i) - sum_{j in w(i)} p_j)^2 / (count_i n).
/// With D_w = sum_{i in w} p_i - S_w: grad 2(p - y) + 2 D_w, hess 4.
ObjectiveEval sum_constraint_eval(const Eigen::VectorXd& preds,
                                  const Eigen::VectorXd& labels,
                                  const GroupIndex& groups);

/// Category-sum penalty plus an anchor pulling each row toward r_i S_w.
ObjectiveEval finetune_eval(const Eigen::VectorXd& preds,
                            const RatioVector& ratios, const GroupIndex& groups,
                            FinetuneMode mode);

/// r_i = p_i / sum_{j in group(i)} p_j, uniform 1/count_i when that sum is
/// within 1e-12 of zero.
RatioVector prediction_ratios(const Eigen::VectorXd& stage1_preds,
                              const GroupIndex& groups);

// Engine-ready wrappers. Default base score is the label mean (the anchor
// mean r_i S_w for the fine-tune loss).
Objective make_se_objective(Eigen::VectorXd labels);
Objective make_sum_constraint_objective(Eigen::VectorXd labels,
                                        GroupIndex groups);
Objective make_finetune_objective(RatioVector ratios, GroupIndex groups,
                                  FinetuneMode mode);

}  // namespace cannibal

#endif  // CANNIBAL_OBJECTIVES_HPP
