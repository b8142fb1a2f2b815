#include "cannibal/objectives.hpp"

#include <cmath>
#include <string>

#include "cannibal/errors.hpp"

namespace cannibal {

GroupIndex::GroupIndex(std::vector<Index> group_of_row, Eigen::VectorXd totals,
                       std::vector<std::string> names)
    : group_of_row_(std::move(group_of_row)),
      counts_(static_cast<std::size_t>(totals.size()), 0),
      totals_(std::move(totals)),
      names_(std::move(names)) {
  if (names_.empty()) {
    for (Index g = 0; g < totals_.size(); ++g) {
      names_.push_back("group " + std::to_string(g));
    }
  }
  if (static_cast<Index>(names_.size()) != totals_.size()) {
    throw ShapeError("group names and totals differ in length");
  }
  for (Index g : group_of_row_) {
    if (g < 0 || g >= totals_.size()) {
      throw ContractError("row assigned to unknown group " + std::to_string(g));
    }
    ++counts_[static_cast<std::size_t>(g)];
  }
  for (Index g = 0; g < totals_.size(); ++g) {
    if (counts_[static_cast<std::size_t>(g)] == 0) {
      throw ContractError("group '" + names_[static_cast<std::size_t>(g)] +
                          "' has no rows");
    }
  }
}

void GroupIndex::require_totals() const {
  for (Index g = 0; g < totals_.size(); ++g) {
    if (!std::isfinite(totals_[g])) {
      throw ConstraintDataError("no category total for group '" + name(g) + "'");
    }
  }
}

Eigen::VectorXd GroupIndex::group_sums(const Eigen::VectorXd& per_row) const {
  if (per_row.size() != rows()) {
    throw ShapeError("vector length does not match grouped row count");
  }
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(groups());
  for (Index r = 0; r < rows(); ++r) sums[group_of(r)] += per_row[r];
  return sums;
}

FinetuneMode parse_finetune_mode(std::string_view text) {
  if (text == "squared") return FinetuneMode::kSquared;
  if (text == "literal") return FinetuneMode::kLiteral;
  throw ConfigError("finetune mode must be 'squared' or 'literal', got '" +
                    std::string(text) + "'");
}

std::string_view to_string(FinetuneMode mode) {
  return mode == FinetuneMode::kSquared ? "squared" : "literal";
}

namespace {

void check_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": length mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

// D_w = sum of predictions in week w minus the known total.
Eigen::VectorXd group_residuals(const Eigen::VectorXd& preds,
                                const GroupIndex& groups) {
  if (preds.size() != groups.rows()) {
    throw ShapeError("predictions do not match grouped row count");
  }
  groups.require_totals();
  return groups.group_sums(preds) - groups.totals();
}

// sum_i D_{w(i)}^2 / count_i collapses to sum_w D_w^2.
double group_penalty(const Eigen::VectorXd& residuals) {
  return residuals.squaredNorm();
}

}  // namespace

ObjectiveEval se_eval(const Eigen::VectorXd& preds,
                      const Eigen::VectorXd& labels) {
  check_same_length(preds, labels, "se_eval");
  const Eigen::VectorXd diff = preds - labels;
  ObjectiveEval out;
  out.grad = 2.0 * diff;
  out.hess = Eigen::VectorXd::Constant(preds.size(), 2.0);
  out.loss_value = preds.size() > 0
                       ? diff.squaredNorm() / static_cast<double>(preds.size())
                       : 0.0;
  return out;
}

ObjectiveEval sum_constraint_eval(const Eigen::VectorXd& preds,
                                  const Eigen::VectorXd& labels,
                                  const GroupIndex& groups) {
  check_same_length(preds, labels, "sum_constraint_eval");
  const Eigen::VectorXd resid = group_residuals(preds, groups);
  const Eigen::VectorXd diff = preds - labels;
  const auto n = static_cast<double>(preds.size());

  ObjectiveEval out;
  out.grad = 2.0 * diff;
  for (Index r = 0; r < preds.size(); ++r) {
    out.grad[r] += 2.0 * resid[groups.group_of(r)];
  }
  out.hess = Eigen::VectorXd::Constant(preds.size(), 4.0);
  out.loss_value = n > 0 ? (diff.squaredNorm() + group_penalty(resid)) / n : 0.0;
  return out;
}

ObjectiveEval finetune_eval(const Eigen::VectorXd& preds,
                            const RatioVector& ratios, const GroupIndex& groups,
                            FinetuneMode mode) {
  if (ratios.size() != preds.size()) {
    throw ContractError("finetune_eval: expected one ratio per row, got " +
                        std::to_string(ratios.size()) + " for " +
                        std::to_string(preds.size()) + " rows");
  }
  for (Index r = 0; r < ratios.size(); ++r) {
    if (!std::isfinite(ratios[r])) {
      throw ContractError("finetune_eval: missing ratio for row " +
                          std::to_string(r));
    }
  }
  const Eigen::VectorXd resid = group_residuals(preds, groups);
  const auto n = static_cast<double>(preds.size());

  ObjectiveEval out;
  out.grad.resize(preds.size());
  out.hess.resize(preds.size());
  double anchor_loss = 0.0;
  for (Index r = 0; r < preds.size(); ++r) {
    const Index g = groups.group_of(r);
    const double gap = preds[r] - ratios[r] * groups.total(g);
    if (mode == FinetuneMode::kSquared) {
      out.grad[r] = 2.0 * resid[g] + 2.0 * gap;
      out.hess[r] = 4.0;
      anchor_loss += gap * gap;
    } else {
      out.grad[r] = 2.0 * resid[g] + 1.0;
      out.hess[r] = 2.0;
      anchor_loss += gap;
    }
  }
  out.loss_value = n > 0 ? (group_penalty(resid) + anchor_loss) / n : 0.0;
  return out;
}

RatioVector prediction_ratios(const Eigen::VectorXd& stage1_preds,
                              const GroupIndex& groups) {
  const Eigen::VectorXd sums = groups.group_sums(stage1_preds);
  RatioVector out(stage1_preds.size());
  for (Index r = 0; r < stage1_preds.size(); ++r) {
    const Index g = groups.group_of(r);
    out[r] = std::abs(sums[g]) <= 1e-12
                 ? 1.0 / static_cast<double>(groups.count(g))
                 : stage1_preds[r] / sums[g];
  }
  return out;
}

namespace {

double mean_or_zero(const Eigen::VectorXd& v) {
  return v.size() > 0 ? v.mean() : 0.0;
}

}  // namespace

Objective make_se_objective(Eigen::VectorXd labels) {
  const double base = mean_or_zero(labels);
  return Objective{
      [labels = std::move(labels)](const Eigen::VectorXd& p) {
        return se_eval(p, labels);
      },
      base};
}

Objective make_sum_constraint_objective(Eigen::VectorXd labels,
                                        GroupIndex groups) {
  groups.require_totals();
  const double base = mean_or_zero(labels);
  return Objective{[labels = std::move(labels), groups = std::move(groups)](
                       const Eigen::VectorXd& p) {
                     return sum_constraint_eval(p, labels, groups);
                   },
                   base};
}

Objective make_finetune_objective(RatioVector ratios, GroupIndex groups,
                                  FinetuneMode mode) {
  groups.require_totals();
  if (ratios.size() != groups.rows()) {
    throw ContractError("one ratio per grouped row is required");
  }
  Eigen::VectorXd anchors(ratios.size());
  for (Index r = 0; r < ratios.size(); ++r) {
    anchors[r] = ratios[r] * groups.total(groups.group_of(r));
  }
  const double base = mean_or_zero(anchors);
  return Objective{[ratios = std::move(ratios), groups = std::move(groups),
                    mode](const Eigen::VectorXd& p) {
                     return finetune_eval(p, ratios, groups, mode);
                   },
                   base};
}

}  // namespace cannibal
