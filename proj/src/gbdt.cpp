#include "cannibal/gbdt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "cannibal/errors.hpp"

namespace cannibal {

// ---------------------------------------------------------------------------
// FeatureMatrix

FeatureMatrix::FeatureMatrix(Index rows, Index cols)
    : values_(Eigen::MatrixXd::Zero(rows, cols)),
      missing_(MissingMask::Constant(rows, cols, false)) {}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values) {
  missing_ = MissingMask::Constant(values.rows(), values.cols(), false);
  *this = FeatureMatrix(std::move(values), std::move(missing_));
}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values, MissingMask missing)
    : values_(std::move(values)), missing_(std::move(missing)) {
  if (values_.rows() != missing_.rows() || values_.cols() != missing_.cols()) {
    throw ShapeError("missing mask shape does not match feature values");
  }
  for (Index c = 0; c < values_.cols(); ++c) {
    for (Index r = 0; r < values_.rows(); ++r) {
      if (missing_(r, c)) {
        values_(r, c) = 0.0;
      } else if (!std::isfinite(values_(r, c))) {
        throw NumericError("non-finite feature value at row " +
                           std::to_string(r) + ", column " + std::to_string(c) +
                           "; flag the cell missing instead");
      }
    }
  }
}

void FeatureMatrix::set(Index row, Index col, double v) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite feature value; use set_missing");
  }
  values_(row, col) = v;
  missing_(row, col) = false;
}

void FeatureMatrix::set_missing(Index row, Index col) {
  values_(row, col) = 0.0;
  missing_(row, col) = true;
}

// ---------------------------------------------------------------------------
// Config / tree / ensemble

void TrainConfig::validate() const {
  if (n_rounds < 1) throw ConfigError("n_rounds must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ConfigError("learning_rate must be in (0, 1]");
  }
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (!(min_child_weight >= 0.0)) {
    throw ConfigError("min_child_weight must be non-negative");
  }
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (base_score && !std::isfinite(*base_score)) {
    throw ConfigError("base_score must be finite");
  }
  if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
}

int RegressionTree::leaf_of(const FeatureMatrix& features, Index row) const {
  int id = 0;
  for (;;) {
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) return id;
    bool go_left;
    if (features.is_missing(row, node.feature)) {
      go_left = node.default_left;
    } else {
      go_left = features.value(row, node.feature) < node.threshold;
    }
    id = go_left ? node.left : node.right;
  }
}

BoostedEnsemble BoostedEnsemble::truncated(std::size_t k) const {
  BoostedEnsemble out = *this;
  out.trees.resize(std::min(k, trees.size()));
  return out;
}

double leaf_weight(double grad_sum, double hess_sum, double lambda) {
  const double denom = hess_sum + lambda;
  if (!(denom > 0.0)) {
    throw DegenerateLeafError("leaf has hessian sum + lambda <= 0");
  }
  return -grad_sum / denom;
}

// ---------------------------------------------------------------------------
// Split search

namespace {

struct Stats {
  double grad = 0.0;
  double hess = 0.0;
  Index count = 0;

  void add(double g, double h) {
    grad += g;
    hess += h;
    ++count;
  }
};

Stats operator+(Stats a, const Stats& b) {
  a.grad += b.grad;
  a.hess += b.hess;
  a.count += b.count;
  return a;
}

Stats operator-(Stats a, const Stats& b) {
  a.grad -= b.grad;
  a.hess -= b.hess;
  a.count -= b.count;
  return a;
}

double score(const Stats& s, double lambda) {
  const double denom = s.hess + lambda;
  return denom > 0.0 ? s.grad * s.grad / denom : 0.0;
}

struct Candidate {
  bool valid = false;
  Split split;
};

// Rows of one node, presorted per feature. Missing rows are kept apart so
// they can be routed to either side.
struct NodeRows {
  std::vector<Index> rows;
  std::vector<std::vector<Index>> present;  // ascending by feature value
  std::vector<std::vector<Index>> missing;
};

class SplitSearch {
 public:
  SplitSearch(const FeatureMatrix& x, const Eigen::VectorXd& grad,
              const Eigen::VectorXd& hess, const TrainConfig& cfg)
      : x_(x), grad_(grad), hess_(hess), cfg_(cfg) {}

  Stats total(std::span<const Index> rows) const {
    Stats s;
    for (Index r : rows) s.add(grad_[r], hess_[r]);
    return s;
  }

  Candidate scan_feature(Index f, std::span<const Index> present,
                         std::span<const Index> missing,
                         const Stats& node) const {
    Candidate best;
    if (present.size() < 2) return best;
    Stats miss;
    for (Index r : missing) miss.add(grad_[r], hess_[r]);
    const Stats present_total = node - miss;
    const double parent = score(node, cfg_.lambda);

    Stats left;
    for (std::size_t i = 0; i + 1 < present.size(); ++i) {
      const Index r = present[i];
      left.add(grad_[r], hess_[r]);
      const double lo = x_.value(r, f);
      const double hi = x_.value(present[i + 1], f);
      if (!(lo < hi)) continue;
      double threshold = lo + (hi - lo) / 2.0;
      if (!(threshold > lo)) threshold = hi;
      const Stats right = present_total - left;

      consider(best, f, threshold, left + miss, right, parent, true);
      if (miss.count > 0) {
        consider(best, f, threshold, left, right + miss, parent, false);
      }
    }
    return best;
  }

  Candidate search(const NodeRows& node_rows, const Stats& node) const {
    const Index d = x_.cols();
    std::vector<Candidate> per_feature(static_cast<std::size_t>(d));
    auto run = [&](Index begin, Index end) {
      for (Index f = begin; f < end; ++f) {
        per_feature[static_cast<std::size_t>(f)] =
            scan_feature(f, node_rows.present[static_cast<std::size_t>(f)],
                         node_rows.missing[static_cast<std::size_t>(f)], node);
      }
    };
    const Index workers = std::min<Index>(cfg_.n_threads, d);
    if (workers <= 1) {
      run(0, d);
    } else {
      std::vector<std::jthread> pool;
      const Index chunk = (d + workers - 1) / workers;
      for (Index begin = 0; begin < d; begin += chunk) {
        pool.emplace_back(run, begin, std::min(d, begin + chunk));
      }
    }
    Candidate best;
    for (const Candidate& c : per_feature) {
      if (c.valid && (!best.valid || c.split.gain > best.split.gain)) best = c;
    }
    return best;
  }

 private:
  void consider(Candidate& best, Index f, double threshold, const Stats& left,
                const Stats& right, double parent, bool default_left) const {
    if (left.count < cfg_.min_samples_leaf ||
        right.count < cfg_.min_samples_leaf) {
      return;
    }
    if (left.hess < cfg_.min_child_weight ||
        right.hess < cfg_.min_child_weight) {
      return;
    }
    if (!(left.hess + cfg_.lambda > 0.0) || !(right.hess + cfg_.lambda > 0.0)) {
      return;
    }
    const double gain =
        0.5 * (score(left, cfg_.lambda) + score(right, cfg_.lambda) - parent) -
        cfg_.gamma;
    if (!(gain > 0.0)) return;
    if (!best.valid || gain > best.split.gain) {
      best.valid = true;
      best.split = Split{f, threshold, gain, default_left};
    }
  }

  const FeatureMatrix& x_;
  const Eigen::VectorXd& grad_;
  const Eigen::VectorXd& hess_;
  const TrainConfig& cfg_;
};

NodeRows sort_rows(const FeatureMatrix& x, std::span<const Index> rows) {
  NodeRows out;
  out.rows.assign(rows.begin(), rows.end());
  const auto d = static_cast<std::size_t>(x.cols());
  out.present.resize(d);
  out.missing.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    const auto col = static_cast<Index>(f);
    for (Index r : rows) {
      (x.is_missing(r, col) ? out.missing[f] : out.present[f]).push_back(r);
    }
    std::stable_sort(out.present[f].begin(), out.present[f].end(),
                     [&](Index a, Index b) {
                       return x.value(a, col) < x.value(b, col);
                     });
  }
  return out;
}

void check_gradient_shapes(const FeatureMatrix& x, const Eigen::VectorXd& grad,
                           const Eigen::VectorXd& hess) {
  if (grad.size() != x.rows() || hess.size() != x.rows()) {
    throw ContractError("gradient/hessian length does not match row count");
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const Eigen::VectorXd& grad,
              const Eigen::VectorXd& hess, const TrainConfig& cfg)
      : x_(x), cfg_(cfg), search_(x, grad, hess, cfg),
        goes_left_(static_cast<std::size_t>(x.rows()), 0) {}

  RegressionTree build(NodeRows root) {
    RegressionTree tree;
    grow(tree, std::move(root), 0);
    return tree;
  }

 private:
  int grow(RegressionTree& tree, NodeRows rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const Stats node = search_.total(rows.rows);

    Candidate cand;
    if (depth < cfg_.max_depth) cand = search_.search(rows, node);
    if (!cand.valid) {
      tree.nodes[static_cast<std::size_t>(id)].weight =
          leaf_weight(node.grad, node.hess, cfg_.lambda);
      return id;
    }

    const Split& s = cand.split;
    for (Index r : rows.rows) {
      goes_left_[static_cast<std::size_t>(r)] =
          x_.is_missing(r, s.feature) ? s.default_left
                                      : x_.value(r, s.feature) < s.threshold;
    }
    NodeRows left;
    NodeRows right;
    auto route = [&](const std::vector<Index>& src, std::vector<Index>& l,
                     std::vector<Index>& r) {
      for (Index row : src) {
        (goes_left_[static_cast<std::size_t>(row)] ? l : r).push_back(row);
      }
    };
    route(rows.rows, left.rows, right.rows);
    const std::size_t d = rows.present.size();
    left.present.resize(d);
    right.present.resize(d);
    left.missing.resize(d);
    right.missing.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
      route(rows.present[f], left.present[f], right.present[f]);
      route(rows.missing[f], left.missing[f], right.missing[f]);
    }
    rows = NodeRows{};

    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    n.feature = static_cast<int>(s.feature);
    n.threshold = s.threshold;
    n.default_left = s.default_left;
    n.left = l;
    n.right = r;
    return id;
  }

  const FeatureMatrix& x_;
  const TrainConfig& cfg_;
  SplitSearch search_;
  std::vector<char> goes_left_;
};

}  // namespace

std::optional<Split> best_split(const FeatureMatrix& features,
                                std::span<const Index> rows,
                                const Eigen::VectorXd& grad,
                                const Eigen::VectorXd& hess,
                                const TrainConfig& config) {
  check_gradient_shapes(features, grad, hess);
  if (rows.empty()) throw EmptyInputError("best_split needs at least one row");
  const SplitSearch search(features, grad, hess, config);
  const Candidate c = search.search(sort_rows(features, rows), search.total(rows));
  if (!c.valid) return std::nullopt;
  return c.split;
}

// ---------------------------------------------------------------------------
// Boosting

BoostedEnsemble fit(const FeatureMatrix& features, const Objective& objective,
                    const TrainConfig& config) {
  config.validate();
  const Index n = features.rows();
  if (n == 0) throw EmptyInputError("cannot fit on zero rows");
  if (!objective.eval) throw ContractError("objective has no evaluator");

  BoostedEnsemble model;
  model.learning_rate = config.learning_rate;
  model.base_score = config.base_score.value_or(objective.default_base_score);
  model.n_features = features.cols();
  if (!std::isfinite(model.base_score)) {
    throw NumericError("base score is not finite");
  }
  model.trees.reserve(static_cast<std::size_t>(config.n_rounds));

  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  const NodeRows sorted = sort_rows(features, all);

  Eigen::VectorXd preds = Eigen::VectorXd::Constant(n, model.base_score);
  for (int round = 0; round < config.n_rounds; ++round) {
    ObjectiveEval eval = objective.eval(preds);
    check_gradient_shapes(features, eval.grad, eval.hess);
    if (!eval.grad.allFinite() || !eval.hess.allFinite()) {
      throw NumericError("non-finite gradient or hessian at round " +
                         std::to_string(round));
    }
    const Eigen::VectorXd hess = eval.hess.cwiseMax(kHessianFloor);

    TreeBuilder builder(features, eval.grad, hess, config);
    RegressionTree tree = builder.build(sorted);
    for (Index r = 0; r < n; ++r) {
      preds[r] += model.learning_rate * tree.output(features, r);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

Eigen::VectorXd predict(const BoostedEnsemble& ensemble,
                        const FeatureMatrix& features) {
  if (features.cols() != ensemble.n_features) {
    throw ShapeError("feature matrix has " + std::to_string(features.cols()) +
                     " columns, ensemble expects " +
                     std::to_string(ensemble.n_features));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(features.rows(),
                                                  ensemble.base_score);
  for (const RegressionTree& tree : ensemble.trees) {
    for (Index r = 0; r < features.rows(); ++r) {
      out[r] += ensemble.learning_rate * tree.output(features, r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kMagic = "cannibal-gbdt";
constexpr int kFormatVersion = 1;

std::string real_to_string(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ParseError("unexpected end of ensemble file");
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word();
    if (w != keyword) {
      throw ParseError("expected '" + keyword + "' but found '" + w + "'");
    }
  }

  double real() {
    const std::string w = word();
    double v = 0.0;
    const auto res = std::from_chars(w.data(), w.data() + w.size(), v);
    if (res.ec != std::errc{} || res.ptr != w.data() + w.size()) {
      throw ParseError("bad real '" + w + "'");
    }
    return v;
  }

  long long integer() {
    const std::string w = word();
    long long v = 0;
    const auto res = std::from_chars(w.data(), w.data() + w.size(), v);
    if (res.ec != std::errc{} || res.ptr != w.data() + w.size()) {
      throw ParseError("bad integer '" + w + "'");
    }
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_ensemble(const BoostedEnsemble& ensemble, std::ostream& out) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "n_features " << ensemble.n_features << '\n';
  out << "base_score " << real_to_string(ensemble.base_score) << '\n';
  out << "learning_rate " << real_to_string(ensemble.learning_rate) << '\n';
  out << "n_trees " << ensemble.trees.size() << '\n';
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) {
    const auto& nodes = ensemble.trees[t].nodes;
    out << "tree " << t << ' ' << nodes.size() << '\n';
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode& n = nodes[i];
      out << i;
      if (n.is_leaf()) {
        out << " leaf " << real_to_string(n.weight) << '\n';
      } else {
        out << " split " << n.feature << ' ' << real_to_string(n.threshold)
            << ' ' << (n.default_left ? 'L' : 'R') << ' ' << n.left << ' '
            << n.right << '\n';
      }
    }
  }
  out << "end\n";
}

BoostedEnsemble load_ensemble(std::istream& in) {
  TokenReader tok(in);
  tok.expect(kMagic);
  if (tok.integer() != kFormatVersion) {
    throw ParseError("unsupported ensemble format version");
  }
  BoostedEnsemble model;
  tok.expect("n_features");
  model.n_features = static_cast<Index>(tok.integer());
  tok.expect("base_score");
  model.base_score = tok.real();
  tok.expect("learning_rate");
  model.learning_rate = tok.real();
  tok.expect("n_trees");
  const long long n_trees = tok.integer();
  if (n_trees < 0 || model.n_features < 0) {
    throw ParseError("negative count in ensemble header");
  }
  for (long long t = 0; t < n_trees; ++t) {
    tok.expect("tree");
    if (tok.integer() != t) throw ParseError("trees out of order");
    const long long n_nodes = tok.integer();
    if (n_nodes < 1) throw ParseError("tree without nodes");
    RegressionTree tree;
    tree.nodes.resize(static_cast<std::size_t>(n_nodes));
    for (long long i = 0; i < n_nodes; ++i) {
      if (tok.integer() != i) throw ParseError("nodes out of order");
      TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
      const std::string kind = tok.word();
      if (kind == "leaf") {
        node.weight = tok.real();
        if (!std::isfinite(node.weight)) throw ParseError("non-finite leaf");
      } else if (kind == "split") {
        node.feature = static_cast<int>(tok.integer());
        node.threshold = tok.real();
        const std::string dir = tok.word();
        if (dir != "L" && dir != "R") throw ParseError("bad default branch");
        node.default_left = dir == "L";
        node.left = static_cast<int>(tok.integer());
        node.right = static_cast<int>(tok.integer());
        const auto in_range = [&](int c) { return c > i && c < n_nodes; };
        if (node.feature < 0 || node.feature >= model.n_features ||
            !in_range(node.left) || !in_range(node.right)) {
          throw ParseError("split node " + std::to_string(i) + " of tree " +
                           std::to_string(t) + " references invalid data");
        }
      } else {
        throw ParseError("unknown node kind '" + kind + "'");
      }
    }
    model.trees.push_back(std::move(tree));
  }
  tok.expect("end");
  return model;
}

}  // namespace cannibal
