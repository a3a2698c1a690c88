#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabagent/table.hpp"

namespace tabagent {

// column-major design matrix: X[j] is feature column j
using Mat = std::vector<std::vector<double>>;

class SingleClassError : public std::runtime_error {
 public:
  explicit SingleClassError(const std::string& what) : std::runtime_error(what) {}
};

struct LassoFit {
  std::vector<double> weights;  // original scale
  double intercept = 0.0;
  int sweeps_used = 0;
  // objective value after each sweep, in the standardized problem
  std::vector<double> objective_by_sweep;

  double predict_one(const Mat& X, std::size_t row) const;
  std::vector<double> predict(const Mat& X) const;
};

// Cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + lambda*||w||_1 with
// internal column standardization and soft-threshold updates. Deterministic
// from zero init; stops when max |delta w| < tol or max_sweeps.
LassoFit fit_lasso(const Mat& X, const std::vector<double>& y, double lambda,
                   int max_sweeps = 1000, double tol = 1e-6);

struct LogisticFit {
  std::vector<double> weights;  // original scale
  double intercept = 0.0;
  int iters_used = 0;

  double prob_one(const Mat& X, std::size_t row) const;
  std::vector<double> predict_proba(const Mat& X) const;
  std::vector<int> predict_label(const Mat& X) const;  // threshold 0.5
};

// Backtracking gradient descent on the L2-regularized negative log-likelihood,
// deterministic from zero init. y must contain both classes.
LogisticFit fit_logistic_l2(const Mat& X, const std::vector<int>& y,
                            double lambda2, int max_iters = 500,
                            double tol = 1e-6);

// macro-averaged F1 over the classes observed in truth or pred;
// per-class F1 = 2PR/(P+R), taken as 0 when P+R = 0
double f1(const std::vector<int>& pred, const std::vector<int>& truth);

// 1 - sum|y - yhat| / sum|y - mean(y)|; throws on constant truth
double one_minus_rae(const std::vector<double>& pred,
                     const std::vector<double>& truth);

struct MetricResult {
  std::string kind;  // "f1" | "one_minus_rae"
  double value = 0.0;
  std::vector<double> fold_values;
  int n_folds = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static MetricResult from_json(const nlohmann::json& j);
};

class DownstreamModel {
 public:
  virtual ~DownstreamModel() = default;
  virtual bool is_classifier() const = 0;
  virtual void fit(const Mat& X, const std::vector<double>& y) = 0;
  virtual std::vector<double> predict(const Mat& X) const = 0;
  virtual std::unique_ptr<DownstreamModel> fresh() const = 0;
};

// Lasso with the pinned lambda grid {0.001, 0.01, 0.1} chosen by inner
// 3-fold CV on the training fold.
std::unique_ptr<DownstreamModel> make_lasso_model();
// logistic_l2 with lambda2 = 1/n
std::unique_ptr<DownstreamModel> make_logistic_model();

constexpr double kDefaultLassoLambda = 0.01;  // single-fit default (rankers)

// Deterministic k-fold CV: stratified by class for classification,
// contiguous-shuffled for regression. A single-class training fold triggers
// one refold at seed+1, then errors.
MetricResult cross_validate(const Table& t, const Schema& schema,
                            const DownstreamModel& model, int k_folds,
                            std::uint64_t seed);

struct SanityViolation {
  std::string code;  // nan_or_inf | constant_feature_set | below_naive_baseline | empty_feature_set
  std::string detail;
};

struct SanityReport {
  std::vector<SanityViolation> violations;
  bool pass() const { return violations.empty(); }
  nlohmann::json to_json() const;
};

SanityReport sanity_check(const Table& t, const Schema& schema,
                          const std::optional<MetricResult>& metric);

// shared helpers
Mat feature_matrix(const Table& t, const Schema& schema,
                   std::vector<std::string>* names_out = nullptr);
std::vector<double> numeric_target(const Table& t, const Schema& schema);
std::vector<int> class_target(const Table& t, const Schema& schema,
                              std::vector<std::string>* labels_out = nullptr);

}  // namespace tabagent
