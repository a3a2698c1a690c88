#include "tabagent/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tabagent/util.hpp"

namespace tabagent {

namespace {

struct Standardized {
  Mat cols;                  // centered/scaled copies; constant columns zeroed
  std::vector<double> mu, sigma;
};

Standardized standardize(const Mat& X) {
  Standardized s;
  const std::size_t p = X.size();
  s.cols.resize(p);
  s.mu.resize(p);
  s.sigma.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto& col = X[j];
    const std::size_t n = col.size();
    double sum = 0;
    for (double v : col) sum += v;
    double mu = sum / n;
    double ss = 0;
    for (double v : col) ss += (v - mu) * (v - mu);
    double sigma = std::sqrt(ss / n);
    s.mu[j] = mu;
    s.sigma[j] = sigma;
    s.cols[j].resize(n);
    if (sigma > 0) {
      for (std::size_t i = 0; i < n; ++i) s.cols[j][i] = (col[i] - mu) / sigma;
    }  // constant column stays all-zero: weight pinned at 0
  }
  return s;
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

}  // namespace

double LassoFit::predict_one(const Mat& X, std::size_t row) const {
  double z = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * X[j][row];
  return z;
}

std::vector<double> LassoFit::predict(const Mat& X) const {
  const std::size_t n = X.empty() ? 0 : X[0].size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_one(X, i);
  return out;
}

LassoFit fit_lasso(const Mat& X, const std::vector<double>& y, double lambda,
                   int max_sweeps, double tol) {
  if (lambda < 0) throw std::invalid_argument("lasso: lambda must be >= 0");
  if (X.empty()) throw std::invalid_argument("lasso: degenerate X (no columns)");
  const std::size_t n = y.size();
  if (n < 2) throw std::invalid_argument("lasso: need at least 2 rows");
  for (const auto& col : X)
    if (col.size() != n) throw std::invalid_argument("lasso: column length mismatch");

  const std::size_t p = X.size();
  Standardized s = standardize(X);
  double y_mean = 0;
  for (double v : y) y_mean += v;
  y_mean /= n;

  std::vector<double> w(p, 0.0);
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - y_mean;

  LassoFit fit;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double max_delta = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (s.sigma[j] == 0) continue;
      const auto& xj = s.cols[j];
      double rho = 0;
      for (std::size_t i = 0; i < n; ++i) rho += xj[i] * resid[i];
      rho = rho / n + w[j];  // (1/n) xj' xj == 1 after standardization
      double w_new = soft_threshold(rho, lambda);
      double delta = w_new - w[j];
      if (delta != 0) {
        for (std::size_t i = 0; i < n; ++i) resid[i] -= delta * xj[i];
        w[j] = w_new;
      }
      max_delta = std::max(max_delta, std::fabs(delta));
    }
    double obj = 0;
    for (double r : resid) obj += r * r;
    obj /= 2.0 * n;
    for (double wj : w) obj += lambda * std::fabs(wj);
    fit.objective_by_sweep.push_back(obj);
    if (max_delta < tol) {
      ++sweep;
      break;
    }
  }
  fit.sweeps_used = sweep;

  fit.weights.resize(p);
  fit.intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    fit.weights[j] = s.sigma[j] > 0 ? w[j] / s.sigma[j] : 0.0;
    fit.intercept -= fit.weights[j] * s.mu[j];
  }
  return fit;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow
double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace

double LogisticFit::prob_one(const Mat& X, std::size_t row) const {
  double z = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * X[j][row];
  return sigmoid(z);
}

std::vector<double> LogisticFit::predict_proba(const Mat& X) const {
  const std::size_t n = X.empty() ? 0 : X[0].size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = prob_one(X, i);
  return out;
}

std::vector<int> LogisticFit::predict_label(const Mat& X) const {
  auto proba = predict_proba(X);
  std::vector<int> out(proba.size());
  for (std::size_t i = 0; i < proba.size(); ++i) out[i] = proba[i] >= 0.5 ? 1 : 0;
  return out;
}

LogisticFit fit_logistic_l2(const Mat& X, const std::vector<int>& y,
                            double lambda2, int max_iters, double tol) {
  if (X.empty()) throw std::invalid_argument("logistic: degenerate X (no columns)");
  const std::size_t n = y.size();
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw std::invalid_argument("logistic: labels must be 0/1");
  }
  if (!has0 || !has1) throw SingleClassError("logistic: single-class target");

  const std::size_t p = X.size();
  Standardized s = standardize(X);

  std::vector<double> w(p, 0.0);
  double b = 0.0;

  auto objective = [&](const std::vector<double>& wv, double bv) {
    double obj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = bv;
      for (std::size_t j = 0; j < p; ++j) z += wv[j] * s.cols[j][i];
      obj += softplus(z) - y[i] * z;
    }
    obj /= n;
    double reg = 0;
    for (double wj : wv) reg += wj * wj;
    return obj + 0.5 * lambda2 * reg;
  };

  std::vector<double> gw(p), probs(n);
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double z = b;
      for (std::size_t j = 0; j < p; ++j) z += w[j] * s.cols[j][i];
      probs[i] = sigmoid(z);
    }
    double gb = 0;
    for (std::size_t i = 0; i < n; ++i) gb += probs[i] - y[i];
    gb /= n;
    double gmax = std::fabs(gb);
    for (std::size_t j = 0; j < p; ++j) {
      double g = 0;
      for (std::size_t i = 0; i < n; ++i) g += s.cols[j][i] * (probs[i] - y[i]);
      gw[j] = g / n + lambda2 * w[j];
      gmax = std::max(gmax, std::fabs(gw[j]));
    }
    if (gmax < tol) break;

    double gnorm2 = gb * gb;
    for (double g : gw) gnorm2 += g * g;
    double obj0 = objective(w, b);
    double step = 1.0;
    std::vector<double> w_try(p);
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < p; ++j) w_try[j] = w[j] - step * gw[j];
      double b_try = b - step * gb;
      if (objective(w_try, b_try) <= obj0 - 1e-4 * step * gnorm2) {
        w = w_try;
        b = b_try;
        break;
      }
      step *= 0.5;
    }
  }

  LogisticFit fit;
  fit.iters_used = iter;
  fit.weights.resize(p);
  fit.intercept = b;
  for (std::size_t j = 0; j < p; ++j) {
    fit.weights[j] = s.sigma[j] > 0 ? w[j] / s.sigma[j] : 0.0;
    fit.intercept -= fit.weights[j] * s.mu[j];
  }
  return fit;
}

double f1(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("f1: length mismatch");
  if (truth.empty()) throw std::invalid_argument("f1: empty input");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double total = 0;
  for (int cls : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      bool p = pred[i] == cls, t = truth[i] == cls;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    double cls_f1 =
        precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
    total += cls_f1;
  }
  return total / classes.size();
}

double one_minus_rae(const std::vector<double>& pred,
                     const std::vector<double>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("one_minus_rae: length mismatch");
  if (truth.empty()) throw std::invalid_argument("one_minus_rae: empty input");
  double mean = 0;
  for (double v : truth) mean += v;
  mean /= truth.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += std::fabs(truth[i] - pred[i]);
    den += std::fabs(truth[i] - mean);
  }
  if (den == 0)
    throw std::invalid_argument("one_minus_rae: constant truth (zero denominator)");
  return 1.0 - num / den;
}

nlohmann::json MetricResult::to_json() const {
  return {{"kind", kind},
          {"value", value},
          {"fold_values", fold_values},
          {"n_folds", n_folds},
          {"seed", seed}};
}

MetricResult MetricResult::from_json(const nlohmann::json& j) {
  MetricResult m;
  m.kind = j.at("kind").get<std::string>();
  m.value = j.at("value").get<double>();
  m.fold_values = j.at("fold_values").get<std::vector<double>>();
  m.n_folds = j.at("n_folds").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

// ---------------------------------------------------------------------------
// Downstream models

namespace {

class LassoCvModel final : public DownstreamModel {
 public:
  bool is_classifier() const override { return false; }

  void fit(const Mat& X, const std::vector<double>& y) override {
    static const double kGrid[] = {0.001, 0.01, 0.1};
    const std::size_t n = y.size();
    // inner 3-fold on contiguous thirds of the (already shuffled) train fold
    double best_score = -std::numeric_limits<double>::infinity();
    double best_lambda = kGrid[0];
    if (n >= 6) {
      for (double lambda : kGrid) {
        double score_sum = 0;
        int used = 0;
        for (int f = 0; f < 3; ++f) {
          std::size_t lo = f * n / 3, hi = (f + 1) * n / 3;
          Mat Xtr(X.size()), Xte(X.size());
          std::vector<double> ytr, yte;
          for (std::size_t j = 0; j < X.size(); ++j) {
            for (std::size_t i = 0; i < n; ++i) {
              if (i >= lo && i < hi) Xte[j].push_back(X[j][i]);
              else Xtr[j].push_back(X[j][i]);
            }
          }
          for (std::size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi) yte.push_back(y[i]);
            else ytr.push_back(y[i]);
          }
          if (ytr.size() < 2 || yte.empty()) continue;
          LassoFit f2 = fit_lasso(Xtr, ytr, lambda);
          auto pred = f2.predict(Xte);
          double mae = 0;
          for (std::size_t i = 0; i < yte.size(); ++i)
            mae += std::fabs(yte[i] - pred[i]);
          score_sum += -mae;
          ++used;
        }
        if (used > 0 && score_sum / used > best_score) {
          best_score = score_sum / used;
          best_lambda = lambda;
        }
      }
    }
    fit_ = fit_lasso(X, y, best_lambda);
    lambda_used_ = best_lambda;
  }

  std::vector<double> predict(const Mat& X) const override {
    return fit_.predict(X);
  }

  std::unique_ptr<DownstreamModel> fresh() const override {
    return std::make_unique<LassoCvModel>();
  }

 private:
  LassoFit fit_;
  double lambda_used_ = 0;
};

class LogisticModel final : public DownstreamModel {
 public:
  bool is_classifier() const override { return true; }

  void fit(const Mat& X, const std::vector<double>& y) override {
    std::vector<int> yi(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yi[i] = y[i] != 0.0;
    double lambda2 = y.empty() ? 1.0 : 1.0 / y.size();
    fit_ = fit_logistic_l2(X, yi, lambda2);
  }

  std::vector<double> predict(const Mat& X) const override {
    auto labels = fit_.predict_label(X);
    return std::vector<double>(labels.begin(), labels.end());
  }

  std::unique_ptr<DownstreamModel> fresh() const override {
    return std::make_unique<LogisticModel>();
  }

 private:
  LogisticFit fit_;
};

}  // namespace

std::unique_ptr<DownstreamModel> make_lasso_model() {
  return std::make_unique<LassoCvModel>();
}

std::unique_ptr<DownstreamModel> make_logistic_model() {
  return std::make_unique<LogisticModel>();
}

// ---------------------------------------------------------------------------
// Cross-validation

Mat feature_matrix(const Table& t, const Schema& schema,
                   std::vector<std::string>* names_out) {
  Mat X;
  for (const auto& name : schema.feature_names()) {
    if (!t.has_column(name)) continue;
    const Column& c = t.col(name);
    if (c.kind() != ColumnKind::numeric)
      throw std::invalid_argument("feature column not numeric: " + name);
    std::vector<double> col(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.missing_at(i))
        throw std::invalid_argument("feature column has missing cells: " + name);
      col[i] = c.num_at(i);
    }
    X.push_back(std::move(col));
    if (names_out) names_out->push_back(name);
  }
  return X;
}

std::vector<double> numeric_target(const Table& t, const Schema& schema) {
  auto target = schema.target_name();
  if (!target) throw std::invalid_argument("schema has no target");
  const Column& c = t.col(*target);
  std::vector<double> y(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.missing_at(i))
      throw std::invalid_argument("target has missing cells");
    switch (c.kind()) {
      case ColumnKind::numeric: y[i] = c.num_at(i); break;
      case ColumnKind::boolean: y[i] = c.bool_at(i) ? 1.0 : 0.0; break;
      case ColumnKind::categorical:
        throw std::invalid_argument("regression target must be numeric");
    }
  }
  return y;
}

std::vector<int> class_target(const Table& t, const Schema& schema,
                              std::vector<std::string>* labels_out) {
  auto target = schema.target_name();
  if (!target) throw std::invalid_argument("schema has no target");
  const Column& c = t.col(*target);
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.missing_at(i)) throw std::invalid_argument("target has missing cells");
    ids.emplace(c.cell_text(i), 0);
  }
  int next = 0;
  for (auto& [label, id] : ids) id = next++;  // sorted label order
  std::vector<int> y(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) y[i] = ids[c.cell_text(i)];
  if (labels_out)
    for (const auto& [label, id] : ids) labels_out->push_back(label);
  return y;
}

namespace {

struct Folds {
  std::vector<std::vector<std::size_t>> test_rows;
};

Folds make_folds(std::size_t n, int k, bool stratified,
                 const std::vector<int>& classes, std::uint64_t seed) {
  Folds folds;
  folds.test_rows.resize(k);
  Rng rng(seed);
  if (stratified) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[classes[i]].push_back(i);
    for (auto& [cls, rows] : by_class) {
      rng.shuffle(rows);
      for (std::size_t i = 0; i < rows.size(); ++i)
        folds.test_rows[i % k].push_back(rows[i]);
    }
    for (auto& rows : folds.test_rows) std::sort(rows.begin(), rows.end());
  } else {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < n; ++i) {
      int f = static_cast<int>(i * k / n);
      if (f >= k) f = k - 1;
      folds.test_rows[f].push_back(order[i]);
    }
  }
  return folds;
}

MetricResult cv_once(const Table& t, const Schema& schema,
                     const DownstreamModel& model, int k_folds,
                     std::uint64_t seed, bool* single_class_fold) {
  *single_class_fold = false;
  const std::size_t n = t.n_rows();
  Mat X = feature_matrix(t, schema);
  if (X.empty()) throw std::invalid_argument("cross_validate: no feature columns");

  MetricResult result;
  result.n_folds = k_folds;
  result.seed = seed;

  std::vector<int> classes;
  std::vector<double> y_num;
  if (model.is_classifier()) {
    classes = class_target(t, schema);
    result.kind = "f1";
  } else {
    y_num = numeric_target(t, schema);
    result.kind = "one_minus_rae";
  }

  Folds folds = make_folds(n, k_folds, model.is_classifier(), classes, seed);

  for (int f = 0; f < k_folds; ++f) {
    std::vector<std::uint8_t> in_test(n, 0);
    for (auto r : folds.test_rows[f]) in_test[r] = 1;
    Mat Xtr(X.size()), Xte(X.size());
    for (std::size_t j = 0; j < X.size(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (in_test[i]) Xte[j].push_back(X[j][i]);
        else Xtr[j].push_back(X[j][i]);
      }
    }
    std::vector<double> ytr;
    std::vector<double> yte_num;
    std::vector<int> yte_cls;
    for (std::size_t i = 0; i < n; ++i) {
      double v = model.is_classifier() ? classes[i] : y_num[i];
      if (in_test[i]) {
        if (model.is_classifier()) yte_cls.push_back(classes[i]);
        else yte_num.push_back(y_num[i]);
      } else {
        ytr.push_back(v);
      }
    }
    if (model.is_classifier()) {
      std::set<double> train_classes(ytr.begin(), ytr.end());
      if (train_classes.size() < 2) {
        *single_class_fold = true;
        return result;
      }
    }
    auto m = model.fresh();
    m->fit(Xtr, ytr);
    auto pred = m->predict(Xte);
    double fold_metric;
    if (model.is_classifier()) {
      std::vector<int> pred_i(pred.size());
      for (std::size_t i = 0; i < pred.size(); ++i)
        pred_i[i] = static_cast<int>(std::lround(pred[i]));
      fold_metric = f1(pred_i, yte_cls);
    } else {
      fold_metric = one_minus_rae(pred, yte_num);
    }
    result.fold_values.push_back(fold_metric);
  }
  double sum = 0;
  for (double v : result.fold_values) sum += v;
  result.value = sum / result.fold_values.size();
  return result;
}

}  // namespace

MetricResult cross_validate(const Table& t, const Schema& schema,
                            const DownstreamModel& model, int k_folds,
                            std::uint64_t seed) {
  if (k_folds < 2) throw std::invalid_argument("cross_validate: k_folds >= 2");
  if (t.n_rows() < static_cast<std::size_t>(k_folds))
    throw std::invalid_argument("cross_validate: n_rows < k_folds");
  bool single = false;
  MetricResult r = cv_once(t, schema, model, k_folds, seed, &single);
  if (!single) return r;
  r = cv_once(t, schema, model, k_folds, seed + 1, &single);  // one refold
  if (!single) return r;
  throw SingleClassError("cross_validate: single-class training fold after refold");
}

// ---------------------------------------------------------------------------
// Sanity checks

nlohmann::json SanityReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : violations)
    arr.push_back({{"code", v.code}, {"detail", v.detail}});
  return arr;
}

SanityReport sanity_check(const Table& t, const Schema& schema,
                          const std::optional<MetricResult>& metric) {
  SanityReport report;
  auto features = schema.feature_names();
  std::vector<std::string> present;
  for (const auto& name : features)
    if (t.has_column(name)) present.push_back(name);

  if (present.empty()) {
    report.violations.push_back({"empty_feature_set", "no feature columns remain"});
    return report;
  }

  bool all_constant = true;
  for (const auto& name : present) {
    const Column& c = t.col(name);
    if (c.kind() == ColumnKind::numeric) {
      std::set<double> distinct;
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.missing_at(i)) continue;
        double v = c.num_at(i);
        if (!std::isfinite(v)) {
          report.violations.push_back(
              {"nan_or_inf", "non-finite value in feature '" + name + "'"});
          return report;
        }
        distinct.insert(v);
        if (distinct.size() > 1) break;
      }
      if (distinct.size() > 1) all_constant = false;
    } else {
      std::set<std::string> distinct;
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.missing_at(i)) continue;
        distinct.insert(c.cell_text(i));
        if (distinct.size() > 1) break;
      }
      if (distinct.size() > 1) all_constant = false;
    }
  }
  if (all_constant)
    report.violations.push_back(
        {"constant_feature_set", "every feature column is constant"});

  if (metric) {
    if (metric->kind == "one_minus_rae") {
      if (metric->value < 0)
        report.violations.push_back(
            {"below_naive_baseline",
             "1-RAE " + format_double(metric->value) + " below mean-predictor floor 0"});
    } else if (metric->kind == "f1") {
      // majority-class floor: macro F1 of the constant majority predictor
      std::vector<int> y = class_target(t, schema);
      std::map<int, std::size_t> counts;
      for (int v : y) ++counts[v];
      int majority = 0;
      std::size_t best = 0;
      for (const auto& [cls, n] : counts) {
        if (n > best) {
          best = n;
          majority = cls;
        }
      }
      std::vector<int> constant_pred(y.size(), majority);
      double floor = f1(constant_pred, y);
      if (metric->value < floor)
        report.violations.push_back(
            {"below_naive_baseline", "macro F1 " + format_double(metric->value) +
                                         " below majority floor " +
                                         format_double(floor)});
    }
  }
  return report;
}

}  // namespace tabagent
