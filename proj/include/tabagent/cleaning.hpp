#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tabagent/table.hpp"

namespace tabagent {

enum class CleaningKind {
  drop_column,
  impute_median,
  impute_mode,
  drop_duplicate_rows,
  winsorize,
  one_hot,
  frequency_encode,
};

std::string to_string(CleaningKind k);

struct CleaningAction {
  CleaningKind kind;
  std::string column;  // empty only for drop_duplicate_rows
  double p_low = 0.01;
  double p_high = 0.99;
  std::size_t max_card = 15;

  nlohmann::json to_json() const;
};

struct CleaningConfig {
  bool outlier_clip = false;
  std::size_t one_hot_max_card = 15;
  double drop_missing_threshold = 0.5;

  nlohmann::json to_json() const;
  static CleaningConfig from_json(const nlohmann::json& j);
};

struct CleaningCounts {
  std::size_t cells_imputed = 0;
  std::size_t rows_dropped = 0;
  std::size_t columns_created = 0;
  std::size_t columns_dropped = 0;
};

struct CleaningReport {
  std::vector<std::pair<CleaningAction, CleaningCounts>> applied;
  nlohmann::json to_json() const;
};

struct CleanResult {
  Table table;
  Schema schema;
  CleaningReport report;
};

// Rule table, in order: (1) drop features with missing_ratio above the
// threshold (id/ignore columns are dropped here too); (2) numeric features
// with any missing get median imputation; (3) categorical/boolean features
// with any missing get mode imputation (ties: smallest value); (4) always
// drop exact duplicate rows; (5) winsorize numerics at (p1, p99) when
// outlier_clip is on; (6) categorical/boolean features one-hot when
// n_distinct <= max_card, else frequency encode. The target is never touched.
std::vector<CleaningAction> plan_cleaning(
    const std::vector<ColumnProfile>& profiles, const Schema& schema,
    const CleaningConfig& config = {});

CleanResult apply_cleaning(const Table& t, const Schema& schema,
                           const std::vector<CleaningAction>& actions);

}  // namespace tabagent
