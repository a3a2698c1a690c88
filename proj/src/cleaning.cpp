#include "tabagent/cleaning.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "tabagent/util.hpp"

namespace tabagent {

std::string to_string(CleaningKind k) {
  switch (k) {
    case CleaningKind::drop_column: return "drop_column";
    case CleaningKind::impute_median: return "impute_median";
    case CleaningKind::impute_mode: return "impute_mode";
    case CleaningKind::drop_duplicate_rows: return "drop_duplicate_rows";
    case CleaningKind::winsorize: return "winsorize";
    case CleaningKind::one_hot: return "one_hot";
    case CleaningKind::frequency_encode: return "frequency_encode";
  }
  return "drop_column";
}

nlohmann::json CleaningAction::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}};
  if (!column.empty()) j["column"] = column;
  if (kind == CleaningKind::winsorize) {
    j["p_low"] = p_low;
    j["p_high"] = p_high;
  }
  if (kind == CleaningKind::one_hot) j["max_card"] = max_card;
  return j;
}

nlohmann::json CleaningConfig::to_json() const {
  return {{"outlier_clip", outlier_clip},
          {"one_hot_max_card", one_hot_max_card},
          {"drop_missing_threshold", drop_missing_threshold}};
}

CleaningConfig CleaningConfig::from_json(const nlohmann::json& j) {
  CleaningConfig c;
  c.outlier_clip = j.value("outlier_clip", false);
  c.one_hot_max_card = j.value("one_hot_max_card", std::size_t{15});
  c.drop_missing_threshold = j.value("drop_missing_threshold", 0.5);
  return c;
}

nlohmann::json CleaningReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [action, counts] : applied) {
    nlohmann::json j = action.to_json();
    j["cells_imputed"] = counts.cells_imputed;
    j["rows_dropped"] = counts.rows_dropped;
    j["columns_created"] = counts.columns_created;
    j["columns_dropped"] = counts.columns_dropped;
    arr.push_back(j);
  }
  return arr;
}

std::vector<CleaningAction> plan_cleaning(
    const std::vector<ColumnProfile>& profiles, const Schema& schema,
    const CleaningConfig& config) {
  std::vector<CleaningAction> out;
  auto role_of = [&](const std::string& name) {
    const ColumnSpec* s = schema.find(name);
    return s ? s->role : ColumnRole::ignore;
  };
  std::set<std::string> dropped;

  // (1) drops
  for (const auto& p : profiles) {
    ColumnRole role = role_of(p.name);
    if (role == ColumnRole::target) continue;
    bool drop = role == ColumnRole::id || role == ColumnRole::ignore ||
                p.missing_ratio > config.drop_missing_threshold;
    if (drop) {
      out.push_back({CleaningKind::drop_column, p.name, 0, 0, 0});
      dropped.insert(p.name);
    }
  }
  // (2) and (3) imputation
  for (const auto& p : profiles) {
    if (role_of(p.name) != ColumnRole::feature || dropped.count(p.name)) continue;
    if (p.missing_ratio <= 0.0) continue;
    if (p.kind == ColumnKind::numeric)
      out.push_back({CleaningKind::impute_median, p.name, 0, 0, 0});
    else
      out.push_back({CleaningKind::impute_mode, p.name, 0, 0, 0});
  }
  // (4)
  out.push_back({CleaningKind::drop_duplicate_rows, "", 0, 0, 0});
  // (5)
  if (config.outlier_clip) {
    for (const auto& p : profiles) {
      if (role_of(p.name) != ColumnRole::feature || dropped.count(p.name)) continue;
      if (p.kind == ColumnKind::numeric)
        out.push_back({CleaningKind::winsorize, p.name, 0.01, 0.99, 0});
    }
  }
  // (6) encoding
  for (const auto& p : profiles) {
    if (role_of(p.name) != ColumnRole::feature || dropped.count(p.name)) continue;
    if (p.kind == ColumnKind::numeric) continue;
    CleaningAction a{CleaningKind::frequency_encode, p.name, 0, 0, 0};
    if (p.n_distinct <= config.one_hot_max_card) {
      a.kind = CleaningKind::one_hot;
      a.max_card = config.one_hot_max_card;
    }
    out.push_back(a);
  }
  return out;
}

namespace {

// conventional median: midpoint of the two middle values for even counts
double median_of(std::vector<double> vals) {
  std::sort(vals.begin(), vals.end());
  std::size_t n = vals.size();
  if (n % 2 == 1) return vals[n / 2];
  return (vals[n / 2 - 1] + vals[n / 2]) / 2.0;
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

}  // namespace

CleanResult apply_cleaning(const Table& t, const Schema& schema,
                           const std::vector<CleaningAction>& actions) {
  Table table = t;
  Schema sch = schema;
  CleaningReport report;

  for (const auto& action : actions) {
    CleaningCounts counts;
    if (action.kind != CleaningKind::drop_duplicate_rows &&
        !table.has_column(action.column))
      throw std::invalid_argument("cleaning action references absent column: " +
                                  action.column);
    switch (action.kind) {
      case CleaningKind::drop_column: {
        table = table.without_column(action.column);
        sch = sch.without(action.column);
        counts.columns_dropped = 1;
        break;
      }
      case CleaningKind::impute_median: {
        const Column& c = table.col(action.column);
        if (c.kind() != ColumnKind::numeric)
          throw std::invalid_argument("impute_median on non-numeric column: " +
                                      action.column);
        std::vector<double> present;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) present.push_back(c.num_at(i));
        if (!present.empty()) {
          double med = median_of(present);
          std::vector<double> v(c.size());
          std::vector<std::uint8_t> miss(c.size(), 0);
          for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.missing_at(i)) {
              v[i] = med;
              ++counts.cells_imputed;
            } else {
              v[i] = c.num_at(i);
            }
          }
          table = table.replace_column(action.column,
                                       Column::numeric(std::move(v), std::move(miss)));
          const ColumnSpec* spec = sch.find(action.column);
          ColumnSpec updated = *spec;
          updated.nullable = false;
          sch = sch.with(updated);
        }
        break;
      }
      case CleaningKind::impute_mode: {
        const Column& c = table.col(action.column);
        if (c.kind() == ColumnKind::numeric)
          throw std::invalid_argument("impute_mode on numeric column: " +
                                      action.column);
        std::map<std::string, std::size_t> counts_by_value;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) ++counts_by_value[c.cell_text(i)];
        if (!counts_by_value.empty()) {
          // ties: lexicographically smallest (map iterates ascending)
          std::string mode;
          std::size_t best = 0;
          for (const auto& [v, n] : counts_by_value) {
            if (n > best) {
              best = n;
              mode = v;
            }
          }
          std::vector<std::string> v(c.size());
          std::vector<std::uint8_t> miss(c.size(), 0);
          for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.missing_at(i)) {
              v[i] = mode;
              ++counts.cells_imputed;
            } else {
              v[i] = c.cell_text(i);
            }
          }
          table = table.replace_column(
              action.column, Column::categorical(std::move(v), std::move(miss)));
          const ColumnSpec* spec = sch.find(action.column);
          ColumnSpec updated = *spec;
          updated.kind = ColumnKind::categorical;
          updated.nullable = false;
          sch = sch.with(updated);
        }
        break;
      }
      case CleaningKind::drop_duplicate_rows: {
        std::set<std::string> seen;
        std::vector<std::size_t> keep;
        for (std::size_t r = 0; r < table.n_rows(); ++r) {
          std::string key;
          for (std::size_t c = 0; c < table.n_cols(); ++c) {
            key += table.col_at(c).missing_at(r) ? "\x01" : "\x00";
            key += table.col_at(c).cell_text(r);
            key += '\x1e';
          }
          if (seen.insert(key).second) keep.push_back(r);
        }
        counts.rows_dropped = table.n_rows() - keep.size();
        if (counts.rows_dropped > 0) table = table.take_rows(keep);
        break;
      }
      case CleaningKind::winsorize: {
        const Column& c = table.col(action.column);
        if (c.kind() != ColumnKind::numeric)
          throw std::invalid_argument("winsorize on non-numeric column: " +
                                      action.column);
        std::vector<double> present;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) present.push_back(c.num_at(i));
        if (present.size() >= 2) {
          std::sort(present.begin(), present.end());
          double lo = nearest_rank(present, action.p_low);
          double hi = nearest_rank(present, action.p_high);
          std::vector<double> v(c.size());
          std::vector<std::uint8_t> miss(c.size());
          for (std::size_t i = 0; i < c.size(); ++i) {
            miss[i] = c.missing_at(i);
            v[i] = miss[i] ? 0.0 : std::clamp(c.num_at(i), lo, hi);
          }
          table = table.replace_column(action.column,
                                       Column::numeric(std::move(v), std::move(miss)));
        }
        break;
      }
      case CleaningKind::one_hot: {
        const Column& c = table.col(action.column);
        if (c.kind() == ColumnKind::numeric)
          throw std::invalid_argument("one_hot on numeric column: " +
                                      action.column);
        std::set<std::string> values;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) values.insert(c.cell_text(i));
        Table next = table.without_column(action.column);
        for (const auto& value : values) {
          std::string name = action.column + "=" + value;
          while (next.has_column(name)) name += "_";
          std::vector<double> v(c.size());
          for (std::size_t i = 0; i < c.size(); ++i)
            v[i] = (!c.missing_at(i) && c.cell_text(i) == value) ? 1.0 : 0.0;
          next = next.with_column(name, Column::numeric(std::move(v)));
          sch = sch.with({name, ColumnKind::numeric, false, ColumnRole::feature});
          ++counts.columns_created;
        }
        sch = sch.without(action.column);
        counts.columns_dropped = 1;
        table = std::move(next);
        break;
      }
      case CleaningKind::frequency_encode: {
        const Column& c = table.col(action.column);
        if (c.kind() == ColumnKind::numeric)
          throw std::invalid_argument("frequency_encode on numeric column: " +
                                      action.column);
        std::map<std::string, std::size_t> freq;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) ++freq[c.cell_text(i)];
        const double n = static_cast<double>(c.size());
        std::vector<double> v(c.size());
        std::vector<std::uint8_t> miss(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
          miss[i] = c.missing_at(i);
          v[i] = miss[i] ? 0.0 : static_cast<double>(freq[c.cell_text(i)]) / n;
        }
        table = table.replace_column(action.column,
                                     Column::numeric(std::move(v), std::move(miss)));
        const ColumnSpec* spec = sch.find(action.column);
        ColumnSpec updated = *spec;
        updated.kind = ColumnKind::numeric;
        sch = sch.with(updated);
        break;
      }
    }
    report.applied.emplace_back(action, counts);
  }
  return {std::move(table), std::move(sch), std::move(report)};
}

}  // namespace tabagent
