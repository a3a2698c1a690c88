#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tabagent {

enum class ColumnKind { numeric, categorical, boolean };
enum class ColumnRole { feature, target, id, ignore };

std::string to_string(ColumnKind k);
std::string to_string(ColumnRole r);

// One column of cells. Missing is tracked in a separate mask, never as a
// sentinel value; NaN handed to the numeric factory is normalized to missing.
class Column {
 public:
  static Column numeric(std::vector<double> values,
                        std::vector<std::uint8_t> missing = {});
  static Column categorical(std::vector<std::string> values,
                            std::vector<std::uint8_t> missing = {});
  static Column boolean(std::vector<std::uint8_t> values,
                        std::vector<std::uint8_t> missing = {});

  ColumnKind kind() const { return kind_; }
  std::size_t size() const { return missing_.size(); }
  bool missing_at(std::size_t i) const { return missing_[i] != 0; }
  std::size_t missing_count() const;

  double num_at(std::size_t i) const { return nums_[i]; }
  const std::string& str_at(std::size_t i) const { return strs_[i]; }
  bool bool_at(std::size_t i) const { return bools_[i] != 0; }

  // Canonical text of a cell: numerics via shortest round-trip form,
  // booleans as 0/1, missing as "". Used for CSV export, duplicate
  // detection and hashing.
  std::string cell_text(std::size_t i) const;

  bool operator==(const Column& other) const;

 private:
  Column() = default;
  ColumnKind kind_ = ColumnKind::categorical;
  std::vector<double> nums_;
  std::vector<std::string> strs_;
  std::vector<std::uint8_t> bools_;
  std::vector<std::uint8_t> missing_;
};

// Immutable columnar table. Every operation returns a new value.
class Table {
 public:
  Table() = default;
  Table(std::vector<std::pair<std::string, Column>> columns);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }
  const std::vector<std::pair<std::string, Column>>& columns() const {
    return columns_;
  }
  std::vector<std::string> names() const;
  bool has_column(const std::string& name) const;
  const Column& col(const std::string& name) const;
  const Column& col_at(std::size_t i) const { return columns_[i].second; }
  const std::string& name_at(std::size_t i) const { return columns_[i].first; }

  Table with_column(const std::string& name, Column c) const;
  Table without_column(const std::string& name) const;
  Table replace_column(const std::string& name, Column c) const;
  Table select_columns(const std::vector<std::string>& keep) const;
  Table take_rows(const std::vector<std::size_t>& rows) const;
  Table head(std::size_t n) const;

  std::string content_hash() const;

 private:
  std::vector<std::pair<std::string, Column>> columns_;
  std::size_t n_rows_ = 0;
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  bool nullable = false;
  ColumnRole role = ColumnRole::feature;
};

// Typed view of a table: per-column kind and role, at most one target.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> cols);

  const std::vector<ColumnSpec>& specs() const { return cols_; }
  const ColumnSpec* find(const std::string& name) const;
  std::optional<std::string> target_name() const;
  std::vector<std::string> feature_names() const;

  Schema with(const ColumnSpec& spec) const;    // append or replace by name
  Schema without(const std::string& name) const;

  nlohmann::json to_json() const;
  static Schema from_json(const nlohmann::json& j);

 private:
  std::vector<ColumnSpec> cols_;
};

struct ColumnProfile {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  double missing_ratio = 0.0;
  std::size_t n_distinct = 0;
  // numeric-only stats; absent when the column has no non-missing cells
  std::optional<double> mean, std_dev, min, max, p1, p50, p99;
  // categorical/boolean: top-k (value, count), k=10, count desc then value asc
  std::vector<std::pair<std::string, std::size_t>> top_values;

  nlohmann::json to_json() const;
};

struct DatasetCard {
  std::string name;
  std::string task_kind;  // "classification" | "regression"
  std::string target;
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::string source_note;
  std::string description;

  nlohmann::json to_json() const;
  static DatasetCard from_json(const nlohmann::json& j);
};

struct CsvOptions {
  char delimiter = ',';
  bool has_header = true;
  std::vector<std::string> missing_tokens = {"", "NA", "N/A", "?", "null"};
};

// RFC-4180 reader. All cells come back as raw categorical strings pending
// schema inference; cells matching a missing token are marked missing.
Table load_csv(const std::string& path, const CsvOptions& options = {});
Table parse_csv(const std::string& text, const CsvOptions& options = {});
void export_csv(const Table& t, const std::string& path,
                const CsvOptions& options = {});
std::string render_csv(const Table& t, const CsvOptions& options = {});

// Kind inference over raw string columns: boolean for an exact {0,1} or
// {true,false} domain, numeric when >= 95% of non-missing cells parse as
// float, categorical otherwise. The target gets role=target.
Schema infer_schema(const Table& t, const std::string& target_name);

// Materializes a raw string table into typed columns per the schema.
// Numeric cells that fail to parse become missing.
Table coerce(const Table& t, const Schema& schema);

std::vector<ColumnProfile> profile(const Table& t, const Schema& schema);

DatasetCard make_card(const Table& t, const Schema& schema,
                      const std::string& dataset_name,
                      const std::string& task_kind,
                      const std::string& source_note,
                      const std::string& description);

nlohmann::json profiles_to_json(const std::vector<ColumnProfile>& profiles);

}  // namespace tabagent
