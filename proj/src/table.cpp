#include "tabagent/table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tabagent/util.hpp"

namespace tabagent {

std::string to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::boolean: return "boolean";
  }
  return "categorical";
}

std::string to_string(ColumnRole r) {
  switch (r) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::target: return "target";
    case ColumnRole::id: return "id";
    case ColumnRole::ignore: return "ignore";
  }
  return "feature";
}

static ColumnKind kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "boolean") return ColumnKind::boolean;
  return ColumnKind::categorical;
}

static ColumnRole role_from_string(const std::string& s) {
  if (s == "target") return ColumnRole::target;
  if (s == "id") return ColumnRole::id;
  if (s == "ignore") return ColumnRole::ignore;
  return ColumnRole::feature;
}

// ---------------------------------------------------------------------------
// Column

Column Column::numeric(std::vector<double> values,
                       std::vector<std::uint8_t> missing) {
  Column c;
  c.kind_ = ColumnKind::numeric;
  if (missing.empty()) missing.assign(values.size(), 0);
  if (missing.size() != values.size())
    throw std::invalid_argument("missing mask size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) {  // NaN normalized to the missing state
      missing[i] = 1;
      values[i] = 0.0;
    }
  }
  c.nums_ = std::move(values);
  c.missing_ = std::move(missing);
  return c;
}

Column Column::categorical(std::vector<std::string> values,
                           std::vector<std::uint8_t> missing) {
  Column c;
  c.kind_ = ColumnKind::categorical;
  if (missing.empty()) missing.assign(values.size(), 0);
  if (missing.size() != values.size())
    throw std::invalid_argument("missing mask size mismatch");
  c.strs_ = std::move(values);
  c.missing_ = std::move(missing);
  return c;
}

Column Column::boolean(std::vector<std::uint8_t> values,
                       std::vector<std::uint8_t> missing) {
  Column c;
  c.kind_ = ColumnKind::boolean;
  if (missing.empty()) missing.assign(values.size(), 0);
  if (missing.size() != values.size())
    throw std::invalid_argument("missing mask size mismatch");
  c.bools_ = std::move(values);
  c.missing_ = std::move(missing);
  return c;
}

std::size_t Column::missing_count() const {
  std::size_t n = 0;
  for (auto m : missing_) n += m != 0;
  return n;
}

std::string Column::cell_text(std::size_t i) const {
  if (missing_[i]) return "";
  switch (kind_) {
    case ColumnKind::numeric: return format_double(nums_[i]);
    case ColumnKind::categorical: return strs_[i];
    case ColumnKind::boolean: return bools_[i] ? "1" : "0";
  }
  return "";
}

bool Column::operator==(const Column& other) const {
  if (kind_ != other.kind_ || missing_ != other.missing_) return false;
  switch (kind_) {
    case ColumnKind::numeric: return nums_ == other.nums_;
    case ColumnKind::categorical: return strs_ == other.strs_;
    case ColumnKind::boolean: return bools_ == other.bools_;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Table

Table::Table(std::vector<std::pair<std::string, Column>> columns)
    : columns_(std::move(columns)) {
  std::unordered_set<std::string> seen;
  for (const auto& [name, col] : columns_) {
    if (name.empty()) throw std::invalid_argument("empty column name");
    if (!seen.insert(name).second)
      throw std::invalid_argument("duplicate column name: " + name);
  }
  if (!columns_.empty()) {
    n_rows_ = columns_.front().second.size();
    for (const auto& [name, col] : columns_) {
      if (col.size() != n_rows_)
        throw std::invalid_argument("column length mismatch: " + name);
    }
  }
}

std::vector<std::string> Table::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& [name, _] : columns_) out.push_back(name);
  return out;
}

bool Table::has_column(const std::string& name) const {
  for (const auto& [n, _] : columns_)
    if (n == name) return true;
  return false;
}

const Column& Table::col(const std::string& name) const {
  for (const auto& [n, c] : columns_)
    if (n == name) return c;
  throw std::out_of_range("no such column: " + name);
}

Table Table::with_column(const std::string& name, Column c) const {
  auto cols = columns_;
  cols.emplace_back(name, std::move(c));
  return Table(std::move(cols));
}

Table Table::without_column(const std::string& name) const {
  std::vector<std::pair<std::string, Column>> cols;
  for (const auto& p : columns_)
    if (p.first != name) cols.push_back(p);
  if (cols.size() == columns_.size())
    throw std::out_of_range("no such column: " + name);
  return Table(std::move(cols));
}

Table Table::replace_column(const std::string& name, Column c) const {
  auto cols = columns_;
  for (auto& p : cols) {
    if (p.first == name) {
      p.second = std::move(c);
      return Table(std::move(cols));
    }
  }
  throw std::out_of_range("no such column: " + name);
}

Table Table::select_columns(const std::vector<std::string>& keep) const {
  std::unordered_set<std::string> want(keep.begin(), keep.end());
  std::vector<std::pair<std::string, Column>> cols;
  for (const auto& p : columns_)
    if (want.count(p.first)) cols.push_back(p);
  return Table(std::move(cols));
}

Table Table::take_rows(const std::vector<std::size_t>& rows) const {
  std::vector<std::pair<std::string, Column>> cols;
  cols.reserve(columns_.size());
  for (const auto& [name, c] : columns_) {
    std::vector<std::uint8_t> miss(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) miss[i] = c.missing_at(rows[i]);
    switch (c.kind()) {
      case ColumnKind::numeric: {
        std::vector<double> v(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) v[i] = c.num_at(rows[i]);
        cols.emplace_back(name, Column::numeric(std::move(v), std::move(miss)));
        break;
      }
      case ColumnKind::categorical: {
        std::vector<std::string> v(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) v[i] = c.str_at(rows[i]);
        cols.emplace_back(name, Column::categorical(std::move(v), std::move(miss)));
        break;
      }
      case ColumnKind::boolean: {
        std::vector<std::uint8_t> v(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) v[i] = c.bool_at(rows[i]);
        cols.emplace_back(name, Column::boolean(std::move(v), std::move(miss)));
        break;
      }
    }
  }
  return Table(std::move(cols));
}

Table Table::head(std::size_t n) const {
  n = std::min(n, n_rows_);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return take_rows(rows);
}

std::string Table::content_hash() const {
  Fnv1a h;
  for (const auto& [name, c] : columns_) {
    h.update(name);
    h.update("\x1f", 1);
    h.update(to_string(c.kind()));
    for (std::size_t i = 0; i < c.size(); ++i) {
      h.update(c.missing_at(i) ? "\x01" : "\x00", 1);
      h.update(c.cell_text(i));
      h.update("\x1e", 1);
    }
  }
  return h.hex();
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::vector<ColumnSpec> cols) : cols_(std::move(cols)) {
  int targets = 0;
  std::unordered_set<std::string> seen;
  for (const auto& c : cols_) {
    if (!seen.insert(c.name).second)
      throw std::invalid_argument("duplicate schema column: " + c.name);
    targets += c.role == ColumnRole::target;
  }
  if (targets > 1) throw std::invalid_argument("more than one target column");
}

const ColumnSpec* Schema::find(const std::string& name) const {
  for (const auto& c : cols_)
    if (c.name == name) return &c;
  return nullptr;
}

std::optional<std::string> Schema::target_name() const {
  for (const auto& c : cols_)
    if (c.role == ColumnRole::target) return c.name;
  return std::nullopt;
}

std::vector<std::string> Schema::feature_names() const {
  std::vector<std::string> out;
  for (const auto& c : cols_)
    if (c.role == ColumnRole::feature) out.push_back(c.name);
  return out;
}

Schema Schema::with(const ColumnSpec& spec) const {
  auto cols = cols_;
  for (auto& c : cols) {
    if (c.name == spec.name) {
      c = spec;
      return Schema(std::move(cols));
    }
  }
  cols.push_back(spec);
  return Schema(std::move(cols));
}

Schema Schema::without(const std::string& name) const {
  std::vector<ColumnSpec> cols;
  for (const auto& c : cols_)
    if (c.name != name) cols.push_back(c);
  return Schema(std::move(cols));
}

nlohmann::json Schema::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cols_) {
    arr.push_back({{"name", c.name},
                   {"kind", to_string(c.kind)},
                   {"nullable", c.nullable},
                   {"role", to_string(c.role)}});
  }
  return arr;
}

Schema Schema::from_json(const nlohmann::json& j) {
  std::vector<ColumnSpec> cols;
  for (const auto& e : j) {
    ColumnSpec s;
    s.name = e.at("name").get<std::string>();
    s.kind = kind_from_string(e.at("kind").get<std::string>());
    s.nullable = e.at("nullable").get<bool>();
    s.role = role_from_string(e.at("role").get<std::string>());
    cols.push_back(std::move(s));
  }
  return Schema(std::move(cols));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct CsvRows {
  std::vector<std::vector<std::string>> rows;
};

CsvRows split_csv(const std::string& text, char delim) {
  CsvRows out;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    out.rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      in_quotes = true;
      field_started = true;
      ++i;
      continue;
    }
    if (c == delim) {
      end_field();
      ++i;
      continue;
    }
    if (c == '\r') {
      if (i + 1 < n && text[i + 1] == '\n') ++i;
      end_row();
      ++i;
      continue;
    }
    if (c == '\n') {
      end_row();
      ++i;
      continue;
    }
    field += c;
    field_started = true;
    ++i;
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  if (in_quotes) throw IoError("csv: unterminated quoted field");
  return out;
}

bool needs_quoting(const std::string& s, char delim) {
  return s.find(delim) != std::string::npos ||
         s.find('"') != std::string::npos || s.find('\n') != std::string::npos ||
         s.find('\r') != std::string::npos;
}

std::string quote_field(const std::string& s, char delim) {
  if (!needs_quoting(s, delim)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

Table parse_csv(const std::string& text, const CsvOptions& options) {
  if (text.empty()) throw IoError("csv: empty file");
  CsvRows raw = split_csv(text, options.delimiter);
  if (raw.rows.empty()) throw IoError("csv: empty file");

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (options.has_header) {
    header = raw.rows[0];
    first_data = 1;
  } else {
    for (std::size_t i = 0; i < raw.rows[0].size(); ++i)
      header.push_back("c" + std::to_string(i + 1));
  }
  const std::size_t width = header.size();
  const std::size_t n_data = raw.rows.size() - first_data;

  std::set<std::string> missing_set(options.missing_tokens.begin(),
                                    options.missing_tokens.end());

  std::vector<std::vector<std::string>> cells(width);
  std::vector<std::vector<std::uint8_t>> miss(width);
  for (auto& v : cells) v.reserve(n_data);
  for (auto& v : miss) v.reserve(n_data);

  for (std::size_t r = first_data; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    if (row.size() != width) {
      throw IoError("csv: ragged row at index " + std::to_string(r) + " (" +
                    std::to_string(row.size()) + " fields, expected " +
                    std::to_string(width) + ")");
    }
    for (std::size_t cidx = 0; cidx < width; ++cidx) {
      bool is_missing = missing_set.count(row[cidx]) > 0;
      miss[cidx].push_back(is_missing ? 1 : 0);
      cells[cidx].push_back(is_missing ? "" : row[cidx]);
    }
  }

  std::vector<std::pair<std::string, Column>> cols;
  cols.reserve(width);
  for (std::size_t cidx = 0; cidx < width; ++cidx) {
    cols.emplace_back(header[cidx], Column::categorical(std::move(cells[cidx]),
                                                        std::move(miss[cidx])));
  }
  return Table(std::move(cols));
}

Table load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), options);
}

std::string render_csv(const Table& t, const CsvOptions& options) {
  std::string out;
  if (options.has_header) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) out += options.delimiter;
      out += quote_field(t.name_at(c), options.delimiter);
    }
    out += '\n';
  }
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) out += options.delimiter;
      out += quote_field(t.col_at(c).cell_text(r), options.delimiter);
    }
    out += '\n';
  }
  return out;
}

void export_csv(const Table& t, const std::string& path,
                const CsvOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << render_csv(t, options);
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Schema inference and coercion

namespace {

constexpr double kNumericParseThreshold = 0.95;

ColumnKind infer_kind(const Column& c) {
  std::set<std::string> domain;
  std::size_t non_missing = 0, parsed = 0;
  double tmp;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.missing_at(i)) continue;
    ++non_missing;
    const std::string& s = c.str_at(i);
    if (domain.size() <= 2) domain.insert(s);
    if (parse_double(s, tmp)) ++parsed;
  }
  if (non_missing == 0) return ColumnKind::categorical;
  static const std::set<std::string> zero_one = {"0", "1"};
  static const std::set<std::string> true_false = {"false", "true"};
  if (domain == zero_one || domain == true_false) return ColumnKind::boolean;
  if (static_cast<double>(parsed) >= kNumericParseThreshold * non_missing)
    return ColumnKind::numeric;
  return ColumnKind::categorical;
}

}  // namespace

Schema infer_schema(const Table& t, const std::string& target_name) {
  if (!t.has_column(target_name))
    throw std::invalid_argument("unknown target column: " + target_name);
  std::vector<ColumnSpec> specs;
  specs.reserve(t.n_cols());
  for (std::size_t i = 0; i < t.n_cols(); ++i) {
    const Column& c = t.col_at(i);
    ColumnSpec s;
    s.name = t.name_at(i);
    s.kind = infer_kind(c);
    // unparsable numeric cells become missing at coercion, so they count
    // toward nullability here
    std::size_t missing = c.missing_count();
    if (s.kind == ColumnKind::numeric) {
      double tmp;
      for (std::size_t r = 0; r < c.size(); ++r)
        if (!c.missing_at(r) && !parse_double(c.str_at(r), tmp)) ++missing;
    }
    s.nullable = missing > 0;
    s.role = s.name == target_name ? ColumnRole::target : ColumnRole::feature;
    specs.push_back(std::move(s));
  }
  return Schema(std::move(specs));
}

Table coerce(const Table& t, const Schema& schema) {
  std::vector<std::pair<std::string, Column>> cols;
  cols.reserve(t.n_cols());
  for (std::size_t i = 0; i < t.n_cols(); ++i) {
    const std::string& name = t.name_at(i);
    const Column& c = t.col_at(i);
    const ColumnSpec* spec = schema.find(name);
    if (!spec) throw std::invalid_argument("schema missing column: " + name);
    const std::size_t n = c.size();
    std::vector<std::uint8_t> miss(n);
    for (std::size_t r = 0; r < n; ++r) miss[r] = c.missing_at(r);
    switch (spec->kind) {
      case ColumnKind::numeric: {
        std::vector<double> v(n, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          if (miss[r]) continue;
          double x;
          if (c.kind() == ColumnKind::numeric) x = c.num_at(r);
          else if (c.kind() == ColumnKind::boolean) x = c.bool_at(r) ? 1.0 : 0.0;
          else if (!parse_double(c.str_at(r), x)) {
            miss[r] = 1;
            continue;
          }
          v[r] = x;
        }
        cols.emplace_back(name, Column::numeric(std::move(v), std::move(miss)));
        break;
      }
      case ColumnKind::boolean: {
        std::vector<std::uint8_t> v(n, 0);
        for (std::size_t r = 0; r < n; ++r) {
          if (miss[r]) continue;
          if (c.kind() == ColumnKind::boolean) {
            v[r] = c.bool_at(r);
          } else if (c.kind() == ColumnKind::numeric) {
            v[r] = c.num_at(r) != 0.0;
          } else {
            const std::string& s = c.str_at(r);
            if (s == "1" || s == "true") v[r] = 1;
            else if (s == "0" || s == "false") v[r] = 0;
            else miss[r] = 1;
          }
        }
        cols.emplace_back(name, Column::boolean(std::move(v), std::move(miss)));
        break;
      }
      case ColumnKind::categorical: {
        std::vector<std::string> v(n);
        for (std::size_t r = 0; r < n; ++r)
          if (!miss[r]) v[r] = c.cell_text(r);
        cols.emplace_back(name,
                          Column::categorical(std::move(v), std::move(miss)));
        break;
      }
    }
  }
  return Table(std::move(cols));
}

// ---------------------------------------------------------------------------
// Profiling

namespace {

// nearest-rank percentile on sorted values: smallest v with rank >= ceil(p*n)
double nearest_rank(const std::vector<double>& sorted, double p) {
  std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

}  // namespace

std::vector<ColumnProfile> profile(const Table& t, const Schema& schema) {
  std::vector<ColumnProfile> out;
  out.reserve(t.n_cols());
  for (std::size_t i = 0; i < t.n_cols(); ++i) {
    const std::string& name = t.name_at(i);
    const Column& c = t.col_at(i);
    const ColumnSpec* spec = schema.find(name);
    if (!spec) throw std::invalid_argument("schema missing column: " + name);
    ColumnProfile p;
    p.name = name;
    p.kind = spec->kind;
    const std::size_t n = c.size();
    const std::size_t miss = c.missing_count();
    p.missing_ratio = n == 0 ? 0.0 : static_cast<double>(miss) / n;

    if (spec->kind == ColumnKind::numeric) {
      std::vector<double> vals;
      vals.reserve(n - miss);
      for (std::size_t r = 0; r < n; ++r)
        if (!c.missing_at(r)) vals.push_back(c.num_at(r));
      std::set<double> distinct(vals.begin(), vals.end());
      p.n_distinct = distinct.size();
      if (!vals.empty()) {
        double sum = 0;
        for (double v : vals) sum += v;
        double mean = sum / vals.size();
        double ss = 0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        p.mean = mean;
        p.std_dev = std::sqrt(ss / vals.size());  // population std
        p.min = sorted.front();
        p.max = sorted.back();
        p.p1 = nearest_rank(sorted, 0.01);
        p.p50 = nearest_rank(sorted, 0.50);
        p.p99 = nearest_rank(sorted, 0.99);
      }
    } else {
      std::map<std::string, std::size_t> counts;
      for (std::size_t r = 0; r < n; ++r)
        if (!c.missing_at(r)) ++counts[c.cell_text(r)];
      p.n_distinct = counts.size();
      std::vector<std::pair<std::string, std::size_t>> top(counts.begin(),
                                                           counts.end());
      std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
      });
      if (top.size() > 10) top.resize(10);
      p.top_values = std::move(top);
    }
    out.push_back(std::move(p));
  }
  return out;
}

DatasetCard make_card(const Table& t, const Schema& schema,
                      const std::string& dataset_name,
                      const std::string& task_kind,
                      const std::string& source_note,
                      const std::string& description) {
  auto target = schema.target_name();
  if (!target) throw std::invalid_argument("schema has no target column");
  DatasetCard card;
  card.name = dataset_name;
  card.task_kind = task_kind;
  card.target = *target;
  card.n_rows = t.n_rows();
  card.n_features = schema.feature_names().size();
  card.source_note = source_note;
  card.description = description;
  return card;
}

nlohmann::json ColumnProfile::to_json() const {
  nlohmann::json j{{"name", name},
                   {"kind", to_string(kind)},
                   {"missing_ratio", missing_ratio},
                   {"n_distinct", n_distinct}};
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("mean", mean);
  put("std", std_dev);
  put("min", min);
  put("max", max);
  put("p1", p1);
  put("p50", p50);
  put("p99", p99);
  if (!top_values.empty()) {
    nlohmann::json tv = nlohmann::json::array();
    for (const auto& [v, n] : top_values) tv.push_back({{"value", v}, {"count", n}});
    j["top_values"] = tv;
  }
  return j;
}

nlohmann::json DatasetCard::to_json() const {
  return {{"name", name},          {"task_kind", task_kind},
          {"target", target},      {"n_rows", n_rows},
          {"n_features", n_features}, {"source_note", source_note},
          {"description", description}};
}

DatasetCard DatasetCard::from_json(const nlohmann::json& j) {
  DatasetCard c;
  c.name = j.at("name").get<std::string>();
  c.task_kind = j.at("task_kind").get<std::string>();
  c.target = j.at("target").get<std::string>();
  c.n_rows = j.at("n_rows").get<std::size_t>();
  c.n_features = j.at("n_features").get<std::size_t>();
  c.source_note = j.value("source_note", "");
  c.description = j.value("description", "");
  return c;
}

nlohmann::json profiles_to_json(const std::vector<ColumnProfile>& profiles) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : profiles) arr.push_back(p.to_json());
  return arr;
}

}  // namespace tabagent
