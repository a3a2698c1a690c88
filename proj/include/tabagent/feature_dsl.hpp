#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tabagent/table.hpp"

namespace tabagent {

// Expression AST for gen(): column refs, literals, + - * /, and the unary
// functions log, sqrt, abs, square.
struct Expr {
  enum class Kind { column, literal, add, sub, mul, div, fn };
  Kind kind = Kind::literal;
  std::string name;        // column reference or function name
  double value = 0.0;      // literal
  std::vector<Expr> args;  // 2 for binary ops, 1 for functions

  bool operator==(const Expr& other) const;
};

struct Stmt {
  enum class Kind { select_mi, select_top, zscore, log1p, minmax, bin, gen, drop };
  Kind kind = Kind::drop;
  double theta = 0.0;       // select_mi
  long long k = 0;          // select_top / bin
  std::string metric;       // select_top: "mi" | "lasso_weight"
  std::string column;       // zscore / log1p / minmax / bin / drop
  std::string gen_name;     // gen
  Expr expr;                // gen

  bool operator==(const Stmt& other) const;
};

struct FeatureProgram {
  std::vector<Stmt> statements;
  bool operator==(const FeatureProgram& other) const {
    return statements == other.statements;
  }
};

class DslParseError : public std::runtime_error {
 public:
  DslParseError(std::size_t offset, const std::string& message)
      : std::runtime_error(message + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

FeatureProgram parse_program(const std::string& text);
std::string render_program(const FeatureProgram& p);
std::string render_stmt(const Stmt& s);
std::string render_expr(const Expr& e);

// column references appearing anywhere in an expression
void collect_columns(const Expr& e, std::vector<std::string>& out);

// Plug-in mutual information in bits. Numeric columns are discretized into
// n_bins equal-frequency bins (rank-based, so ties share a bin); categorical
// and boolean columns are used as-is. Columns must be same-length, non-empty
// and free of missing cells.
double mutual_information(const Column& x, const Column& y, int n_bins = 10);

constexpr int kMiBins = 10;
constexpr double kDefaultMiTheta = 0.01;

// (column, score) sorted by score desc, ties by name asc. method "mi" uses
// mutual information against the target; "lasso_weight" uses |w| of the
// standardized lasso fit at the default lambda.
std::vector<std::pair<std::string, double>> rank_importance(
    const Table& t, const Schema& schema, const std::string& method);

struct StmtError {
  int stmt_index = -1;
  std::string code;    // stable machine code, e.g. zscore_sigma_zero
  std::string detail;

  nlohmann::json to_json() const {
    return {{"stmt_index", stmt_index}, {"code", code}, {"detail", detail}};
  }
};

struct StmtLogEntry {
  int stmt_index = 0;
  std::string text;
  nlohmann::json params;
};

struct FeatureLog {
  std::vector<StmtLogEntry> entries;
  nlohmann::json to_json() const;
};

struct DslResult {
  Table table;
  FeatureLog log;
};

// Applies statements in order against the table. The target column (from the
// schema) is protected from transforms and always retained by selections;
// every other column is treated as a feature. Data-level failures come back
// as a StmtError naming the statement.
std::variant<DslResult, StmtError> execute_program(const FeatureProgram& p,
                                                   const Table& t,
                                                   const Schema& schema);

}  // namespace tabagent
