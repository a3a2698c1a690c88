#include "tabagent/feature_dsl.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tabagent/evaluator.hpp"
#include "tabagent/util.hpp"

namespace tabagent {

bool Expr::operator==(const Expr& other) const {
  return kind == other.kind && name == other.name && value == other.value &&
         args == other.args;
}

bool Stmt::operator==(const Stmt& other) const {
  return kind == other.kind && theta == other.theta && k == other.k &&
         metric == other.metric && column == other.column &&
         gen_name == other.gen_name && expr == other.expr;
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

struct Token {
  enum class Kind { ident, number, symbol, end };
  Kind kind = Kind::end;
  std::string text;
  double number = 0.0;
  bool integral = false;  // number written without '.' or exponent
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    current_ = Token{};
    current_.offset = pos_;
    if (pos_ >= text_.size()) {
      current_.kind = Token::Kind::end;
      return;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      current_.kind = Token::Kind::ident;
      current_.text = text_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      bool integral = true;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '.') {
        integral = false;
        ++pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          ++pos_;
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        integral = false;
        ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
          throw DslParseError(pos_, "malformed number exponent");
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          ++pos_;
      }
      current_.kind = Token::Kind::number;
      current_.text = text_.substr(start, pos_ - start);
      current_.integral = integral;
      if (!parse_double(current_.text, current_.number))
        throw DslParseError(start, "malformed number");
      return;
    }
    static const std::string symbols = ";(),=+-*/";
    if (symbols.find(c) != std::string::npos) {
      current_.kind = Token::Kind::symbol;
      current_.text = std::string(1, c);
      ++pos_;
      return;
    }
    throw DslParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  Token current_;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) {}

  FeatureProgram program() {
    FeatureProgram p;
    p.statements.push_back(statement());
    while (lex_.peek().kind == Token::Kind::symbol && lex_.peek().text == ";") {
      lex_.take();
      p.statements.push_back(statement());
    }
    if (lex_.peek().kind != Token::Kind::end)
      throw DslParseError(lex_.peek().offset, "expected ';' or end of program");
    return p;
  }

 private:
  void expect_symbol(const std::string& s) {
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::symbol || t.text != s)
      throw DslParseError(t.offset, "expected '" + s + "'");
    lex_.take();
  }

  std::string expect_ident() {
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::ident)
      throw DslParseError(t.offset, "expected identifier");
    return lex_.take().text;
  }

  Token expect_number() {
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::number)
      throw DslParseError(t.offset, "expected number");
    return lex_.take();
  }

  long long expect_int(const char* what) {
    Token t = expect_number();
    if (!t.integral)
      throw DslParseError(t.offset, std::string(what) + " must be an integer");
    return static_cast<long long>(t.number);
  }

  Stmt statement() {
    const Token& head = lex_.peek();
    if (head.kind != Token::Kind::ident)
      throw DslParseError(head.offset, "expected statement");
    std::size_t head_offset = head.offset;
    std::string name = lex_.take().text;
    Stmt s;
    expect_symbol("(");
    if (name == "select_mi") {
      s.kind = Stmt::Kind::select_mi;
      s.theta = expect_number().number;
    } else if (name == "select_top") {
      s.kind = Stmt::Kind::select_top;
      Token kt = lex_.peek();
      s.k = expect_int("select_top count");
      if (s.k < 1) throw DslParseError(kt.offset, "select_top count must be >= 1");
      expect_symbol(",");
      Token mt = lex_.peek();
      s.metric = expect_ident();
      if (s.metric != "mi" && s.metric != "lasso_weight")
        throw DslParseError(mt.offset, "unknown metric '" + s.metric + "'");
    } else if (name == "zscore" || name == "log1p" || name == "minmax" ||
               name == "drop") {
      s.kind = name == "zscore"   ? Stmt::Kind::zscore
               : name == "log1p"  ? Stmt::Kind::log1p
               : name == "minmax" ? Stmt::Kind::minmax
                                  : Stmt::Kind::drop;
      s.column = expect_ident();
    } else if (name == "bin") {
      s.kind = Stmt::Kind::bin;
      s.column = expect_ident();
      expect_symbol(",");
      Token kt = lex_.peek();
      s.k = expect_int("bin count");
      if (s.k < 2) throw DslParseError(kt.offset, "bin count must be >= 2");
    } else if (name == "gen") {
      s.kind = Stmt::Kind::gen;
      s.gen_name = expect_ident();
      expect_symbol("=");
      s.expr = expression();
    } else {
      throw DslParseError(head_offset, "unknown statement '" + name + "'");
    }
    expect_symbol(")");
    return s;
  }

  Expr expression() {
    Expr left = term();
    while (lex_.peek().kind == Token::Kind::symbol &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      std::string op = lex_.take().text;
      Expr right = term();
      Expr node;
      node.kind = op == "+" ? Expr::Kind::add : Expr::Kind::sub;
      node.args = {std::move(left), std::move(right)};
      left = std::move(node);
    }
    return left;
  }

  Expr term() {
    Expr left = factor();
    while (lex_.peek().kind == Token::Kind::symbol &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      std::string op = lex_.take().text;
      Expr right = factor();
      Expr node;
      node.kind = op == "*" ? Expr::Kind::mul : Expr::Kind::div;
      node.args = {std::move(left), std::move(right)};
      left = std::move(node);
    }
    return left;
  }

  Expr factor() {
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::number) {
      Expr e;
      e.kind = Expr::Kind::literal;
      e.value = lex_.take().number;
      return e;
    }
    if (t.kind == Token::Kind::symbol && t.text == "(") {
      lex_.take();
      Expr e = expression();
      expect_symbol(")");
      return e;
    }
    if (t.kind == Token::Kind::ident) {
      std::size_t off = t.offset;
      std::string name = lex_.take().text;
      if (lex_.peek().kind == Token::Kind::symbol && lex_.peek().text == "(") {
        static const std::set<std::string> fns = {"log", "sqrt", "abs", "square"};
        if (!fns.count(name))
          throw DslParseError(off, "unknown function '" + name + "'");
        lex_.take();
        Expr e;
        e.kind = Expr::Kind::fn;
        e.name = name;
        e.args.push_back(expression());
        expect_symbol(")");
        return e;
      }
      Expr e;
      e.kind = Expr::Kind::column;
      e.name = name;
      return e;
    }
    throw DslParseError(t.offset, "expected expression");
  }

  Lexer lex_;
};

}  // namespace

FeatureProgram parse_program(const std::string& text) {
  Parser p(text);
  return p.program();
}

namespace {

int precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::add:
    case Expr::Kind::sub: return 1;
    case Expr::Kind::mul:
    case Expr::Kind::div: return 2;
    default: return 3;
  }
}

bool is_binary(Expr::Kind k) {
  return k == Expr::Kind::add || k == Expr::Kind::sub || k == Expr::Kind::mul ||
         k == Expr::Kind::div;
}

void render_expr_into(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::column: out += e.name; return;
    case Expr::Kind::literal: out += format_double(e.value); return;
    case Expr::Kind::fn:
      out += e.name;
      out += '(';
      render_expr_into(e.args[0], out);
      out += ')';
      return;
    default: break;
  }
  const char* op = e.kind == Expr::Kind::add   ? " + "
                   : e.kind == Expr::Kind::sub ? " - "
                   : e.kind == Expr::Kind::mul ? " * "
                                               : " / ";
  int prec = precedence(e.kind);
  const Expr& lhs = e.args[0];
  const Expr& rhs = e.args[1];
  bool lparen = is_binary(lhs.kind) && precedence(lhs.kind) < prec;
  bool rparen = is_binary(rhs.kind) &&
                (precedence(rhs.kind) < prec ||
                 (precedence(rhs.kind) == prec &&
                  (e.kind == Expr::Kind::sub || e.kind == Expr::Kind::div)));
  if (lparen) out += '(';
  render_expr_into(lhs, out);
  if (lparen) out += ')';
  out += op;
  if (rparen) out += '(';
  render_expr_into(rhs, out);
  if (rparen) out += ')';
}

}  // namespace

std::string render_expr(const Expr& e) {
  std::string out;
  render_expr_into(e, out);
  return out;
}

std::string render_stmt(const Stmt& s) {
  switch (s.kind) {
    case Stmt::Kind::select_mi: return "select_mi(" + format_double(s.theta) + ")";
    case Stmt::Kind::select_top:
      return "select_top(" + std::to_string(s.k) + ", " + s.metric + ")";
    case Stmt::Kind::zscore: return "zscore(" + s.column + ")";
    case Stmt::Kind::log1p: return "log1p(" + s.column + ")";
    case Stmt::Kind::minmax: return "minmax(" + s.column + ")";
    case Stmt::Kind::bin:
      return "bin(" + s.column + ", " + std::to_string(s.k) + ")";
    case Stmt::Kind::gen:
      return "gen(" + s.gen_name + " = " + render_expr(s.expr) + ")";
    case Stmt::Kind::drop: return "drop(" + s.column + ")";
  }
  return "";
}

std::string render_program(const FeatureProgram& p) {
  std::string out;
  for (std::size_t i = 0; i < p.statements.size(); ++i) {
    if (i) out += "; ";
    out += render_stmt(p.statements[i]);
  }
  return out;
}

void collect_columns(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::column) out.push_back(e.name);
  for (const auto& a : e.args) collect_columns(a, out);
}

// ---------------------------------------------------------------------------
// Mutual information

namespace {

// Rank-based equal-frequency discretization: every distinct value maps to
// floor(first_sorted_rank * n_bins / n), so equal values always share a bin
// and the mapping is monotone.
std::vector<int> discretize(const Column& c, int n_bins) {
  const std::size_t n = c.size();
  std::vector<int> symbols(n);
  if (c.kind() == ColumnKind::numeric) {
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = c.num_at(i);
    std::sort(sorted.begin(), sorted.end());
    std::map<double, int> bin_of;
    for (std::size_t r = 0; r < n; ++r) {
      double v = sorted[r];
      if (!bin_of.count(v)) {
        int b = static_cast<int>(r * static_cast<std::size_t>(n_bins) / n);
        if (b >= n_bins) b = n_bins - 1;
        bin_of[v] = b;
      }
    }
    for (std::size_t i = 0; i < n; ++i) symbols[i] = bin_of[c.num_at(i)];
  } else {
    std::map<std::string, int> id_of;
    for (std::size_t i = 0; i < n; ++i) id_of.emplace(c.cell_text(i), 0);
    int next = 0;
    for (auto& [v, id] : id_of) id = next++;
    for (std::size_t i = 0; i < n; ++i) symbols[i] = id_of[c.cell_text(i)];
  }
  return symbols;
}

}  // namespace

double mutual_information(const Column& x, const Column& y, int n_bins) {
  if (x.size() != y.size())
    throw std::invalid_argument("mutual_information: length mismatch");
  if (x.size() == 0) throw std::invalid_argument("mutual_information: empty columns");
  if (n_bins < 1) throw std::invalid_argument("mutual_information: n_bins >= 1");
  if (x.missing_count() > 0 || y.missing_count() > 0)
    throw std::invalid_argument("mutual_information: missing cells present");

  const std::size_t n = x.size();
  std::vector<int> xs = discretize(x, n_bins);
  std::vector<int> ys = discretize(y, n_bins);

  std::map<std::pair<int, int>, std::size_t> joint;
  std::map<int, std::size_t> mx, my;
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[{xs[i], ys[i]}];
    ++mx[xs[i]];
    ++my[ys[i]];
  }
  double mi = 0;
  const double dn = static_cast<double>(n);
  for (const auto& [cell, count] : joint) {
    double pxy = count / dn;
    double px = mx[cell.first] / dn;
    double py = my[cell.second] / dn;
    mi += pxy * std::log2(pxy / (px * py));
  }
  return mi;
}

std::vector<std::pair<std::string, double>> rank_importance(
    const Table& t, const Schema& schema, const std::string& method) {
  auto target = schema.target_name();
  if (!target) throw std::invalid_argument("rank_importance: schema has no target");
  const Column& y = t.col(*target);

  std::vector<std::string> names;
  for (std::size_t i = 0; i < t.n_cols(); ++i) {
    if (t.name_at(i) == *target) continue;
    if (t.col_at(i).kind() != ColumnKind::numeric)
      throw std::invalid_argument("rank_importance: non-numeric feature '" +
                                  t.name_at(i) + "'");
    names.push_back(t.name_at(i));
  }

  std::vector<std::pair<std::string, double>> scored;
  if (method == "mi") {
    for (const auto& name : names)
      scored.emplace_back(name, mutual_information(t.col(name), y, kMiBins));
  } else if (method == "lasso_weight") {
    Mat X;
    for (const auto& name : names) {
      const Column& c = t.col(name);
      std::vector<double> col(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) col[i] = c.num_at(i);
      X.push_back(std::move(col));
    }
    std::vector<double> yv(y.size());
    if (y.kind() == ColumnKind::numeric) {
      for (std::size_t i = 0; i < y.size(); ++i) yv[i] = y.num_at(i);
    } else {
      std::map<std::string, int> ids;
      for (std::size_t i = 0; i < y.size(); ++i) ids.emplace(y.cell_text(i), 0);
      int next = 0;
      for (auto& [v, id] : ids) id = next++;
      for (std::size_t i = 0; i < y.size(); ++i) yv[i] = ids[y.cell_text(i)];
    }
    LassoFit fit = fit_lasso(X, yv, kDefaultLassoLambda);
    // score by standardized-weight magnitude so scales are comparable
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& col = X[j];
      double mu = 0;
      for (double v : col) mu += v;
      mu /= col.size();
      double ss = 0;
      for (double v : col) ss += (v - mu) * (v - mu);
      double sigma = std::sqrt(ss / col.size());
      scored.emplace_back(names[j], std::fabs(fit.weights[j]) * sigma);
    }
  } else {
    throw std::invalid_argument("rank_importance: unknown method '" + method + "'");
  }

  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return scored;
}

// ---------------------------------------------------------------------------
// Execution

nlohmann::json FeatureLog::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries)
    arr.push_back({{"stmt_index", e.stmt_index}, {"text", e.text}, {"params", e.params}});
  return arr;
}

namespace {

struct CellEvalError {
  std::string code;
  std::string detail;
};

double eval_expr(const Expr& e, const Table& t, std::size_t row,
                 std::optional<CellEvalError>& err) {
  if (err) return 0.0;
  switch (e.kind) {
    case Expr::Kind::column: return t.col(e.name).num_at(row);
    case Expr::Kind::literal: return e.value;
    case Expr::Kind::add:
      return eval_expr(e.args[0], t, row, err) + eval_expr(e.args[1], t, row, err);
    case Expr::Kind::sub:
      return eval_expr(e.args[0], t, row, err) - eval_expr(e.args[1], t, row, err);
    case Expr::Kind::mul:
      return eval_expr(e.args[0], t, row, err) * eval_expr(e.args[1], t, row, err);
    case Expr::Kind::div: {
      double a = eval_expr(e.args[0], t, row, err);
      double b = eval_expr(e.args[1], t, row, err);
      if (!err && b == 0.0)
        err = CellEvalError{"division_by_zero",
                            "division by zero at row " + std::to_string(row)};
      return err ? 0.0 : a / b;
    }
    case Expr::Kind::fn: {
      double a = eval_expr(e.args[0], t, row, err);
      if (err) return 0.0;
      if (e.name == "log") {
        if (a <= 0.0) {
          err = CellEvalError{"domain_error",
                              "log of non-positive value at row " + std::to_string(row)};
          return 0.0;
        }
        return std::log(a);
      }
      if (e.name == "sqrt") {
        if (a < 0.0) {
          err = CellEvalError{"domain_error",
                              "sqrt of negative value at row " + std::to_string(row)};
          return 0.0;
        }
        return std::sqrt(a);
      }
      if (e.name == "abs") return std::fabs(a);
      return a * a;  // square
    }
  }
  return 0.0;
}

}  // namespace

std::variant<DslResult, StmtError> execute_program(const FeatureProgram& p,
                                                   const Table& t,
                                                   const Schema& schema) {
  Table table = t;
  FeatureLog log;
  auto target = schema.target_name();

  auto make_error = [](int idx, const std::string& code, const std::string& detail) {
    return StmtError{idx, code, detail};
  };

  // a transform reference is valid when the column is present and numeric
  auto check_ref = [&](int idx, const std::string& col, bool allow_any_kind)
      -> std::optional<StmtError> {
    if (target && col == *target)
      return make_error(idx, "target_reference",
                        "target column '" + col + "' referenced by transform");
    if (!table.has_column(col)) {
      if (schema.find(col) != nullptr)
        return make_error(idx, "column_not_retained",
                          "column '" + col + "' was removed by an earlier statement");
      return make_error(idx, "unknown_column", "unknown column '" + col + "'");
    }
    if (!allow_any_kind && table.col(col).kind() != ColumnKind::numeric)
      return make_error(idx, "kind_mismatch",
                        "column '" + col + "' is not numeric");
    return std::nullopt;
  };

  auto feature_names_now = [&]() {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < table.n_cols(); ++i)
      if (!target || table.name_at(i) != *target) out.push_back(table.name_at(i));
    return out;
  };

  for (std::size_t si = 0; si < p.statements.size(); ++si) {
    const Stmt& s = p.statements[si];
    const int idx = static_cast<int>(si);
    StmtLogEntry entry;
    entry.stmt_index = idx;
    entry.text = render_stmt(s);
    entry.params = nlohmann::json::object();

    switch (s.kind) {
      case Stmt::Kind::select_mi:
      case Stmt::Kind::select_top: {
        if (!target || !table.has_column(*target))
          return make_error(idx, "target_required",
                            "selection requires a target column");
        auto features = feature_names_now();
        for (const auto& name : features) {
          if (table.col(name).kind() != ColumnKind::numeric)
            return make_error(idx, "kind_mismatch",
                              "column '" + name + "' is not numeric");
        }
        std::vector<std::string> retained;
        nlohmann::json scores = nlohmann::json::object();
        if (s.kind == Stmt::Kind::select_mi) {
          const Column& y = table.col(*target);
          for (const auto& name : features) {
            double mi = mutual_information(table.col(name), y, kMiBins);
            scores[name] = mi;
            if (mi > s.theta) retained.push_back(name);
          }
          entry.params["theta"] = s.theta;
        } else {
          auto ranked = rank_importance(table, schema, s.metric);
          std::size_t keep = std::min<std::size_t>(s.k, ranked.size());
          for (std::size_t i = 0; i < keep; ++i) retained.push_back(ranked[i].first);
          std::sort(retained.begin(), retained.end());
          for (const auto& [name, score] : ranked) scores[name] = score;
          entry.params["k"] = s.k;
          entry.params["metric"] = s.metric;
        }
        if (retained.empty())
          return make_error(idx, "empty_selection",
                            "selection retained no feature columns");
        entry.params["scores"] = scores;
        entry.params["retained"] = retained;
        std::vector<std::string> keep = retained;
        keep.push_back(*target);
        table = table.select_columns(keep);
        break;
      }
      case Stmt::Kind::zscore: {
        if (auto err = check_ref(idx, s.column, false)) return *err;
        const Column& c = table.col(s.column);
        double mu = 0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) {
            mu += c.num_at(i);
            ++n;
          }
        if (n == 0)
          return make_error(idx, "zscore_sigma_zero", "column '" + s.column + "' empty");
        mu /= n;
        double ss = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) ss += (c.num_at(i) - mu) * (c.num_at(i) - mu);
        double sigma = std::sqrt(ss / n);
        if (sigma == 0.0)
          return make_error(idx, "zscore_sigma_zero",
                            "column '" + s.column + "' has zero variance");
        std::vector<double> v(c.size());
        std::vector<std::uint8_t> miss(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
          miss[i] = c.missing_at(i);
          v[i] = miss[i] ? 0.0 : (c.num_at(i) - mu) / sigma;
        }
        table = table.replace_column(s.column,
                                     Column::numeric(std::move(v), std::move(miss)));
        entry.params["mu"] = mu;
        entry.params["sigma"] = sigma;
        break;
      }
      case Stmt::Kind::log1p: {
        if (auto err = check_ref(idx, s.column, false)) return *err;
        const Column& c = table.col(s.column);
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i) && c.num_at(i) < 0)
            return make_error(idx, "log1p_negative",
                              "column '" + s.column + "' has negative value at row " +
                                  std::to_string(i));
        std::vector<double> v(c.size());
        std::vector<std::uint8_t> miss(c.size());
        double minv = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c.size(); ++i) {
          miss[i] = c.missing_at(i);
          if (!miss[i]) {
            minv = std::min(minv, c.num_at(i));
            v[i] = std::log1p(c.num_at(i));
          }
        }
        table = table.replace_column(s.column,
                                     Column::numeric(std::move(v), std::move(miss)));
        entry.params["min"] = std::isfinite(minv) ? minv : 0.0;
        break;
      }
      case Stmt::Kind::minmax: {
        if (auto err = check_ref(idx, s.column, false)) return *err;
        const Column& c = table.col(s.column);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) {
            lo = std::min(lo, c.num_at(i));
            hi = std::max(hi, c.num_at(i));
          }
        if (!(hi > lo))
          return make_error(idx, "minmax_degenerate",
                            "column '" + s.column + "' has min == max");
        std::vector<double> v(c.size());
        std::vector<std::uint8_t> miss(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
          miss[i] = c.missing_at(i);
          v[i] = miss[i] ? 0.0 : (c.num_at(i) - lo) / (hi - lo);
        }
        table = table.replace_column(s.column,
                                     Column::numeric(std::move(v), std::move(miss)));
        entry.params["min"] = lo;
        entry.params["max"] = hi;
        break;
      }
      case Stmt::Kind::bin: {
        if (auto err = check_ref(idx, s.column, false)) return *err;
        const Column& c = table.col(s.column);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!c.missing_at(i)) {
            lo = std::min(lo, c.num_at(i));
            hi = std::max(hi, c.num_at(i));
          }
        const long long k = s.k;
        std::vector<double> v(c.size());
        std::vector<std::uint8_t> miss(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
          miss[i] = c.missing_at(i);
          if (miss[i]) continue;
          long long label = 0;
          if (hi > lo) {
            // equal-width bins over [min, max]; last bin right-closed
            label = static_cast<long long>(
                std::floor((c.num_at(i) - lo) * k / (hi - lo)));
            if (label < 0) label = 0;
            if (label > k - 1) label = k - 1;
          }
          v[i] = static_cast<double>(label);
        }
        table = table.replace_column(s.column,
                                     Column::numeric(std::move(v), std::move(miss)));
        nlohmann::json edges = nlohmann::json::array();
        if (hi > lo)
          for (long long e = 0; e <= k; ++e) edges.push_back(lo + (hi - lo) * e / k);
        entry.params["k"] = k;
        entry.params["edges"] = edges;
        break;
      }
      case Stmt::Kind::gen: {
        if (table.has_column(s.gen_name))
          return make_error(idx, "name_collision",
                            "column '" + s.gen_name + "' already exists");
        std::vector<std::string> refs;
        collect_columns(s.expr, refs);
        for (const auto& r : refs)
          if (auto err = check_ref(idx, r, false)) return *err;
        const std::size_t n = table.n_rows();
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::optional<CellEvalError> err;
          double x = eval_expr(s.expr, table, i, err);
          if (err) return make_error(idx, err->code, err->detail);
          if (!std::isfinite(x))
            return make_error(idx, "domain_error",
                              "non-finite result at row " + std::to_string(i));
          v[i] = x;
        }
        table = table.with_column(s.gen_name, Column::numeric(std::move(v)));
        entry.params["name"] = s.gen_name;
        entry.params["expr"] = render_expr(s.expr);
        break;
      }
      case Stmt::Kind::drop: {
        if (target && s.column == *target)
          return make_error(idx, "target_reference",
                            "target column '" + s.column + "' referenced by drop");
        if (!table.has_column(s.column)) {
          if (schema.find(s.column) != nullptr)
            return make_error(idx, "column_not_retained",
                              "column '" + s.column +
                                  "' was removed by an earlier statement");
          return make_error(idx, "unknown_column",
                            "unknown column '" + s.column + "'");
        }
        table = table.without_column(s.column);
        break;
      }
    }
    log.entries.push_back(std::move(entry));
  }
  return DslResult{std::move(table), std::move(log)};
}

}  // namespace tabagent
