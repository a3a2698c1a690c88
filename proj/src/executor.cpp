#include "tabagent/executor.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "tabagent/grounding.hpp"
#include "tabagent/util.hpp"

namespace tabagent {

std::string action_kind(const Action& a) {
  if (std::holds_alternative<ToolCallAction>(a)) return "tool_call";
  if (std::holds_alternative<SymbolicAction>(a)) return "symbolic";
  return "direct_gen";
}

std::string action_summary(const Action& a) {
  if (const auto* t = std::get_if<ToolCallAction>(&a))
    return t->to_json().dump();
  if (const auto* s = std::get_if<SymbolicAction>(&a))
    return render_program(s->program);
  return std::get<DirectGenAction>(a).text;
}

// ---------------------------------------------------------------------------
// Registry

ToolRegistry ToolRegistry::with_builtins() {
  ToolRegistry r;
  auto col = [](const std::string& name, bool required,
                std::optional<ColumnKind> kind = std::nullopt) {
    return ToolParam{name, "column_name", required, kind};
  };
  r.register_tool({"profile", {}, "pure", "profile the working table"});
  r.register_tool({"export_csv",
                   {{"path", "path", true, std::nullopt}},
                   "writes_file",
                   "write the working table as CSV"});
  r.register_tool({"chart_spec",
                   {{"kind", "string", true, std::nullopt},
                    col("column", false, ColumnKind::numeric),
                    {"bins", "int", false, std::nullopt},
                    {"title", "string", false, std::nullopt}},
                   "pure",
                   "emit a line/bar/histogram chart spec"});
  r.register_tool({"gaussian_noise",
                   {col("column", true, ColumnKind::numeric),
                    {"sigma", "float", true, std::nullopt}},
                   "writes_state",
                   "perturb a numeric column with seeded gaussian noise"});
  r.register_tool({"weekly_anomaly_flag",
                   {col("column", false, ColumnKind::numeric),
                    {"values", "number_list", false, std::nullopt},
                    {"threshold", "float", false, std::nullopt}},
                   "pure",
                   "flag week-over-week drops greater than the threshold"});
  r.register_tool({"evaluate",
                   {{"model", "string", false, std::nullopt},
                    {"k_folds", "int", false, std::nullopt}},
                   "pure",
                   "cross-validated downstream metric on the working table"});
  r.register_tool({"clean",
                   {{"outlier_clip", "int", false, std::nullopt},
                    {"one_hot_max_card", "int", false, std::nullopt},
                    {"drop_missing_threshold", "float", false, std::nullopt}},
                   "writes_state",
                   "rule-based cleaning pass over the working table"});
  r.register_tool({"finish", {}, "pure", "terminal no-op"});
  // aliases matching the tool-call shapes the plan format uses
  r.register_tool({"matplotlib.hist",
                   {{"data", "column_name", true, ColumnKind::numeric},
                    {"bins", "int", false, std::nullopt}},
                   "pure",
                   "histogram chart spec (alias of chart_spec kind=histogram)"});
  r.register_tool({"file.export_csv",
                   {{"path", "path", true, std::nullopt},
                    {"data", "string", false, std::nullopt}},
                   "writes_file",
                   "alias of export_csv"});
  return r;
}

void ToolRegistry::register_tool(ToolSpec spec, UserToolFn fn) {
  std::string name = spec.name;
  specs_[name] = std::move(spec);
  if (fn) user_fns_[name] = std::move(fn);
}

bool ToolRegistry::remove_tool(const std::string& name) {
  user_fns_.erase(name);
  return specs_.erase(name) > 0;
}

const ToolSpec* ToolRegistry::find(const std::string& name) const {
  auto it = specs_.find(name);
  return it == specs_.end() ? nullptr : &it->second;
}

const UserToolFn* ToolRegistry::user_fn(const std::string& name) const {
  auto it = user_fns_.find(name);
  return it == user_fns_.end() ? nullptr : &it->second;
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : specs_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Tools

std::vector<std::size_t> histogram_counts(const std::vector<double>& values,
                                          int bins, double& lo_out, double& hi_out) {
  std::vector<std::size_t> counts(bins, 0);
  if (values.empty() || bins < 1) return counts;
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  lo_out = lo;
  hi_out = hi;
  for (double v : values) {
    long long label = 0;
    if (hi > lo) {
      label = static_cast<long long>(std::floor((v - lo) * bins / (hi - lo)));
      if (label < 0) label = 0;
      if (label > bins - 1) label = bins - 1;
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

std::string now_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

ToolResult tool_error(const std::string& code, const std::string& detail) {
  ToolResult r;
  r.ok = false;
  r.error_code = code;
  r.error_detail = detail;
  return r;
}

ToolResult run_profile(const RunState& state) {
  ToolResult r;
  auto profiles = profile(state.table, state.schema);
  r.result = profiles_to_json(profiles);
  r.blobs.emplace_back("profiles", r.result);
  return r;
}

ToolResult run_export_csv(const nlohmann::json& args, const RunState& state,
                          bool allow_writes) {
  ToolResult r;
  std::string rel = args.at("path").get<std::string>();
  std::string csv = render_csv(state.table);
  Fnv1a h;
  h.update(csv);
  r.result = {{"path", rel},
              {"rows", state.table.n_rows()},
              {"checksum", h.hex()}};
  if (allow_writes && !state.out_dir.empty()) {
    std::filesystem::path full = std::filesystem::path(state.out_dir) / rel;
    std::error_code ec;
    std::filesystem::create_directories(full.parent_path(), ec);
    std::ofstream out(full, std::ios::binary);
    if (!out) return tool_error("io_error", "cannot write " + full.string());
    out << csv;
    if (!out) return tool_error("io_error", "write failed " + full.string());
    r.files.emplace_back("export:" + rel, rel);
  } else {
    r.blobs.emplace_back("export:" + rel, nlohmann::json{{"csv_rows", state.table.n_rows()}});
  }
  return r;
}

ToolResult run_chart_spec(const nlohmann::json& args, const RunState& state,
                          int step_number) {
  ToolResult r;
  std::string kind = args.value("kind", "histogram");
  std::string title = args.value("title", "");
  nlohmann::json spec{{"kind", kind}, {"title", title}};
  if (kind == "histogram") {
    std::string column = args.contains("column") ? args["column"].get<std::string>()
                                                 : args.value("data", "");
    if (column.empty() || !state.table.has_column(column))
      return tool_error("unknown_column", "histogram needs a valid column");
    const Column& c = state.table.col(column);
    if (c.kind() != ColumnKind::numeric)
      return tool_error("kind_mismatch", "histogram column must be numeric");
    int bins = args.value("bins", 10);
    if (bins < 1) return tool_error("bad_argument", "bins must be >= 1");
    std::vector<double> vals;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!c.missing_at(i)) vals.push_back(c.num_at(i));
    double lo = 0, hi = 0;
    auto counts = histogram_counts(vals, bins, lo, hi);
    nlohmann::json series = nlohmann::json::array();
    for (auto n : counts) series.push_back(n);
    spec["series"] = {{"name", column}, {"values", series}};
    spec["min"] = lo;
    spec["max"] = hi;
    spec["bins"] = bins;
    if (title.empty()) spec["title"] = "histogram of " + column;
  } else if (kind == "line" || kind == "bar") {
    std::string column = args.value("column", "");
    std::vector<double> vals;
    if (!column.empty()) {
      if (!state.table.has_column(column))
        return tool_error("unknown_column", "no such column " + column);
      const Column& c = state.table.col(column);
      if (c.kind() != ColumnKind::numeric)
        return tool_error("kind_mismatch", "chart column must be numeric");
      for (std::size_t i = 0; i < c.size(); ++i)
        if (!c.missing_at(i)) vals.push_back(c.num_at(i));
    } else if (args.contains("values")) {
      for (const auto& v : args["values"]) vals.push_back(v.get<double>());
    }
    if (vals.empty()) return tool_error("bad_argument", "chart has no data");
    nlohmann::json series = nlohmann::json::array();
    for (double v : vals) series.push_back(v);
    spec["series"] = {{"name", column.empty() ? "series" : column}, {"values", series}};
    if (title.empty()) spec["title"] = kind + " chart";
  } else {
    return tool_error("bad_argument", "unknown chart kind '" + kind + "'");
  }
  r.result = spec;
  r.blobs.emplace_back("chart:" + std::to_string(step_number), spec);
  return r;
}

ToolResult run_gaussian_noise(const nlohmann::json& args, const RunState& state,
                              int step_number) {
  std::string column = args.at("column").get<std::string>();
  double sigma = args.at("sigma").get<double>();
  if (!state.table.has_column(column))
    return tool_error("unknown_column", "no such column " + column);
  const Column& c = state.table.col(column);
  if (c.kind() != ColumnKind::numeric)
    return tool_error("kind_mismatch", "gaussian_noise column must be numeric");
  if (sigma < 0) return tool_error("bad_argument", "sigma must be >= 0");
  Rng rng(sub_seed(state.seed, step_number));
  std::vector<double> v(c.size());
  std::vector<std::uint8_t> miss(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    miss[i] = c.missing_at(i);
    v[i] = miss[i] ? 0.0 : c.num_at(i) + sigma * rng.next_gauss();
  }
  ToolResult r;
  r.table = state.table.replace_column(column,
                                       Column::numeric(std::move(v), std::move(miss)));
  r.result = {{"column", column}, {"sigma", sigma}, {"cells", c.size()}};
  return r;
}

ToolResult run_weekly_anomaly_flag(const nlohmann::json& args,
                                   const RunState& state) {
  double threshold = args.value("threshold", 0.2);
  std::vector<double> values;
  if (args.contains("values")) {
    for (const auto& v : args["values"]) values.push_back(v.get<double>());
  } else if (args.contains("column")) {
    std::string column = args["column"].get<std::string>();
    if (!state.table.has_column(column))
      return tool_error("unknown_column", "no such column " + column);
    const Column& c = state.table.col(column);
    if (c.kind() != ColumnKind::numeric)
      return tool_error("kind_mismatch", "weekly_anomaly_flag column must be numeric");
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!c.missing_at(i)) values.push_back(c.num_at(i));
  } else {
    return tool_error("bad_argument", "needs 'column' or 'values'");
  }
  nlohmann::json flags = nlohmann::json::array();
  for (std::size_t i = 1; i < values.size(); ++i) {
    double prev = values[i - 1];
    if (prev == 0) continue;
    double drop = (prev - values[i]) / prev;
    if (drop > threshold) flags.push_back(i);
  }
  ToolResult r;
  r.result = {{"flags", flags}, {"threshold", threshold}, {"n", values.size()}};
  return r;
}

ToolResult run_evaluate(const nlohmann::json& args, const RunState& state) {
  std::string model_name = args.value("model", "");
  int k_folds = args.value("k_folds", 5);
  std::unique_ptr<DownstreamModel> model;
  if (model_name == "external" || model_name.rfind("external:", 0) == 0) {
    std::string key = model_name == "external" ? state.external_model_name
                                               : model_name.substr(9);
    if (!state.external_models || !state.external_models->count(key))
      return tool_error("unknown_model", "no external predictor '" + key + "'");
    model = state.external_models->at(key)();
  } else if (model_name == "lasso") {
    model = make_lasso_model();
  } else if (model_name == "logistic") {
    model = make_logistic_model();
  } else if (model_name.empty()) {
    model = state.task_kind == "classification" ? make_logistic_model()
                                                : make_lasso_model();
  } else {
    return tool_error("unknown_model", "unknown model '" + model_name + "'");
  }
  try {
    MetricResult m = cross_validate(state.table, state.schema, *model, k_folds,
                                    state.seed);
    ToolResult r;
    r.result = m.to_json();
    r.metric = m;
    r.blobs.emplace_back("metric", r.result);
    return r;
  } catch (const SingleClassError& e) {
    return tool_error("single_class_fold", e.what());
  } catch (const std::invalid_argument& e) {
    return tool_error("evaluate_error", e.what());
  }
}

ToolResult run_clean(const nlohmann::json& args, const RunState& state) {
  CleaningConfig config;
  config.outlier_clip = args.value("outlier_clip", 0) != 0;
  config.one_hot_max_card = args.value("one_hot_max_card", 15);
  config.drop_missing_threshold = args.value("drop_missing_threshold", 0.5);
  auto profiles = profile(state.table, state.schema);
  auto actions = plan_cleaning(profiles, state.schema, config);
  CleanResult res = apply_cleaning(state.table, state.schema, actions);
  ToolResult r;
  r.result = res.report.to_json();
  r.table = std::move(res.table);
  r.schema = std::move(res.schema);
  r.blobs.emplace_back("cleaning_report", r.result);
  return r;
}

}  // namespace

ToolResult invoke_tool(const std::string& name, const nlohmann::json& args,
                       const RunState& state, const ToolRegistry& registry,
                       int step_number, bool allow_writes) {
  const ToolSpec* spec = registry.find(name);
  if (!spec) return tool_error("unknown_tool", "tool '" + name + "' not registered");
  if (const UserToolFn* fn = registry.user_fn(name)) {
    try {
      UserToolResult ur = (*fn)(args, state.table);
      ToolResult r;
      r.result = std::move(ur.result);
      if (ur.table) r.table = std::move(ur.table);
      return r;
    } catch (const std::exception& e) {
      return tool_error("tool_runtime_error", e.what());
    }
  }
  try {
    if (name == "profile") return run_profile(state);
    if (name == "export_csv") return run_export_csv(args, state, allow_writes);
    if (name == "file.export_csv") return run_export_csv(args, state, allow_writes);
    if (name == "chart_spec") return run_chart_spec(args, state, step_number);
    if (name == "matplotlib.hist") {
      nlohmann::json mapped{{"kind", "histogram"}};
      if (args.contains("data")) mapped["column"] = args["data"];
      if (args.contains("bins")) mapped["bins"] = args["bins"];
      return run_chart_spec(mapped, state, step_number);
    }
    if (name == "gaussian_noise") return run_gaussian_noise(args, state, step_number);
    if (name == "weekly_anomaly_flag") return run_weekly_anomaly_flag(args, state);
    if (name == "evaluate") return run_evaluate(args, state);
    if (name == "clean") return run_clean(args, state);
    if (name == "finish") {
      ToolResult r;
      r.result = {{"finished", true}};
      return r;
    }
  } catch (const std::exception& e) {
    return tool_error("tool_runtime_error", e.what());
  }
  return tool_error("unknown_tool", "tool '" + name + "' has no executor");
}

// ---------------------------------------------------------------------------
// Step execution

nlohmann::json ExecRecord::to_json() const {
  nlohmann::json j{{"step", step},
                   {"action_kind", action_kind},
                   {"summary", summary},
                   {"started_at", started_at},
                   {"elapsed_sec", elapsed_sec},
                   {"ok", ok},
                   {"state_delta", state_delta}};
  if (!ok) {
    j["error_code"] = error_code;
    j["error_detail"] = error_detail;
  }
  if (!artifacts.empty()) j["artifacts"] = artifacts;
  if (!detail.is_null()) j["detail"] = detail;
  return j;
}

namespace {

Schema schema_from_table(const Table& t, const std::optional<std::string>& target) {
  std::vector<ColumnSpec> specs;
  for (std::size_t i = 0; i < t.n_cols(); ++i) {
    ColumnSpec s;
    s.name = t.name_at(i);
    s.kind = t.col_at(i).kind();
    s.nullable = t.col_at(i).missing_count() > 0;
    s.role = (target && s.name == *target) ? ColumnRole::target : ColumnRole::feature;
    specs.push_back(std::move(s));
  }
  return Schema(std::move(specs));
}

}  // namespace

RunState execute_step(const GroundedStep& g, const RunState& state,
                      const ToolRegistry& registry) {
  auto t0 = std::chrono::steady_clock::now();
  ExecRecord record;
  record.step = g.source().step;
  record.action_kind = action_kind(g.action());
  record.summary = action_summary(g.action());
  record.started_at = now_timestamp();

  RunState next = state;
  bool is_tool = std::holds_alternative<ToolCallAction>(g.action());
  const std::size_t rows_before = state.table.n_rows();
  const std::size_t cols_before = state.table.n_cols();

  if (const auto* sym = std::get_if<SymbolicAction>(&g.action())) {
    auto outcome = execute_program(sym->program, state.table, state.schema);
    if (const auto* err = std::get_if<StmtError>(&outcome)) {
      record.ok = false;
      record.error_code = err->code;
      record.error_detail = err->detail;
      record.detail = err->to_json();
    } else {
      auto& res = std::get<DslResult>(outcome);
      next.table = std::move(res.table);
      next.schema = schema_from_table(next.table, state.schema.target_name());
      record.detail = res.log.to_json();
    }
  } else if (const auto* tc = std::get_if<ToolCallAction>(&g.action())) {
    ToolResult r = invoke_tool(tc->tool, tc->args, state, registry,
                               g.source().step, /*allow_writes=*/true);
    if (!r.ok) {
      record.ok = false;
      record.error_code = r.error_code;
      record.error_detail = r.error_detail;
    } else {
      if (r.table) {
        next.table = std::move(*r.table);
        next.schema = r.schema ? std::move(*r.schema)
                               : schema_from_table(next.table,
                                                   state.schema.target_name());
      }
      if (r.metric) next.metric = r.metric;
      for (auto& [bname, blob] : r.blobs) {
        next.artifact_blobs[bname] = std::move(blob);
        record.artifacts.push_back(bname);
      }
      for (auto& [fname, path] : r.files) {
        next.artifact_files[fname] = path;
        record.artifacts.push_back(path);
      }
      record.detail = r.result;
    }
  } else {
    const auto& dg = std::get<DirectGenAction>(g.action());
    record.detail = {{"text", dg.text}};
  }

  auto t1 = std::chrono::steady_clock::now();
  record.elapsed_sec = std::chrono::duration<double>(t1 - t0).count();
  if (record.ok && record.elapsed_sec > state.step_time_budget_sec) {
    record.ok = false;
    record.error_code = "timeout";
    record.error_detail = "step exceeded " +
                          format_double(state.step_time_budget_sec) + " s budget";
  }

  if (!record.ok) {
    // atomic step: failed steps leave everything but the record untouched
    RunState unchanged = state;
    record.state_delta = "none";
    if (is_tool) ++unchanged.tool_calls;
    unchanged.records.push_back(std::move(record));
    return unchanged;
  }

  record.state_delta = "rows " + std::to_string(rows_before) + "->" +
                       std::to_string(next.table.n_rows()) + ", cols " +
                       std::to_string(cols_before) + "->" +
                       std::to_string(next.table.n_cols());
  if (is_tool) ++next.tool_calls;
  next.records.push_back(std::move(record));
  return next;
}

// ---------------------------------------------------------------------------
// Trajectories

nlohmann::json TrajectoryEntry::to_json() const {
  nlohmann::json j{{"task_signature", task_signature},
                   {"plan", plan},
                   {"step_outcomes", step_outcomes},
                   {"metric_kind", metric_kind},
                   {"seed", seed},
                   {"timestamp", timestamp},
                   {"profile_vector", profile_vector}};
  if (final_metric) j["final_metric"] = *final_metric;
  return j;
}

TrajectoryEntry TrajectoryEntry::from_json(const nlohmann::json& j) {
  TrajectoryEntry e;
  e.task_signature = j.at("task_signature").get<std::string>();
  e.plan = j.at("plan");
  e.step_outcomes = j.value("step_outcomes", nlohmann::json::array());
  if (j.contains("final_metric")) e.final_metric = j["final_metric"].get<double>();
  e.metric_kind = j.value("metric_kind", "");
  e.seed = j.value("seed", std::uint64_t{0});
  e.timestamp = j.value("timestamp", "");
  e.profile_vector = j.value("profile_vector", std::vector<double>{});
  return e;
}

std::vector<double> profile_feature_vector(
    const DatasetCard& card, const std::vector<ColumnProfile>& profiles) {
  double n_numeric = 0, n_categorical = 0, n_features = 0, missing_sum = 0;
  for (const auto& p : profiles) {
    if (p.name == card.target) continue;
    ++n_features;
    if (p.kind == ColumnKind::numeric) ++n_numeric;
    else ++n_categorical;
    missing_sum += p.missing_ratio;
  }
  double frac_numeric = n_features > 0 ? n_numeric / n_features : 0.0;
  double frac_categorical = n_features > 0 ? n_categorical / n_features : 0.0;
  double mean_missing = n_features > 0 ? missing_sum / n_features : 0.0;
  return {std::log(std::max<double>(1, card.n_rows)),
          std::log(static_cast<double>(card.n_features) + 1),
          frac_numeric,
          frac_categorical,
          mean_missing,
          card.task_kind == "classification" ? 1.0 : 0.0,
          card.task_kind == "regression" ? 1.0 : 0.0};
}

std::string task_signature(const DatasetCard& card, const std::string& instruction) {
  Fnv1a h;
  h.update(card.to_json().dump());
  h.update("\x1f", 1);
  h.update(instruction);
  return h.hex();
}

void record_trajectory(const TrajectoryEntry& entry, const std::string& store_path) {
  std::string line = entry.to_json().dump();
  int fd = ::open(store_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw IoError("cannot open trajectory store: " + store_path);
  ::flock(fd, LOCK_EX);  // one writer at a time
  line += '\n';
  ssize_t written = ::write(fd, line.data(), line.size());
  bool ok = written == static_cast<ssize_t>(line.size());
  ::fsync(fd);
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) throw IoError("short write to trajectory store: " + store_path);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RecallResult recall_similar(const DatasetCard& card,
                            const std::vector<ColumnProfile>& profiles,
                            const std::string& store_path) {
  RecallResult result;
  std::ifstream in(store_path);
  if (!in) return result;  // empty store: no recall
  auto want = profile_feature_vector(card, profiles);
  std::string line;
  std::size_t line_no = 0;
  constexpr double kThreshold = 0.95;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TrajectoryEntry entry;
    try {
      entry = TrajectoryEntry::from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      result.warnings.push_back("skipping corrupt trajectory line " +
                                std::to_string(line_no) + ": " + e.what());
      continue;
    }
    double sim = cosine_similarity(want, entry.profile_vector);
    if (sim < kThreshold) continue;
    if (!result.hit) {
      result.hit = RecallHit{std::move(entry), sim};
      continue;
    }
    const TrajectoryEntry& cur = result.hit->entry;
    bool better = false;
    if (sim != result.hit->similarity) {
      better = sim > result.hit->similarity;
    } else {
      double m_new = entry.final_metric.value_or(-1e300);
      double m_cur = cur.final_metric.value_or(-1e300);
      if (m_new != m_cur) better = m_new > m_cur;
      else better = entry.timestamp > cur.timestamp;  // newer wins
    }
    if (better) result.hit = RecallHit{std::move(entry), sim};
  }
  return result;
}

}  // namespace tabagent
