#include "tabagent/grounding.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "tabagent/util.hpp"

namespace tabagent {

nlohmann::json GroundingError::to_json() const {
  nlohmann::json j{{"category", category}, {"step", step}, {"detail", detail}};
  if (stmt_index) j["stmt_index"] = *stmt_index;
  if (stmt_error) j["stmt_error"] = stmt_error->to_json();
  return j;
}

namespace {

GroundingError make_error(const std::string& category, int step,
                          const std::string& detail,
                          std::optional<int> stmt_index = std::nullopt) {
  GroundingError e;
  e.category = category;
  e.step = step;
  e.detail = detail;
  e.stmt_index = stmt_index;
  return e;
}

// projected view of the schema while walking a program: name -> kind
struct ProjectedSchema {
  std::map<std::string, ColumnKind> kinds;
  std::optional<std::string> target;

  static ProjectedSchema from(const Schema& s) {
    ProjectedSchema p;
    for (const auto& spec : s.specs()) p.kinds[spec.name] = spec.kind;
    p.target = s.target_name();
    return p;
  }
};

std::optional<GroundingError> check_program(const FeatureProgram& prog,
                                            const Schema& schema, int step_no) {
  ProjectedSchema proj = ProjectedSchema::from(schema);

  auto check_numeric_ref = [&](const std::string& col,
                               int si) -> std::optional<GroundingError> {
    if (proj.target && col == *proj.target)
      return make_error("kind_mismatch", step_no,
                        "target column '" + col + "' referenced by transform", si);
    auto it = proj.kinds.find(col);
    if (it == proj.kinds.end())
      return make_error("unknown_column", step_no, "unknown column '" + col + "'", si);
    if (it->second != ColumnKind::numeric)
      return make_error("kind_mismatch", step_no,
                        "column '" + col + "' is " + to_string(it->second) +
                            ", numeric required", si);
    return std::nullopt;
  };

  for (std::size_t si = 0; si < prog.statements.size(); ++si) {
    const Stmt& s = prog.statements[si];
    const int idx = static_cast<int>(si);
    switch (s.kind) {
      case Stmt::Kind::zscore:
      case Stmt::Kind::log1p:
      case Stmt::Kind::minmax:
      case Stmt::Kind::bin:
        if (auto err = check_numeric_ref(s.column, idx)) return err;
        break;
      case Stmt::Kind::drop: {
        if (proj.target && s.column == *proj.target)
          return make_error("kind_mismatch", step_no,
                            "target column '" + s.column + "' referenced by drop",
                            idx);
        if (!proj.kinds.count(s.column))
          return make_error("unknown_column", step_no,
                            "unknown column '" + s.column + "'", idx);
        proj.kinds.erase(s.column);
        break;
      }
      case Stmt::Kind::gen: {
        std::vector<std::string> refs;
        collect_columns(s.expr, refs);
        for (const auto& r : refs)
          if (auto err = check_numeric_ref(r, idx)) return err;
        if (proj.kinds.count(s.gen_name))
          return make_error("bad_arg_type", step_no,
                            "gen name '" + s.gen_name + "' already a column", idx);
        proj.kinds[s.gen_name] = ColumnKind::numeric;
        break;
      }
      case Stmt::Kind::select_mi:
      case Stmt::Kind::select_top: {
        if (!proj.target || !proj.kinds.count(*proj.target))
          return make_error("bad_arg_type", step_no,
                            "selection requires a target column in the schema", idx);
        for (const auto& [name, kind] : proj.kinds) {
          if (name == *proj.target) continue;
          if (kind != ColumnKind::numeric)
            return make_error("kind_mismatch", step_no,
                              "feature column '" + name + "' is " + to_string(kind) +
                                  ", selection requires numeric features", idx);
        }
        // retention is data-dependent; the projection keeps every column
        break;
      }
    }
  }
  return std::nullopt;
}

std::optional<GroundingError> check_tool_call(const std::string& tool,
                                              const nlohmann::json& args,
                                              const Schema& schema,
                                              const ToolRegistry& registry,
                                              int step_no) {
  const ToolSpec* spec = registry.find(tool);
  if (!spec)
    return make_error("unknown_tool", step_no, "tool '" + tool + "' not registered");
  if (!args.is_object())
    return make_error("bad_arg_type", step_no, "args must be an object");

  auto param_of = [&](const std::string& key) -> const ToolParam* {
    for (const auto& p : spec->params)
      if (p.name == key) return &p;
    return nullptr;
  };

  for (const auto& [key, value] : args.items()) {
    const ToolParam* p = param_of(key);
    if (!p)
      return make_error("bad_arity", step_no,
                        "unexpected argument '" + key + "' for tool '" + tool + "'");
    if (p->kind == "string" || p->kind == "path") {
      if (!value.is_string())
        return make_error("bad_arg_type", step_no,
                          "argument '" + key + "' must be a string");
    } else if (p->kind == "int") {
      if (!value.is_number_integer())
        return make_error("bad_arg_type", step_no,
                          "argument '" + key + "' must be an integer");
    } else if (p->kind == "float") {
      if (!value.is_number())
        return make_error("bad_arg_type", step_no,
                          "argument '" + key + "' must be a number");
    } else if (p->kind == "column_name") {
      if (!value.is_string())
        return make_error("bad_arg_type", step_no,
                          "argument '" + key + "' must be a column name");
      std::string col = value.get<std::string>();
      const ColumnSpec* cs = schema.find(col);
      if (!cs)
        return make_error("unknown_column", step_no,
                          "argument '" + key + "' references unknown column '" +
                              col + "'");
      if (p->column_kind && cs->kind != *p->column_kind)
        return make_error("kind_mismatch", step_no,
                          "column '" + col + "' is " + to_string(cs->kind) +
                              ", tool '" + tool + "' requires " +
                              to_string(*p->column_kind));
    } else if (p->kind == "number_list") {
      if (!value.is_array())
        return make_error("bad_arg_type", step_no,
                          "argument '" + key + "' must be an array of numbers");
      for (const auto& v : value)
        if (!v.is_number())
          return make_error("bad_arg_type", step_no,
                            "argument '" + key + "' must contain numbers only");
    }
  }
  for (const auto& p : spec->params) {
    if (p.required && !args.contains(p.name))
      return make_error("bad_arity", step_no,
                        "missing required argument '" + p.name + "' for tool '" +
                            tool + "'");
  }
  return std::nullopt;
}

nlohmann::json clean_args_from_payload(const nlohmann::json& payload) {
  nlohmann::json args = nlohmann::json::object();
  if (payload.is_object() && payload.contains("cleaning_config") &&
      payload["cleaning_config"].is_object()) {
    const auto& cfg = payload["cleaning_config"];
    if (cfg.contains("outlier_clip"))
      args["outlier_clip"] = cfg["outlier_clip"].is_boolean()
                                 ? (cfg["outlier_clip"].get<bool>() ? 1 : 0)
                                 : cfg["outlier_clip"];
    if (cfg.contains("one_hot_max_card"))
      args["one_hot_max_card"] = cfg["one_hot_max_card"];
    if (cfg.contains("drop_missing_threshold"))
      args["drop_missing_threshold"] = cfg["drop_missing_threshold"];
  }
  return args;
}

}  // namespace

std::variant<GroundedStep, GroundingError> ground_step(const PlanStep& step,
                                                       const Schema& schema,
                                                       const ToolRegistry& registry) {
  GroundedStep g;
  g.source_ = step;

  switch (step.skill) {
    case Skill::preprocessing: {
      nlohmann::json args = clean_args_from_payload(step.payload);
      if (auto err = check_tool_call("clean", args, schema, registry, step.step))
        return *err;
      g.action_ = ToolCallAction{"clean", args};
      return g;
    }
    case Skill::feature_engineering: {
      if (step.payload.is_object() && step.payload.contains("program")) {
        if (!step.payload["program"].is_string())
          return make_error("bad_arg_type", step.step, "payload.program must be a string");
        FeatureProgram prog;
        try {
          prog = parse_program(step.payload["program"].get<std::string>());
        } catch (const DslParseError& e) {
          return make_error("bad_arg_type", step.step,
                            std::string("feature program: ") + e.what());
        }
        if (auto err = check_program(prog, schema, step.step)) return *err;
        g.action_ = SymbolicAction{std::move(prog)};
        return g;
      }
      // no executable payload: the step contributes report text only
      g.action_ = DirectGenAction{step.instruction};
      return g;
    }
    case Skill::augmentation:
    case Skill::visualization: {
      if (step.payload.is_object() && step.payload.contains("tool")) {
        ToolCallAction tc;
        try {
          tc = ToolCallAction::from_json(step.payload);
        } catch (const std::exception& e) {
          return make_error("bad_arg_type", step.step,
                            std::string("malformed tool payload: ") + e.what());
        }
        if (auto err = check_tool_call(tc.tool, tc.args, schema, registry, step.step))
          return *err;
        g.action_ = std::move(tc);
        return g;
      }
      g.action_ = DirectGenAction{step.instruction};
      return g;
    }
    case Skill::text_to_sql:
    case Skill::data_to_equation: {
      std::string tool_name = to_string(step.skill);
      if (!registry.find(tool_name))
        return make_error("unsupported_skill", step.step,
                          "skill '" + tool_name +
                              "' has no executor and no registered tool");
      nlohmann::json args = nlohmann::json::object();
      if (step.payload.is_object() && step.payload.contains("args"))
        args = step.payload["args"];
      if (auto err = check_tool_call(tool_name, args, schema, registry, step.step))
        return *err;
      g.action_ = ToolCallAction{tool_name, args};
      return g;
    }
    case Skill::tool_call: {
      nlohmann::json source;
      if (step.payload.is_object() && step.payload.contains("tool"))
        source = step.payload;
      else if (step.output.is_object() && step.output.contains("tool"))
        source = step.output;
      else
        return make_error("bad_arg_type", step.step,
                          "tool_call step carries no {\"tool\", \"args\"} object");
      ToolCallAction tc;
      try {
        tc = ToolCallAction::from_json(source);
      } catch (const std::exception& e) {
        return make_error("bad_arg_type", step.step,
                          std::string("malformed tool call: ") + e.what());
      }
      if (auto err = check_tool_call(tc.tool, tc.args, schema, registry, step.step))
        return *err;
      g.action_ = std::move(tc);
      return g;
    }
  }
  return make_error("unsupported_skill", step.step, "unhandled skill");
}

std::optional<GroundingError> dry_run(GroundedStep& g, const Table& sample_in,
                                      const Schema& schema,
                                      const ToolRegistry& registry) {
  Table sample = sample_in.head(kDryRunSampleRows);
  const int step_no = g.source_.step;

  if (const auto* sym = std::get_if<SymbolicAction>(&g.action_)) {
    auto outcome = execute_program(sym->program, sample, schema);
    if (const auto* err = std::get_if<StmtError>(&outcome)) {
      GroundingError ge = make_error("dry_run_failure", step_no,
                                     err->code + ": " + err->detail,
                                     err->stmt_index);
      ge.stmt_error = *err;
      return ge;
    }
    const Table& out = std::get<DslResult>(outcome).table;
    g.dry_run_rows_ = out.n_rows();
    g.evidence_ = "rows=" + std::to_string(out.n_rows()) +
                  " hash=" + out.content_hash();
    return std::nullopt;
  }

  if (const auto* tc = std::get_if<ToolCallAction>(&g.action_)) {
    if (tc->tool == "evaluate") {
      // a 64-row CV is not representative; the dry run checks feasibility only
      try {
        feature_matrix(sample, schema);
      } catch (const std::invalid_argument& e) {
        return make_error("dry_run_failure", step_no, e.what());
      }
      g.dry_run_rows_ = sample.n_rows();
      g.evidence_ = "rows=" + std::to_string(sample.n_rows()) +
                    " hash=" + sample.content_hash();
      return std::nullopt;
    }
    RunState scratch;
    scratch.table = sample;
    scratch.schema = schema;
    scratch.seed = 0;  // evidence must not depend on the run seed
    ToolResult r = invoke_tool(tc->tool, tc->args, scratch, registry, step_no,
                               /*allow_writes=*/false);
    if (!r.ok)
      return make_error("dry_run_failure", step_no,
                        r.error_code + ": " + r.error_detail);
    const Table& out = r.table ? *r.table : sample;
    g.dry_run_rows_ = out.n_rows();
    g.evidence_ =
        "rows=" + std::to_string(out.n_rows()) + " hash=" + out.content_hash();
    return std::nullopt;
  }

  g.dry_run_rows_ = sample.n_rows();
  g.evidence_ = "rows=" + std::to_string(sample.n_rows());
  return std::nullopt;
}

namespace {

// static schema threading for later steps: gen'd names appear, drops vanish;
// selections keep everything because retention is data-dependent
Schema thread_schema(const Schema& in, const Action& action) {
  const auto* sym = std::get_if<SymbolicAction>(&action);
  if (!sym) return in;
  Schema s = in;
  for (const auto& stmt : sym->program.statements) {
    if (stmt.kind == Stmt::Kind::gen)
      s = s.with({stmt.gen_name, ColumnKind::numeric, false, ColumnRole::feature});
    else if (stmt.kind == Stmt::Kind::drop)
      s = s.without(stmt.column);
  }
  return s;
}

Schema schema_after_clean_sample(const Table& cleaned, const Schema& prior) {
  std::vector<ColumnSpec> specs;
  auto target = prior.target_name();
  for (std::size_t i = 0; i < cleaned.n_cols(); ++i) {
    ColumnSpec s;
    s.name = cleaned.name_at(i);
    s.kind = cleaned.col_at(i).kind();
    s.nullable = cleaned.col_at(i).missing_count() > 0;
    s.role = (target && s.name == *target) ? ColumnRole::target : ColumnRole::feature;
    specs.push_back(std::move(s));
  }
  return Schema(std::move(specs));
}

}  // namespace

std::variant<GroundedPlan, GroundingError> ground_plan(const Plan& p,
                                                       const Schema& schema,
                                                       const ToolRegistry& registry,
                                                       const Table& sample_in) {
  auto order_or_cycle = validate_dependencies(p);
  if (const auto* cycle = std::get_if<PlanCycleError>(&order_or_cycle)) {
    std::string detail = "dependency cycle among steps {";
    for (std::size_t i = 0; i < cycle->cycle_steps.size(); ++i) {
      if (i) detail += ", ";
      detail += std::to_string(cycle->cycle_steps[i]);
    }
    detail += "}";
    return make_error("dependency_cycle",
                      cycle->cycle_steps.empty() ? 0 : cycle->cycle_steps.front(),
                      detail);
  }
  const auto& order = std::get<std::vector<int>>(order_or_cycle);

  std::map<int, const PlanStep*> by_number;
  for (const auto& s : p.steps) by_number[s.step] = &s;

  GroundedPlan out;
  out.order = order;
  Schema cur_schema = schema;
  Table cur_sample = sample_in.head(kDryRunSampleRows);

  for (int step_no : order) {
    const PlanStep& step = *by_number.at(step_no);
    auto grounded = ground_step(step, cur_schema, registry);
    if (auto* err = std::get_if<GroundingError>(&grounded)) return *err;
    GroundedStep g = std::move(std::get<GroundedStep>(grounded));
    if (auto err = dry_run(g, cur_sample, cur_schema, registry)) return *err;

    // thread the sample the way execution would
    if (const auto* sym = std::get_if<SymbolicAction>(&g.action())) {
      auto outcome = execute_program(sym->program, cur_sample, cur_schema);
      if (auto* res = std::get_if<DslResult>(&outcome))
        cur_sample = std::move(res->table);
      cur_schema = thread_schema(cur_schema, g.action());
    } else if (const auto* tc = std::get_if<ToolCallAction>(&g.action())) {
      if (tc->tool == "clean" || tc->tool == "gaussian_noise") {
        RunState scratch;
        scratch.table = cur_sample;
        scratch.schema = cur_schema;
        scratch.seed = 0;
        ToolResult r = invoke_tool(tc->tool, tc->args, scratch, registry, step_no,
                                   /*allow_writes=*/false);
        if (r.ok && r.table) {
          cur_sample = std::move(*r.table);
          if (r.schema) cur_schema = std::move(*r.schema);
          else cur_schema = schema_after_clean_sample(cur_sample, cur_schema);
        }
      }
    }
    out.steps.push_back(std::move(g));
  }
  return out;
}

}  // namespace tabagent
