#include "tabagent/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <httplib.h>

#include "tabagent/util.hpp"

namespace tabagent {

nlohmann::json TaskRequest::to_json() const {
  nlohmann::json j{{"instruction", instruction}};
  if (task_kind) j["task_kind"] = *task_kind;
  if (budget) j["budget"] = *budget;
  return j;
}

std::string to_string(RouteMode m) {
  switch (m) {
    case RouteMode::classical_sparse: return "classical_sparse";
    case RouteMode::neural: return "neural";
    case RouteMode::llm_sequence: return "llm_sequence";
  }
  return "classical_sparse";
}

bool route_mode_from_string(const std::string& s, RouteMode& out) {
  if (s == "classical_sparse") out = RouteMode::classical_sparse;
  else if (s == "neural") out = RouteMode::neural;
  else if (s == "llm_sequence") out = RouteMode::llm_sequence;
  else return false;
  return true;
}

// ---------------------------------------------------------------------------
// Rules backend

namespace {

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

bool mentions_dsl_operations(const std::string& text) {
  static const char* kw[] = {"select_mi", "select_top", "zscore", "log1p",
                             "minmax",    "bin",        "gen",    "drop"};
  for (const char* k : kw) {
    std::size_t pos = 0;
    while ((pos = text.find(k, pos)) != std::string::npos) {
      std::size_t after = pos + std::strlen(k);
      while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after])))
        ++after;
      if (after < text.size() && text[after] == '(') return true;
      ++pos;
    }
  }
  return false;
}

struct TemplateParams {
  std::vector<std::string> numeric_features;  // identifier-safe, profile order
  std::vector<std::string> zscore_cols;       // std > 0
  std::vector<std::pair<std::string, std::string>> pairs;  // product gens
  std::vector<std::string> ranked;            // by std desc, name asc
};

TemplateParams derive_params(const DatasetCard& card,
                             const std::vector<ColumnProfile>& profiles) {
  TemplateParams tp;
  for (const auto& p : profiles) {
    if (p.name == card.target) continue;
    if (p.kind != ColumnKind::numeric) continue;
    // program text can only reference identifier-shaped names
    if (!valid_identifier(p.name)) continue;
    tp.numeric_features.push_back(p.name);
    if (p.std_dev && *p.std_dev > 0) tp.zscore_cols.push_back(p.name);
  }
  const std::size_t cap = std::min<std::size_t>(tp.numeric_features.size(), 12);
  for (std::size_t i = 0; i < cap; ++i)
    for (std::size_t j = i + 1; j < cap; ++j)
      tp.pairs.emplace_back(tp.numeric_features[i], tp.numeric_features[j]);

  std::vector<std::pair<std::string, double>> by_std;
  for (const auto& p : profiles) {
    if (p.name == card.target || p.kind != ColumnKind::numeric) continue;
    if (!valid_identifier(p.name)) continue;
    by_std.emplace_back(p.name, p.std_dev.value_or(0.0));
  }
  std::sort(by_std.begin(), by_std.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [name, s] : by_std) tp.ranked.push_back(name);
  return tp;
}

std::string select_program(const TemplateParams& tp) {
  std::string prog = "select_mi(" + format_double(kDefaultMiTheta) + ")";
  for (const auto& c : tp.zscore_cols) prog += "; zscore(" + c + ")";
  return prog;
}

std::string gen_program(const TemplateParams& tp, bool llm_extras) {
  std::string prog;
  for (const auto& [a, b] : tp.pairs) {
    if (!prog.empty()) prog += "; ";
    prog += "gen(" + a + "_x_" + b + " = " + a + " * " + b + ")";
  }
  if (llm_extras && tp.ranked.size() >= 2) {
    const std::string& a = tp.ranked[0];
    const std::string& b = tp.ranked[1];
    if (!prog.empty()) prog += "; ";
    prog += "gen(ratio_" + a + "_" + b + " = " + a + " / " + b + ")";
    prog += "; gen(nonlin_" + a + "_" + b + " = sqrt(abs(" + a + ")) + log(abs(" +
            b + ") + 1))";
  }
  return prog;
}

// The per-route plan documents live in config/templates/<route>.json with
// {{placeholders}}; identical defaults are compiled in so the backend works
// without a config directory.
const char* kClassicalTemplate = R"JSON({
  "complex_instruction": "{{instruction}}",
  "plan": [
    {"step": 1, "skill": "preprocessing",
     "instruction": "Re-check cleaning rules on the working table.",
     "input": "{{dataset}}", "output": "clean table",
     "payload": {"cleaning_config": {}}},
    {"step": 2, "skill": "feature_engineering",
     "instruction": "Keep informative features and standardize them.",
     "input": "clean table", "output": "selected standardized features",
     "payload": {"program": "{{select_program}}"}},
    {"step": 3, "skill": "feature_engineering",
     "instruction": "Generate interaction features by crossing columns.",
     "input": "selected standardized features", "output": "engineered features",
     "payload": {"program": "{{gen_program}}"}},
    {"step": 4, "skill": "tool_call",
     "instruction": "Evaluate the engineered features with the downstream model.",
     "input": "engineered features",
     "output": {"tool": "evaluate", "args": {{evaluate_args}}},
     "payload": {"tool": "evaluate", "args": {{evaluate_args}}}}
  ]
})JSON";

std::string load_template(const std::string& config_dir, const std::string& name) {
  if (!config_dir.empty()) {
    std::filesystem::path path =
        std::filesystem::path(config_dir) / "templates" / (name + ".json");
    std::ifstream in(path);
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      if (!text.empty()) return text;
    }
  }
  return kClassicalTemplate;  // every route shares the document shape
}

std::string substitute(std::string text, const std::map<std::string, std::string>& vars) {
  for (const auto& [key, value] : vars) {
    std::string needle = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      text.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return text;
}

std::string json_escape(const std::string& s) {
  std::string dumped = nlohmann::json(s).dump();
  return dumped.substr(1, dumped.size() - 2);
}

}  // namespace

RulesBackend::RulesBackend(RulesBackendOptions options)
    : options_(std::move(options)) {}

Route RulesBackend::propose_route(const DatasetCard& card, const TaskRequest& req,
                                  const EnvState&) {
  Route r;
  if (options_.has_external_predictor && card.n_features > 60) {
    r.mode = RouteMode::neural;
    r.rationale = "external predictor registered and n_features=" +
                  std::to_string(card.n_features) + " > 60";
    return r;
  }
  if (options_.force_llm_route || mentions_dsl_operations(req.instruction)) {
    r.mode = RouteMode::llm_sequence;
    r.rationale = options_.force_llm_route
                      ? "llm planner requested"
                      : "instruction carries an explicit operation list";
    return r;
  }
  r.mode = RouteMode::classical_sparse;
  r.rationale = "default: " + card.task_kind + " card with n_features=" +
                std::to_string(card.n_features) + ", n_rows=" +
                std::to_string(card.n_rows);
  return r;
}

Plan RulesBackend::propose_plan(const TaskRequest& req, const EnvState& state,
                                const Route& route) {
  TemplateParams tp = derive_params(state.card, state.profiles);
  std::string gen = gen_program(tp, route.mode == RouteMode::llm_sequence);
  std::string select = select_program(tp);
  nlohmann::json evaluate_args = nlohmann::json::object();
  if (route.mode == RouteMode::neural) evaluate_args["model"] = "external";

  std::string text = load_template(options_.config_dir, to_string(route.mode));
  text = substitute(text, {
                              {"instruction", json_escape(req.instruction)},
                              {"dataset", json_escape(state.card.name)},
                              {"select_program", json_escape(select)},
                              {"gen_program", json_escape(gen)},
                              {"evaluate_args", evaluate_args.dump()},
                          });
  Plan plan = parse_plan(text);  // backends must emit valid plans

  if (gen.empty()) {
    // fewer than two usable numeric features: drop the generation step
    Plan trimmed;
    trimmed.complex_instruction = plan.complex_instruction;
    for (const auto& s : plan.steps) {
      if (s.step == 3) continue;
      PlanStep copy = s;
      if (copy.step > 3) {
        copy.step -= 1;
        copy.depends_on.clear();
        if (copy.step > 1) copy.depends_on.push_back(copy.step - 1);
      }
      trimmed.steps.push_back(std::move(copy));
    }
    plan = std::move(trimmed);
    plan = parse_plan(render_plan(plan));
  }
  return plan;
}

std::optional<Plan> RulesBackend::propose_repair(const Plan& plan,
                                                 const RepairContext& ctx) {
  return repair_plan(plan, ctx);
}

// ---------------------------------------------------------------------------
// Repair rewrites

namespace {

// removes step `victim` and renumbers; dependents inherit the victim's deps
std::optional<Plan> remove_step(const Plan& plan, int victim) {
  if (plan.steps.size() <= 1) return std::nullopt;
  const PlanStep* victim_step = nullptr;
  for (const auto& s : plan.steps)
    if (s.step == victim) victim_step = &s;
  if (!victim_step) return std::nullopt;

  Plan out;
  out.complex_instruction = plan.complex_instruction;
  std::map<int, int> renumber;
  int next = 1;
  for (const auto& s : plan.steps) {
    if (s.step == victim) continue;
    renumber[s.step] = next++;
  }
  for (const auto& s : plan.steps) {
    if (s.step == victim) continue;
    PlanStep copy = s;
    std::set<int> deps;
    for (int d : s.depends_on) {
      if (d == victim) {
        for (int vd : victim_step->depends_on)
          if (vd != victim) deps.insert(vd);
      } else {
        deps.insert(d);
      }
    }
    copy.depends_on.clear();
    for (int d : deps)
      if (renumber.count(d)) copy.depends_on.push_back(renumber[d]);
    std::sort(copy.depends_on.begin(), copy.depends_on.end());
    copy.step = renumber[s.step];
    out.steps.push_back(std::move(copy));
  }
  return out;
}

std::optional<Plan> rewrite_program_stmt(const Plan& plan, int step_no,
                                         int stmt_index, const std::string& code,
                                         const std::string& detail) {
  Plan out = plan;
  for (auto& s : out.steps) {
    if (s.step != step_no) continue;
    if (!s.payload.is_object() || !s.payload.contains("program")) return std::nullopt;
    FeatureProgram prog;
    try {
      prog = parse_program(s.payload["program"].get<std::string>());
    } catch (const DslParseError&) {
      return remove_step(plan, step_no);
    }
    if (stmt_index < 0 || stmt_index >= static_cast<int>(prog.statements.size()))
      return std::nullopt;
    Stmt& stmt = prog.statements[stmt_index];

    if (code == "empty_selection" && stmt.kind == Stmt::Kind::select_mi) {
      stmt.theta /= 2.0;  // retain more next round
    } else if (code == "log1p_negative" &&
               stmt.kind == Stmt::Kind::log1p) {
      Stmt sub;
      sub.kind = Stmt::Kind::minmax;
      sub.column = stmt.column;
      stmt = sub;
    } else {
      // default rewrite: drop exactly the failing statement
      (void)detail;
      prog.statements.erase(prog.statements.begin() + stmt_index);
      if (prog.statements.empty()) return remove_step(plan, step_no);
    }
    s.payload["program"] = render_program(prog);
    return out;
  }
  return std::nullopt;
}

// locate a gen statement producing `column` anywhere in the plan
std::optional<Plan> drop_gen_of_column(const Plan& plan, const std::string& column) {
  for (const auto& s : plan.steps) {
    if (!s.payload.is_object() || !s.payload.contains("program")) continue;
    FeatureProgram prog;
    try {
      prog = parse_program(s.payload["program"].get<std::string>());
    } catch (const DslParseError&) {
      continue;
    }
    for (std::size_t i = 0; i < prog.statements.size(); ++i) {
      if (prog.statements[i].kind == Stmt::Kind::gen &&
          prog.statements[i].gen_name == column)
        return rewrite_program_stmt(plan, s.step, static_cast<int>(i), "drop", "");
    }
  }
  return std::nullopt;
}

std::string column_from_detail(const std::string& detail) {
  auto open = detail.find('\'');
  if (open == std::string::npos) return "";
  auto close = detail.find('\'', open + 1);
  if (close == std::string::npos) return "";
  return detail.substr(open + 1, close - open - 1);
}

}  // namespace

std::optional<Plan> repair_plan(const Plan& plan, const RepairContext& ctx) {
  // execution-time statement failure
  if (ctx.stmt_error) {
    return rewrite_program_stmt(plan, ctx.failed_step, ctx.stmt_error->stmt_index,
                                ctx.stmt_error->code, ctx.stmt_error->detail);
  }
  if (ctx.grounding_error) {
    const GroundingError& ge = *ctx.grounding_error;
    if (ge.category == "dry_run_failure" && ge.stmt_error) {
      return rewrite_program_stmt(plan, ge.step, ge.stmt_error->stmt_index,
                                  ge.stmt_error->code, ge.stmt_error->detail);
    }
    if (ge.stmt_index &&
        (ge.category == "unknown_column" || ge.category == "kind_mismatch" ||
         ge.category == "bad_arg_type")) {
      return rewrite_program_stmt(plan, ge.step, *ge.stmt_index, ge.category,
                                  ge.detail);
    }
    // whole-step failures: unsupported skill, unknown tool, arity problems
    return remove_step(plan, ge.step);
  }
  if (!ctx.sanity.pass()) {
    for (const auto& v : ctx.sanity.violations) {
      if (v.code == "empty_feature_set") {
        // loosen the selection threshold when a select_mi exists
        for (const auto& s : plan.steps) {
          if (!s.payload.is_object() || !s.payload.contains("program")) continue;
          FeatureProgram prog;
          try {
            prog = parse_program(s.payload["program"].get<std::string>());
          } catch (const DslParseError&) {
            continue;
          }
          for (std::size_t i = 0; i < prog.statements.size(); ++i)
            if (prog.statements[i].kind == Stmt::Kind::select_mi)
              return rewrite_program_stmt(plan, s.step, static_cast<int>(i),
                                          "empty_selection", "");
        }
        return std::nullopt;
      }
      if (v.code == "nan_or_inf") {
        std::string column = column_from_detail(v.detail);
        if (!column.empty())
          if (auto repaired = drop_gen_of_column(plan, column)) return repaired;
        return std::nullopt;
      }
      if (v.code == "below_naive_baseline") {
        // fall back to plainer features: remove the generation step if present
        for (const auto& s : plan.steps) {
          if (s.skill != Skill::feature_engineering) continue;
          if (!s.payload.is_object() || !s.payload.contains("program")) continue;
          std::string text = s.payload["program"].get<std::string>();
          if (text.find("gen(") != std::string::npos) return remove_step(plan, s.step);
        }
        return std::nullopt;
      }
    }
    return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Free functions

Route route(const DatasetCard& card, const TaskRequest& req,
            PlannerBackend& backend) {
  try {
    return backend.propose_route(card, req, EnvState{card, {}, {}, 0});
  } catch (const RemoteError& e) {
    RulesBackend fallback;
    Route r = fallback.propose_route(card, req, EnvState{card, {}, {}, 0});
    r.rationale = "remote routing failed (" + std::string(e.what()) +
                  "); fell back to rules: " + r.rationale;
    return r;
  }
}

Plan make_plan(const TaskRequest& req, const EnvState& state, const Route& route,
               PlannerBackend& backend) {
  Plan plan = backend.propose_plan(req, state, route);
  // belt and braces: whatever the backend produced must round-trip the
  // plan format
  return parse_plan(render_plan(plan));
}

Action next_action(const TaskRequest& req, const EnvState& state,
                   PlannerBackend& backend) {
  Route r = backend.propose_route(state.card, req, state);
  Plan plan = backend.propose_plan(req, state, r);
  // recorded failures rewrite the plan before the next step is emitted
  for (const auto& rec : state.memory) {
    if (rec.ok) continue;
    RepairContext ctx;
    ctx.round = state.repair_round;
    ctx.failed_step = rec.step;
    if (rec.detail.is_object() && rec.detail.contains("code")) {
      StmtError se;
      se.stmt_index = rec.detail.value("stmt_index", -1);
      se.code = rec.detail.value("code", rec.error_code);
      se.detail = rec.detail.value("detail", rec.error_detail);
      ctx.stmt_error = se;
    }
    if (auto repaired = backend.propose_repair(plan, ctx)) plan = *repaired;
  }
  std::set<int> executed;
  for (const auto& rec : state.memory)
    if (rec.ok) executed.insert(rec.step);
  for (const auto& step : plan.steps) {
    if (executed.count(step.step)) continue;
    // hand back the step's executable shape; grounding still validates it
    if (step.payload.is_object() && step.payload.contains("program"))
      return SymbolicAction{parse_program(step.payload["program"].get<std::string>())};
    if (step.payload.is_object() && step.payload.contains("tool"))
      return ToolCallAction::from_json(step.payload);
    if (step.skill == Skill::preprocessing)
      return ToolCallAction{"clean", nlohmann::json::object()};
    return DirectGenAction{step.instruction};
  }
  return ToolCallAction{"finish", nlohmann::json::object()};
}

// ---------------------------------------------------------------------------
// Remote backend

RemoteEndpoint RemoteEndpoint::from_env() {
  const char* url = std::getenv("TABAGENT_LLM_ENDPOINT");
  if (!url || !*url)
    throw ConfigError("TABAGENT_LLM_ENDPOINT is not set; --planner llm needs it");
  RemoteEndpoint e;
  e.url = url;
  if (const char* key = std::getenv("TABAGENT_LLM_KEY")) e.bearer_key = key;
  return e;
}

namespace {

struct SplitUrl {
  std::string base;  // scheme://host:port
  std::string path;  // /path
};

SplitUrl split_url(const std::string& url) {
  SplitUrl s;
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) {
    s.base = url;
    s.path = "/";
  } else {
    s.base = url.substr(0, path_start);
    s.path = url.substr(path_start);
  }
  return s;
}

}  // namespace

nlohmann::json remote_call(const nlohmann::json& prompt_doc,
                           const RemoteEndpoint& endpoint, int* call_count_out) {
  SplitUrl url = split_url(endpoint.url);
  httplib::Client client(url.base);
  client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_sec));
  client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_sec));
  httplib::Headers headers;
  if (!endpoint.bearer_key.empty())
    headers.emplace("Authorization", "Bearer " + endpoint.bearer_key);

  std::string body = prompt_doc.dump();
  int attempts = 0;
  std::string last_transport_error;
  for (int attempt = 0; attempt <= endpoint.max_transport_retries; ++attempt) {
    ++attempts;
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_transport_error = httplib::to_string(res.error());
      if (attempt < endpoint.max_transport_retries) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(100 * (1 << attempt)));
        continue;
      }
      if (call_count_out) *call_count_out = attempts;
      throw RemoteError("timeout", "remote call failed after " +
                                       std::to_string(attempts) + " attempts: " +
                                       last_transport_error);
    }
    if (call_count_out) *call_count_out = attempts;
    if (res->status < 200 || res->status >= 300)
      throw RemoteError("http_status",
                        "remote returned HTTP " + std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw RemoteError("malformed_body",
                        std::string("remote reply is not JSON: ") + e.what());
    }
  }
  throw RemoteError("timeout", "remote call failed: " + last_transport_error);
}

RemoteBackend::RemoteBackend(RemoteEndpoint endpoint, std::string config_dir)
    : endpoint_(std::move(endpoint)), config_dir_(std::move(config_dir)) {}

namespace {

const char* kRoutePrompt =
    "Choose one solution mode for the dataset described by the card: "
    "classical_sparse, neural, or llm_sequence. Task: {{instruction}}. "
    "Reply as JSON {\"mode\": \"...\", \"rationale\": \"...\"}.";

const char* kPlanPrompt =
    "Decompose the task into an ordered plan of subtasks for the dataset "
    "described by the card. Task: {{instruction}}. Reply as JSON "
    "{\"complex_instruction\": \"...\", \"plan\": [{\"step\": 1, \"skill\": "
    "\"preprocessing|feature_engineering|augmentation|visualization|"
    "text_to_sql|data_to_equation|tool_call\", \"instruction\": \"...\", "
    "\"input\": \"...\", \"output\": \"...\", \"payload\": {}}]}.";

std::string load_prompt(const std::string& config_dir, const std::string& name,
                        const char* fallback) {
  if (!config_dir.empty()) {
    std::filesystem::path path =
        std::filesystem::path(config_dir) / "prompts" / (name + ".txt");
    std::ifstream in(path);
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      if (!text.empty()) return text;
    }
  }
  return fallback;
}

}  // namespace

nlohmann::json RemoteBackend::call(const std::string& op,
                                   const nlohmann::json& expected_reply,
                                   const TaskRequest& req, const EnvState& state,
                                   const std::string& extra_note) {
  std::string prompt = load_prompt(config_dir_, op,
                                   op == "route" ? kRoutePrompt : kPlanPrompt);
  prompt = substitute(prompt, {{"instruction", req.instruction}});
  if (!extra_note.empty()) prompt += "\n" + extra_note;

  nlohmann::json memory = nlohmann::json::array();
  for (const auto& rec : state.memory)
    memory.push_back({{"step", rec.step},
                      {"summary", rec.summary},
                      {"ok", rec.ok},
                      {"error_code", rec.error_code}});
  nlohmann::json doc{{"card", state.card.to_json()},
                     {"profiles", profiles_to_json(state.profiles)},
                     {"task", prompt},
                     {"memory", memory},
                     {"schema_of_expected_reply", expected_reply}};
  int calls = 0;
  nlohmann::json reply = remote_call(doc, endpoint_, &calls);
  call_count_ += calls;
  return reply;
}

Route RemoteBackend::propose_route(const DatasetCard& card, const TaskRequest& req,
                                   const EnvState& state) {
  last_state_ = state;
  last_req_ = req;
  EnvState with_card = state;
  with_card.card = card;
  nlohmann::json expected{{"mode", "classical_sparse|neural|llm_sequence"},
                          {"rationale", "string"}};
  nlohmann::json reply = call("route", expected, req, with_card, "");
  if (!reply.is_object() || !reply.contains("mode") || !reply["mode"].is_string())
    throw RemoteError("malformed_body", "route reply lacks a string 'mode'");
  Route r;
  if (!route_mode_from_string(reply["mode"].get<std::string>(), r.mode))
    throw RemoteError("malformed_body",
                      "route reply mode '" + reply["mode"].get<std::string>() +
                          "' is not in the enum");
  r.rationale = reply.value("rationale", "remote");
  return r;
}

Plan RemoteBackend::propose_plan(const TaskRequest& req, const EnvState& state,
                                 const Route& route) {
  last_state_ = state;
  last_req_ = req;
  nlohmann::json expected{{"complex_instruction", "string"},
                          {"plan", "array of steps"}};
  std::string note = "Chosen mode: " + to_string(route.mode) + ".";
  nlohmann::json reply = call("plan", expected, req, state, note);
  try {
    return plan_from_json(reply);
  } catch (const PlanParseError& first) {
    // one reprompt with the validation error attached
    nlohmann::json retry =
        call("plan", expected, req, state,
             note + " Previous reply was invalid: " + first.what());
    try {
      return plan_from_json(retry);
    } catch (const PlanParseError& second) {
      throw PlannerError(std::string("remote plan invalid twice: ") + second.what());
    }
  }
}

std::optional<Plan> RemoteBackend::propose_repair(const Plan& plan,
                                                  const RepairContext& ctx) {
  // remote repair reuses the deterministic rewrite; the remote service only
  // generates plans
  (void)plan;
  (void)ctx;
  return repair_plan(plan, ctx);
}

}  // namespace tabagent
