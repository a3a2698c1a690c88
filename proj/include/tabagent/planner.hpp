#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabagent/action.hpp"
#include "tabagent/executor.hpp"
#include "tabagent/grounding.hpp"
#include "tabagent/plan.hpp"
#include "tabagent/table.hpp"

namespace tabagent {

struct TaskRequest {
  std::string instruction;
  std::optional<std::string> task_kind;  // override
  std::optional<int> budget;             // step limit

  nlohmann::json to_json() const;
};

// s_t as the planner sees it: card, profiles, short-term memory, repair round
struct EnvState {
  DatasetCard card;
  std::vector<ColumnProfile> profiles;
  std::vector<ExecRecord> memory;
  int repair_round = 0;
};

enum class RouteMode { classical_sparse, neural, llm_sequence };

std::string to_string(RouteMode m);
bool route_mode_from_string(const std::string& s, RouteMode& out);

struct Route {
  RouteMode mode = RouteMode::classical_sparse;
  std::string rationale;

  nlohmann::json to_json() const {
    return {{"mode", to_string(mode)}, {"rationale", rationale}};
  }
};

// what went wrong in the round that is being repaired
struct RepairContext {
  int round = 0;  // 1-based repair round
  std::optional<GroundingError> grounding_error;
  std::optional<StmtError> stmt_error;  // execution-time statement failure
  int failed_step = 0;
  SanityReport sanity;
};

class PlannerError : public std::runtime_error {
 public:
  explicit PlannerError(const std::string& what) : std::runtime_error(what) {}
};

class RemoteError : public std::runtime_error {
 public:
  RemoteError(const std::string& code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  const std::string& code() const { return code_; }  // timeout | http_status | malformed_body

 private:
  std::string code_;
};

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  virtual std::string identity() const = 0;  // "rules" | "remote"
  virtual Route propose_route(const DatasetCard& card, const TaskRequest& req,
                              const EnvState& state) = 0;
  virtual Plan propose_plan(const TaskRequest& req, const EnvState& state,
                            const Route& route) = 0;
  virtual std::optional<Plan> propose_repair(const Plan& plan,
                                             const RepairContext& ctx) = 0;
};

struct RulesBackendOptions {
  bool has_external_predictor = false;
  bool force_llm_route = false;  // --planner=llm routes to llm_sequence
  std::string config_dir;        // template override location; may be empty
};

class RulesBackend final : public PlannerBackend {
 public:
  explicit RulesBackend(RulesBackendOptions options = {});
  std::string identity() const override { return "rules"; }
  Route propose_route(const DatasetCard& card, const TaskRequest& req,
                      const EnvState& state) override;
  Plan propose_plan(const TaskRequest& req, const EnvState& state,
                    const Route& route) override;
  std::optional<Plan> propose_repair(const Plan& plan,
                                     const RepairContext& ctx) override;

 private:
  RulesBackendOptions options_;
};

struct RemoteEndpoint {
  std::string url;         // http://host:port[/path]
  std::string bearer_key;  // optional
  double timeout_sec = 30.0;
  int max_transport_retries = 2;

  // reads TABAGENT_LLM_ENDPOINT / TABAGENT_LLM_KEY; throws ConfigError when
  // the endpoint is unset
  static RemoteEndpoint from_env();
};

// One POST of {"card", "profiles", "task", "memory",
// "schema_of_expected_reply"}; strict JSON reply parse; <= 2 transport
// retries with exponential backoff. call_count_out reports attempts made.
nlohmann::json remote_call(const nlohmann::json& prompt_doc,
                           const RemoteEndpoint& endpoint, int* call_count_out = nullptr);

class RemoteBackend final : public PlannerBackend {
 public:
  RemoteBackend(RemoteEndpoint endpoint, std::string config_dir = {});
  std::string identity() const override { return "remote"; }
  Route propose_route(const DatasetCard& card, const TaskRequest& req,
                      const EnvState& state) override;
  Plan propose_plan(const TaskRequest& req, const EnvState& state,
                    const Route& route) override;
  std::optional<Plan> propose_repair(const Plan& plan,
                                     const RepairContext& ctx) override;
  int call_count() const { return call_count_; }

 private:
  nlohmann::json call(const std::string& op, const nlohmann::json& expected_reply,
                      const TaskRequest& req, const EnvState& state,
                      const std::string& extra_note);
  RemoteEndpoint endpoint_;
  std::string config_dir_;
  int call_count_ = 0;
  EnvState last_state_;  // for repair reprompts
  TaskRequest last_req_;
};

// Free-function layer: remote failures fall back to rules for routing and
// surface as PlannerError for plans (after one reprompt inside the backend).
Route route(const DatasetCard& card, const TaskRequest& req, PlannerBackend& backend);
Plan make_plan(const TaskRequest& req, const EnvState& state, const Route& route,
               PlannerBackend& backend);

// The next template step not yet executed, or the terminal finish call.
Action next_action(const TaskRequest& req, const EnvState& state,
                   PlannerBackend& backend);

// Deterministic repair rewrite shared by the rules backend:
//  - sigma=0 zscore / not-retained / degenerate minmax / gen failures: drop
//    exactly the failing statement (step removed when its program empties)
//  - negative log1p input: substitute minmax on the same column
//  - empty selection: halve theta
//  - unsupported skill / unknown tool / bad arity: remove the step, renumber
std::optional<Plan> repair_plan(const Plan& plan, const RepairContext& ctx);

}  // namespace tabagent
