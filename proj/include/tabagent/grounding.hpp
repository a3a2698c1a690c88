#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tabagent/action.hpp"
#include "tabagent/executor.hpp"
#include "tabagent/plan.hpp"
#include "tabagent/table.hpp"

namespace tabagent {

struct GroundingError {
  std::string category;  // unknown_column | kind_mismatch | unknown_tool |
                         // bad_arity | bad_arg_type | dry_run_failure |
                         // unsupported_skill | dependency_cycle
  int step = 0;
  std::string detail;
  std::optional<int> stmt_index;       // feature-program statement at fault
  std::optional<StmtError> stmt_error; // underlying error of a dry-run failure

  nlohmann::json to_json() const;
};

class GroundedStep {
 public:
  const PlanStep& source() const { return source_; }
  const Action& action() const { return action_; }
  const std::string& dry_run_evidence() const { return evidence_; }
  std::size_t dry_run_rows() const { return dry_run_rows_; }

 private:
  GroundedStep() = default;
  friend std::variant<GroundedStep, GroundingError> ground_step(
      const PlanStep&, const Schema&, const ToolRegistry&);
  friend std::optional<GroundingError> dry_run(GroundedStep&, const Table&,
                                               const Schema&, const ToolRegistry&);

  PlanStep source_;
  Action action_;
  std::string evidence_;
  std::size_t dry_run_rows_ = 0;
};

constexpr std::size_t kDryRunSampleRows = 64;

// Name/type-level grounding of one step: feature programs are parsed and
// every reference checked against the schema; tool calls are checked for
// existence, arity and argument types. Skills without an executor and
// without a registered tool come back as unsupported_skill.
std::variant<GroundedStep, GroundingError> ground_step(const PlanStep& step,
                                                       const Schema& schema,
                                                       const ToolRegistry& registry);

// Executes the grounded step against a sample in a scratch state; data-level
// failures surface as dry_run_failure and success records row-count +
// checksum evidence on the step.
std::optional<GroundingError> dry_run(GroundedStep& g, const Table& sample,
                                      const Schema& schema,
                                      const ToolRegistry& registry);

struct GroundedPlan {
  std::vector<GroundedStep> steps;  // in topological order
  std::vector<int> order;
};

// Grounds all steps in topological order, threading declared outputs
// (gen'd columns, drops) into the schema seen by later steps. Fail-fast.
std::variant<GroundedPlan, GroundingError> ground_plan(const Plan& p,
                                                       const Schema& schema,
                                                       const ToolRegistry& registry,
                                                       const Table& sample);

}  // namespace tabagent
