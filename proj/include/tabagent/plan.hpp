#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tabagent {

enum class Skill {
  preprocessing,
  feature_engineering,
  augmentation,
  visualization,
  text_to_sql,
  data_to_equation,
  tool_call,
};

std::string to_string(Skill s);
bool skill_from_string(const std::string& text, Skill& out);

struct PlanStep {
  int step = 0;
  Skill skill = Skill::preprocessing;
  std::string instruction;
  std::string input;
  nlohmann::json output;            // string or object, per the plan format
  std::vector<int> depends_on;      // materialized; default is [step-1]
  nlohmann::json payload;           // skill-specific body; null when absent

  bool operator==(const PlanStep& other) const;
};

struct Plan {
  std::string complex_instruction;
  std::vector<PlanStep> steps;

  bool operator==(const Plan& other) const;
};

class PlanParseError : public std::runtime_error {
 public:
  explicit PlanParseError(const std::string& what) : std::runtime_error(what) {}
};

struct PlanCycleError {
  std::vector<int> cycle_steps;
};

constexpr std::size_t kMaxPlanSteps = 64;

// Strict parse of {"complex_instruction":..., "plan":[...]}: unknown fields
// and unknown skills are errors, step numbers must be 1..n contiguous, and
// depends_on may only reference earlier steps. An absent depends_on defaults
// to the linear chain.
Plan parse_plan(const std::string& doc);
Plan plan_from_json(const nlohmann::json& j);

// Deterministic topological order: among ready steps, smallest number first.
// Returns the order or the offending cycle.
std::variant<std::vector<int>, PlanCycleError> validate_dependencies(const Plan& p);

// Inverse of parse_plan; default-chain depends_on is omitted from the output.
std::string render_plan(const Plan& p);
nlohmann::json plan_to_json(const Plan& p);

bool is_default_chain(const PlanStep& s);

}  // namespace tabagent
