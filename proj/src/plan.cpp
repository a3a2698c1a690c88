#include "tabagent/plan.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace tabagent {

std::string to_string(Skill s) {
  switch (s) {
    case Skill::preprocessing: return "preprocessing";
    case Skill::feature_engineering: return "feature_engineering";
    case Skill::augmentation: return "augmentation";
    case Skill::visualization: return "visualization";
    case Skill::text_to_sql: return "text_to_sql";
    case Skill::data_to_equation: return "data_to_equation";
    case Skill::tool_call: return "tool_call";
  }
  return "preprocessing";
}

bool skill_from_string(const std::string& text, Skill& out) {
  static const std::map<std::string, Skill> table = {
      {"preprocessing", Skill::preprocessing},
      {"feature_engineering", Skill::feature_engineering},
      {"augmentation", Skill::augmentation},
      {"visualization", Skill::visualization},
      {"text_to_sql", Skill::text_to_sql},
      {"data_to_equation", Skill::data_to_equation},
      {"tool_call", Skill::tool_call},
  };
  auto it = table.find(text);
  if (it == table.end()) return false;
  out = it->second;
  return true;
}

bool PlanStep::operator==(const PlanStep& other) const {
  return step == other.step && skill == other.skill &&
         instruction == other.instruction && input == other.input &&
         output == other.output && depends_on == other.depends_on &&
         payload == other.payload;
}

bool Plan::operator==(const Plan& other) const {
  return complex_instruction == other.complex_instruction && steps == other.steps;
}

bool is_default_chain(const PlanStep& s) {
  if (s.step == 1) return s.depends_on.empty();
  return s.depends_on.size() == 1 && s.depends_on[0] == s.step - 1;
}

Plan plan_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw PlanParseError("plan document must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "complex_instruction" && key != "plan")
      throw PlanParseError("unknown top-level field '" + key + "'");
  }
  if (!j.contains("complex_instruction") || !j["complex_instruction"].is_string())
    throw PlanParseError("missing or non-string 'complex_instruction'");
  if (!j.contains("plan") || !j["plan"].is_array())
    throw PlanParseError("missing or non-array 'plan'");

  Plan plan;
  plan.complex_instruction = j["complex_instruction"].get<std::string>();

  const auto& arr = j["plan"];
  if (arr.empty()) throw PlanParseError("plan must contain at least one step");
  if (arr.size() > kMaxPlanSteps)
    throw PlanParseError("plan exceeds " + std::to_string(kMaxPlanSteps) + " steps");

  std::set<int> seen;
  for (const auto& e : arr) {
    if (!e.is_object()) throw PlanParseError("plan step must be an object");
    for (const auto& [key, value] : e.items()) {
      static const std::set<std::string> known = {
          "step", "skill", "instruction", "input", "output", "depends_on", "payload"};
      if (!known.count(key))
        throw PlanParseError("unknown step field '" + key + "'");
    }
    PlanStep step;
    if (!e.contains("step") || !e["step"].is_number_integer())
      throw PlanParseError("step number missing or not an integer");
    step.step = e["step"].get<int>();
    if (!seen.insert(step.step).second)
      throw PlanParseError("duplicate step number " + std::to_string(step.step));

    if (!e.contains("skill") || !e["skill"].is_string())
      throw PlanParseError("step " + std::to_string(step.step) + ": missing skill");
    std::string skill_text = e["skill"].get<std::string>();
    if (!skill_from_string(skill_text, step.skill))
      throw PlanParseError("step " + std::to_string(step.step) +
                           ": unknown skill '" + skill_text + "'");

    if (e.contains("instruction")) {
      if (!e["instruction"].is_string())
        throw PlanParseError("step " + std::to_string(step.step) +
                             ": instruction must be a string");
      step.instruction = e["instruction"].get<std::string>();
    }
    if (e.contains("input")) {
      if (!e["input"].is_string())
        throw PlanParseError("step " + std::to_string(step.step) +
                             ": input must be a string");
      step.input = e["input"].get<std::string>();
    }
    if (e.contains("output")) {
      if (!e["output"].is_string() && !e["output"].is_object())
        throw PlanParseError("step " + std::to_string(step.step) +
                             ": output must be a string or object");
      step.output = e["output"];
    } else {
      step.output = "";
    }
    if (e.contains("depends_on")) {
      if (!e["depends_on"].is_array())
        throw PlanParseError("step " + std::to_string(step.step) +
                             ": depends_on must be an array");
      for (const auto& d : e["depends_on"]) {
        if (!d.is_number_integer())
          throw PlanParseError("step " + std::to_string(step.step) +
                               ": depends_on entries must be integers");
        step.depends_on.push_back(d.get<int>());
      }
    } else if (step.step > 1) {
      step.depends_on.push_back(step.step - 1);  // default linear chain
    }
    if (e.contains("payload")) {
      if (!e["payload"].is_object())
        throw PlanParseError("step " + std::to_string(step.step) +
                             ": payload must be an object");
      step.payload = e["payload"];
    }
    plan.steps.push_back(std::move(step));
  }

  std::sort(plan.steps.begin(), plan.steps.end(),
            [](const PlanStep& a, const PlanStep& b) { return a.step < b.step; });
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    if (plan.steps[i].step != static_cast<int>(i) + 1)
      throw PlanParseError("non-contiguous step numbering: expected " +
                           std::to_string(i + 1) + ", found " +
                           std::to_string(plan.steps[i].step));
  }
  for (const auto& step : plan.steps) {
    for (int d : step.depends_on) {
      if (d < 1 || d >= step.step)
        throw PlanParseError("step " + std::to_string(step.step) +
                             ": depends_on references step " + std::to_string(d) +
                             " which is not an earlier step");
    }
  }
  return plan;
}

Plan parse_plan(const std::string& doc) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(doc);
  } catch (const nlohmann::json::parse_error& e) {
    throw PlanParseError(std::string("malformed plan document: ") + e.what());
  }
  return plan_from_json(j);
}

std::variant<std::vector<int>, PlanCycleError> validate_dependencies(
    const Plan& p) {
  const std::size_t n = p.steps.size();
  std::map<int, std::vector<int>> dependents;  // step -> steps that wait on it
  std::map<int, int> in_degree;
  for (const auto& s : p.steps) in_degree[s.step] = 0;
  for (const auto& s : p.steps) {
    for (int d : s.depends_on) {
      if (!in_degree.count(d)) continue;  // constructed plans may dangle; ignore
      dependents[d].push_back(s.step);
      ++in_degree[s.step];
    }
  }

  std::set<int> ready;
  for (const auto& [step, deg] : in_degree)
    if (deg == 0) ready.insert(step);

  std::vector<int> order;
  while (!ready.empty()) {
    int next = *ready.begin();  // smallest ready step first
    ready.erase(ready.begin());
    order.push_back(next);
    for (int dep : dependents[next]) {
      if (--in_degree[dep] == 0) ready.insert(dep);
    }
  }
  if (order.size() == n) return order;

  // extract one cycle from the leftover subgraph by walking dependencies
  std::set<int> leftover;
  for (const auto& [step, deg] : in_degree)
    if (deg > 0) leftover.insert(step);
  std::map<int, const PlanStep*> by_number;
  for (const auto& s : p.steps) by_number[s.step] = &s;

  int start = *leftover.begin();
  std::vector<int> path;
  std::set<int> on_path;
  int cur = start;
  while (!on_path.count(cur)) {
    path.push_back(cur);
    on_path.insert(cur);
    const PlanStep* s = by_number[cur];
    int next = -1;
    for (int d : s->depends_on) {
      if (leftover.count(d)) {
        next = d;
        break;
      }
    }
    cur = next;  // leftover steps always have a leftover dependency
  }
  PlanCycleError err;
  auto it = std::find(path.begin(), path.end(), cur);
  err.cycle_steps.assign(it, path.end());
  std::sort(err.cycle_steps.begin(), err.cycle_steps.end());
  return err;
}

nlohmann::json plan_to_json(const Plan& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : p.steps) {
    nlohmann::json e{{"step", s.step},
                     {"skill", to_string(s.skill)},
                     {"instruction", s.instruction},
                     {"input", s.input}};
    e["output"] = s.output.is_null() ? nlohmann::json("") : s.output;
    if (!is_default_chain(s)) e["depends_on"] = s.depends_on;
    if (!s.payload.is_null()) e["payload"] = s.payload;
    steps.push_back(std::move(e));
  }
  return {{"complex_instruction", p.complex_instruction}, {"plan", steps}};
}

std::string render_plan(const Plan& p) {
  if (p.steps.empty())
    throw PlanParseError("cannot render a plan with no steps");
  return plan_to_json(p).dump(2);
}

}  // namespace tabagent
