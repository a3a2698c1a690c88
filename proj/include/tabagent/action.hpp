#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tabagent/feature_dsl.hpp"
#include "tabagent/table.hpp"

namespace tabagent {

// Listing-2 wire shape: {"tool": ..., "args": {...}}
struct ToolCallAction {
  std::string tool;
  nlohmann::json args = nlohmann::json::object();

  nlohmann::json to_json() const { return {{"tool", tool}, {"args", args}}; }
  static ToolCallAction from_json(const nlohmann::json& j) {
    ToolCallAction a;
    a.tool = j.at("tool").get<std::string>();
    a.args = j.value("args", nlohmann::json::object());
    return a;
  }
};

struct SymbolicAction {
  FeatureProgram program;
};

// report fragments only; never touches the table
struct DirectGenAction {
  std::string text;
};

using Action = std::variant<ToolCallAction, SymbolicAction, DirectGenAction>;

std::string action_kind(const Action& a);
std::string action_summary(const Action& a);

struct ToolParam {
  std::string name;
  std::string kind;  // string | int | float | column_name | path | number_list
  bool required = false;
  // for column_name params: require this column kind when set
  std::optional<ColumnKind> column_kind;
};

struct ToolSpec {
  std::string name;
  std::vector<ToolParam> params;
  std::string effect;  // pure | writes_state | writes_file
  std::string description;
};

class ToolRegistry;

// user tools receive validated args and the current table; a returned table
// replaces the working table
struct UserToolResult {
  nlohmann::json result;
  std::optional<Table> table;
};
using UserToolFn =
    std::function<UserToolResult(const nlohmann::json& args, const Table& current)>;

class ToolRegistry {
 public:
  // profile, export_csv, chart_spec, gaussian_noise, weekly_anomaly_flag,
  // evaluate, clean, finish + the paper-shaped aliases matplotlib.hist and
  // file.export_csv
  static ToolRegistry with_builtins();

  void register_tool(ToolSpec spec, UserToolFn fn = nullptr);
  bool remove_tool(const std::string& name);
  const ToolSpec* find(const std::string& name) const;
  const UserToolFn* user_fn(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, ToolSpec> specs_;
  std::map<std::string, UserToolFn> user_fns_;
};

}  // namespace tabagent
