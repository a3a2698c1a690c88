#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabagent/action.hpp"
#include "tabagent/cleaning.hpp"
#include "tabagent/evaluator.hpp"
#include "tabagent/plan.hpp"
#include "tabagent/table.hpp"

namespace tabagent {

using ExternalModels =
    std::map<std::string, std::function<std::unique_ptr<DownstreamModel>()>>;

struct ExecRecord {
  int step = 0;
  std::string action_kind;  // tool_call | symbolic | direct_gen
  std::string summary;
  std::string started_at;   // wall clock; excluded from the determinism hash
  double elapsed_sec = 0.0;
  bool ok = true;
  std::string error_code;
  std::string error_detail;
  std::string state_delta;
  std::vector<std::string> artifacts;
  nlohmann::json detail;  // feature log, tool result, ...

  nlohmann::json to_json() const;
};

struct RunState {
  Table table;
  Schema schema;
  std::vector<ExecRecord> records;  // short-term memory, ordered
  std::map<std::string, nlohmann::json> artifact_blobs;
  std::map<std::string, std::string> artifact_files;  // name -> relative path
  std::uint64_t seed = 42;
  int planner_calls = 0;  // every backend invocation (route + plan + repair)
  int plan_calls = 0;     // plan-generation requests only
  int tool_calls = 0;
  std::string out_dir;  // empty: file-writing tools keep blobs only
  std::optional<MetricResult> metric;
  std::string task_kind;  // classification | regression
  const ExternalModels* external_models = nullptr;
  std::string external_model_name;
  double step_time_budget_sec = 30.0;
};

struct ToolResult {
  bool ok = true;
  std::string error_code;
  std::string error_detail;
  nlohmann::json result;
  std::optional<Table> table;
  std::optional<Schema> schema;
  std::vector<std::pair<std::string, nlohmann::json>> blobs;
  std::vector<std::pair<std::string, std::string>> files;  // name -> rel path
  std::optional<MetricResult> metric;
};

// Runs one registered tool against the state. step_number seeds the
// per-step RNG stream of stochastic tools.
ToolResult invoke_tool(const std::string& name, const nlohmann::json& args,
                       const RunState& state, const ToolRegistry& registry,
                       int step_number = 0, bool allow_writes = true);

class GroundedStep;  // grounding.hpp

// Atomic transition: on success the returned state carries the applied
// action and its record; on failure the state is unchanged except for the
// error record.
RunState execute_step(const GroundedStep& g, const RunState& state,
                      const ToolRegistry& registry);

// ---------------------------------------------------------------------------
// Long-term memory

struct TrajectoryEntry {
  std::string task_signature;  // hash of card + instruction
  nlohmann::json plan;
  nlohmann::json step_outcomes = nlohmann::json::array();
  std::optional<double> final_metric;
  std::string metric_kind;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::vector<double> profile_vector;

  nlohmann::json to_json() const;
  static TrajectoryEntry from_json(const nlohmann::json& j);
};

// [log(n_rows), log(n_features+1), frac numeric, frac categorical,
//  mean missing_ratio, task one-hot(2)] over feature columns
std::vector<double> profile_feature_vector(const DatasetCard& card,
                                           const std::vector<ColumnProfile>& profiles);

std::string task_signature(const DatasetCard& card, const std::string& instruction);

// One JSONL line, advisory write lock, fsync before returning.
void record_trajectory(const TrajectoryEntry& entry, const std::string& store_path);

struct RecallHit {
  TrajectoryEntry entry;
  double similarity = 0.0;
};

struct RecallResult {
  std::optional<RecallHit> hit;
  std::vector<std::string> warnings;  // corrupt lines skipped
};

// Highest cosine similarity >= 0.95 wins; ties by higher final metric, then
// newer timestamp.
RecallResult recall_similar(const DatasetCard& card,
                            const std::vector<ColumnProfile>& profiles,
                            const std::string& store_path);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// canonical per-column histogram counts used by chart tooling and reports:
// equal-width bins over [min, max], last bin right-closed
std::vector<std::size_t> histogram_counts(const std::vector<double>& values,
                                          int bins, double& lo_out, double& hi_out);

std::string now_timestamp();

}  // namespace tabagent
