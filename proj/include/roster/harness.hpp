#pragma once
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roster/execution.hpp"
#include "roster/monitor.hpp"
#include "roster/planner.hpp"
#include "roster/replanner.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

struct FaultSpec {
    std::string target; // task_id or tool name
    std::string mode;   // fail_once | fail_always | corrupt_output | delay_steps
    int trigger_round = 0;
    int delay_steps = 0;  // delay_steps mode: failing attempts before recovery
    std::string message;  // error text override (drives classification)
};

Json to_json(const FaultSpec& f);
FaultSpec fault_from_json(const Json& j);

// Stateful application of a fault schedule; one instance per run.
class FaultSchedule : public FaultHook {
public:
    explicit FaultSchedule(std::vector<FaultSpec> faults);

    std::optional<TaskError> before_apply(const TaskEntry& task, int round) override;
    void after_apply(const TaskEntry& task, int round, Json& outputs) override;

    int injected_count() const { return injected_; }

private:
    struct Armed {
        FaultSpec spec;
        int fired = 0;
    };
    std::vector<Armed> faults_;
    int injected_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

struct Toggles {
    bool monitor = true;
    bool gap_narrow = true;
    bool memory = true;
    bool self_reflection = true;
};

struct LoadedScenario {
    ScenarioSpec scenario;
    FixtureTables tables;
    std::vector<ScriptEntry> script;
    std::vector<FaultSpec> faults;
    ErrorTree error_tree;
    Toggles toggles;
    std::vector<GapRule> rules;
    std::map<std::string, std::string> subtask_types; // task_id -> category
    std::vector<ToolSpec> custom_tools;               // identity-backed extras
};

/// Parses one scenario document (sections: scenario, tools, script, faults,
/// error_tree, toggles, rules). All cross-references (fault targets, tool
/// names) resolve at load time; failures raise ScenarioError with a location.
/// Loading is side-effect-free.
LoadedScenario load_scenario_text(const std::string& text, const std::string& origin);
LoadedScenario load_scenario(const std::string& path);

/// Canonical serialization of a loaded scenario (round-trips through
/// load_scenario_text).
Json to_json(const LoadedScenario& s);

// ---------------------------------------------------------------------------
// Runs and reports
// ---------------------------------------------------------------------------

struct RunReport {
    bool success = false;
    std::string outcome; // completed | initialization_failed | replan_exhausted |
                         // monitor_disabled | replan_budget_exhausted | stalled | error
    std::string final_answer_digest;
    int worker_count = 0;
    std::vector<std::pair<std::string, int>> self_reflection_counts; // agent -> LocalFix calls
    int replanning_count = 0;
    int instruction_count = 0;
    int recommendation_count = 0;
    std::vector<std::pair<std::string, int>> subtask_type_histogram;
    std::string event_log_digest;
    std::uint64_t seed = 0;
};

Json report_to_json(const RunReport& r);

enum class ReportFormat { text, structured };

/// Structured output is byte-stable for equal reports; text includes the four
/// metric groups (subtask mix, team size, self-reflection/replanning,
/// instruction/recommendation split).
std::string emit_report(const RunReport& report, ReportFormat format);

struct ReplanAudit {
    std::string s_old_digest;
    std::string s_opt_digest;
    std::vector<std::string> accepted_paths;
    Strategy s_old;
    Strategy s_opt;
};

struct RunResult {
    RunReport report;
    std::string message_log;          // JSONL export of every delivered copy
    std::vector<ReplanAudit> replans; // one entry per successful replan
    std::vector<InitAttempt> init_trace;
    std::optional<Strategy> final_strategy;
};

struct RunOptions {
    std::uint64_t seed = 0;
    Toggles toggle_override; // ANDed with the scenario's toggles
    std::shared_ptr<Reasoner> reasoner; // defaults to the scenario script
    int max_replans = 3;
    int max_alert_episodes = 32; // safety stop for runaway scenarios
};

/// Drives the full lifecycle: initialize, execute rounds, classify pauses,
/// apply instructions or replan, until completion or a terminal failure.
/// Failures are report outcomes, not exceptions. Identical (scenario, seed)
/// pairs produce byte-identical structured reports and log digests.
RunResult run_scenario(const LoadedScenario& scenario, const RunOptions& options = {});

} // namespace roster
