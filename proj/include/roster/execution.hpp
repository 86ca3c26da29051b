#pragma once
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "roster/bus.hpp"
#include "roster/domain.hpp"
#include "roster/memory.hpp"
#include "roster/reasoner.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Tools
// ---------------------------------------------------------------------------

struct TaskError {
    std::string tool;
    std::string inputs_digest;
    std::string failure_class; // transient | persistent | timeout | schema | binding | tool
    std::string message;
};

using ToolResult = std::variant<Json, TaskError>;
using ToolFn = std::function<ToolResult(const Json& inputs)>;

/// In-memory tabular fixtures, keyed by table name.
/// Each table is {"columns":[{"name","type"}...], "rows":[[...]...]}.
using FixtureTables = std::map<std::string, Json>;

// Pluggable tool surface; fault hooks wrap each apply call.
class ToolRegistry {
public:
    void add(ToolSpec spec, ToolFn fn);
    const ToolSpec* spec(const std::string& name) const;
    std::vector<ToolSpec> specs() const;
    ToolResult apply(const std::string& name, const Json& inputs) const;

    /// table_load / row_filter / aggregate / text_extract / chart_spec over
    /// the given fixtures.
    static ToolRegistry builtin(FixtureTables tables);
    /// Schema-only tool whose outputs echo its inputs by position.
    static ToolFn identity_fn(ToolSpec spec);

private:
    std::vector<std::pair<ToolSpec, ToolFn>> tools_;
};

/// Built-in tool specs (the fixture toolkit).
std::vector<ToolSpec> builtin_tool_specs();

// Injection points consulted around each tool apply.
class FaultHook {
public:
    virtual ~FaultHook() = default;
    /// Failure to inject instead of running the tool, or nullopt.
    virtual std::optional<TaskError> before_apply(const TaskEntry& task, int round) = 0;
    /// May corrupt outputs after a successful apply.
    virtual void after_apply(const TaskEntry& task, int round, Json& outputs) = 0;
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReflectionEntry {
    int attempt = 0;
    std::string error;
    std::string fix; // rendered patch, empty when none was produced
};

struct ErrorReportDetailed {
    std::string worker;
    std::vector<std::string> logs;
    std::string error_message;
    std::vector<std::string> history; // recent task outcomes
    std::vector<ReflectionEntry> reflection_trace;
    std::set<std::string> keywords;
    std::string task_id;
    std::string failure_class;
};

struct StatusReportNormal {
    std::string worker;
    std::vector<std::string> results;
    std::vector<std::string> context;
};

Json to_json(const ReflectionEntry& e);
Json to_json(const ErrorReportDetailed& r);
Json to_json(const StatusReportNormal& r);

/// Lowercased tokens from the error message plus the failure-class label,
/// stop-words removed; the monitor's classifier input.
std::set<std::string> report_keywords(const std::string& error_message,
                                      const std::string& failure_class);

/// Shape check for a value against a semantic type label (null never
/// conforms; unknown labels only need presence).
bool value_conforms(const Json& value, const std::string& type);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Runs one tool call with fully resolved inputs. Outputs are checked against
/// the tool's output schema. Throws BindingError when `bindings` misses a
/// declared param; tool-level problems come back as TaskError values.
ToolResult execute_task(const TaskEntry& task, const Json& bindings, const ToolRegistry& tools,
                        FaultHook* faults = nullptr, int round = 0);

struct SelfCorrectOutcome {
    std::optional<Json> outputs; // set on success
    std::vector<ReflectionEntry> trace;
    std::optional<TaskError> final_error; // set on escalation
    int reflect_calls = 0;
};

/// Bounded self-correction: up to `budget` LocalFix reflections, each applied
/// patch re-executes the task. A fail verdict escalates immediately; the
/// reflection trace holds one entry per failed attempt (initial + retries).
/// `resolve` produces the task's resolved inputs (rebind patches mutate the
/// task first). Escalation is a value, not an error.
SelfCorrectOutcome self_correct(const std::string& worker, TaskEntry& task,
                                const TaskError& initial_error,
                                const std::function<ToolResult(const TaskEntry&)>& resolve,
                                const ToolRegistry& tools, FaultHook* faults, Reasoner& reasoner,
                                int budget, int round);

struct AlertContext {
    ErrorReportDetailed detailed;
    std::vector<StatusReportNormal> peer_reports;
    std::string failing_agent;
    std::string failing_task;
    TaskError error;
    std::map<std::string, Json> round_results; // task_id -> outputs so far
};

/// Broadcast-and-pause protocol: ErrorAlert to everyone, every live peer
/// acknowledges and files its normal status report, then the failing worker
/// files the detailed report.
void raise_alert(MessageBus& bus, const ErrorReportDetailed& detailed,
                 const std::vector<StatusReportNormal>& peer_reports, int round,
                 const std::string& monitor_id = "monitor");

/// Registers any of the strategy's agents the bus does not know yet (workers)
/// — used after re-planning introduces new agents.
void ensure_registered(MessageBus& bus, const Strategy& strategy);

struct RoundOptions {
    int self_correct_budget = 2;
    std::string monitor_id = "monitor";
};

struct RoundOutcome {
    enum class Kind { completed, paused };
    Kind kind = Kind::completed;
    Json outputs; // output_key -> value, completion order
    std::optional<AlertContext> alert;
};

// One execution round over a validated strategy: the tasker drives workers in
// phase order (extractors, retrievers, painters, then its own tasks), tasks
// run in a dependency-consistent order, outcomes land in sensory memory, and
// an exhausted self-correction triggers the alert protocol. resume() applies
// a monitor instruction and continues the same round.
class RoundExecution {
public:
    RoundExecution(Strategy& strategy, const ScenarioSpec& scenario, ToolRegistry& tools,
                   Reasoner& reasoner, MessageBus& bus, MemoryStore& memory, FaultHook* faults,
                   RoundOptions options = {});

    RoundOutcome run();
    RoundOutcome resume(const std::vector<FixPatch>& instruction_steps);

    const std::vector<std::string>& invocation_order() const { return invocation_order_; }
    const std::map<std::string, int>& reflection_counts() const { return reflection_counts_; }
    const std::map<std::string, Json>& results() const { return results_; }

private:
    struct Slot {
        std::string agent;
        std::size_t task_index; // into the agent's task list
        int phase;
        int agent_dfs;
        bool done = false;
    };

    RoundOutcome drive();
    ToolResult resolve_inputs(const TaskEntry& task) const;
    TaskEntry& task_ref(const Slot& slot);
    RoundOutcome pause_with_alert(const std::string& agent, TaskEntry& task,
                                  const SelfCorrectOutcome& outcome);
    void record_outcome(const std::string& agent, const TaskEntry& task, bool ok,
                        const std::string& note);

    Strategy& strategy_;
    const ScenarioSpec& scenario_;
    ToolRegistry& tools_;
    Reasoner& reasoner_;
    MessageBus& bus_;
    MemoryStore& memory_;
    FaultHook* faults_;
    RoundOptions options_;

    std::vector<Slot> slots_;
    std::map<std::string, Json> results_; // task_id -> outputs
    std::vector<std::pair<std::string, std::string>> completion_order_; // task, output_key
    std::map<std::string, std::vector<std::string>> logs_;
    std::map<std::string, std::vector<std::string>> history_;
    std::map<std::string, int> reflection_counts_;
    std::vector<std::string> invocation_order_;
    std::optional<std::string> pending_task_; // failing task awaiting instruction
};

/// One-shot wrapper: builds a RoundExecution and runs it to completion/pause.
RoundOutcome run_round(Strategy& strategy, const ScenarioSpec& scenario, ToolRegistry& tools,
                       Reasoner& reasoner, MessageBus& bus, MemoryStore& memory,
                       FaultHook* faults = nullptr, RoundOptions options = {});

} // namespace roster
