#pragma once
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "roster/errors.hpp"
#include "roster/serialize.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Roles and tools
// ---------------------------------------------------------------------------

enum class Role { tasker, extractor, retriever, painter };

const char* to_string(Role role);
std::optional<Role> role_from_string(const std::string& name);

/// Execution phase rank: extractors run first, then retrievers, then painters,
/// with the tasker's own tasks last.
int phase_rank(Role role);

struct SchemaField {
    std::string name;
    std::string type; // opaque semantic label, compared by equality
};

struct ToolSpec {
    std::string name;
    std::vector<SchemaField> inputs;
    std::vector<SchemaField> outputs;
    bool deterministic = true;

    const SchemaField* find_input(const std::string& param) const;
    const SchemaField* find_output(const std::string& field) const;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct TableSummary {
    std::string name;
    std::string summary;
    std::vector<SchemaField> columns;
};

struct Description {
    std::string text;
    std::vector<TableSummary> tables;
};

struct ScenarioSpec {
    std::string goal;
    Description description;
    std::vector<std::string> constraints;
    std::set<Role> agentset;
    std::vector<ToolSpec> toolkit;
    std::string user_query;

    const ToolSpec* find_tool(const std::string& name) const;
    /// Throws ValueError when a construction invariant is violated.
    void check() const;
};

/// Machine-checkable constraint clauses; anything else is free text for the
/// reasoner and is not validator-checked.
struct Constraint {
    enum class Kind { max_agents, require_role, forbid_role, require_tool, free_text };
    Kind kind = Kind::free_text;
    int limit = 0;
    Role role = Role::tasker;
    std::string tool;
    std::string text;
};

Constraint parse_constraint(const std::string& text);

// ---------------------------------------------------------------------------
// Strategy
// ---------------------------------------------------------------------------

struct Binding {
    enum class Kind { literal, output_ref, scenario_ref };
    Kind kind = Kind::literal;
    Json literal;    // literal
    std::string ref; // "task_id.field" for output_ref, scenario field name otherwise

    static Binding make_literal(Json value);
    static Binding make_output_ref(std::string task_dot_field);
    static Binding make_scenario_ref(std::string field);

    /// Splits an output_ref into (task_id, field). Throws ValueError otherwise.
    std::pair<std::string, std::string> ref_parts() const;
};

bool operator==(const Binding& a, const Binding& b);

struct TaskEntry {
    std::string task_id;
    std::string tool;
    std::vector<std::pair<std::string, Binding>> inputs; // param -> binding, declaration order
    std::string output_key;
    std::vector<std::string> depends_on;
};

struct AgentSpec {
    std::string agent_id;
    Role role = Role::tasker;
    std::string profile;
    std::string template_id;
};

struct AgentNode {
    AgentSpec spec;
    std::vector<AgentNode> children;
};

/// Depth-first (pre-order) flatten of the agent tree.
std::vector<const AgentNode*> flatten_tree(const AgentNode& root);
std::size_t tree_size(const AgentNode& root);

using TaskLists = std::vector<std::pair<std::string, std::vector<TaskEntry>>>;

enum class Provenance { initial, replanned };

const char* to_string(Provenance p);

struct Strategy {
    AgentNode root;
    TaskLists task_lists; // one entry per agent, tree DFS order
    int round = 0;
    Provenance provenance = Provenance::initial;

    const std::vector<TaskEntry>* tasks_for(const std::string& agent_id) const;
    std::vector<TaskEntry>* tasks_for(const std::string& agent_id);
    const TaskEntry* find_task(const std::string& task_id) const;
    /// Owning agent of a task, empty if unknown.
    std::string agent_of_task(const std::string& task_id) const;
    /// Re-orders task_lists into tree DFS order and adds empty lists for
    /// agents that lack one. Drops nothing; unknown agents are kept at the end.
    void normalize();
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class CheckKind {
    compliance,
    scenario_compatibility,
    system_individual_coupling,
    task_interdependency,
    io_parameter_logic,
};

enum class Severity { error, warning };

const char* to_string(CheckKind c);
const char* to_string(Severity s);

struct ValidationFinding {
    CheckKind check = CheckKind::compliance;
    Severity severity = Severity::error;
    std::string subject; // agent_id or task_id; empty for strategy-scope findings
    std::string detail;
};

bool has_errors(const std::vector<ValidationFinding>& findings);
std::string render_findings(const std::vector<ValidationFinding>& findings);

/// Team-level reflection checks (compliance, scenario compatibility,
/// system-individual coupling). Throws StructureError on a malformed tree
/// (empty, duplicate agent ids).
std::vector<ValidationFinding> validate_team(const AgentNode& al, const ScenarioSpec& scenario);

/// Task-level reflection checks (interdependency, parameter logic, and
/// require_tool constraints when `constraints` is supplied). All problems are
/// findings; nothing throws.
std::vector<ValidationFinding> validate_tasks(const TaskLists& tl,
                                              const std::vector<ToolSpec>& toolkit,
                                              const std::vector<std::string>& constraints = {});

/// validate_team + validate_tasks + agent/task-list id cross-check.
std::vector<ValidationFinding> validate_strategy(const Strategy& s, const ScenarioSpec& scenario);

// ---------------------------------------------------------------------------
// Serialization (canonical field order, byte-stable)
// ---------------------------------------------------------------------------

Json to_json(const ToolSpec& t);
Json to_json(const ScenarioSpec& s);
Json to_json(const Binding& b);
Json to_json(const TaskEntry& t);
Json to_json(const AgentNode& n);
Json to_json(const TaskLists& tl);
Json to_json(const Strategy& s);
Json to_json(const ValidationFinding& f);

ToolSpec tool_from_json(const Json& j);
ScenarioSpec scenario_from_json(const Json& j);
Binding binding_from_json(const Json& j);
TaskEntry task_from_json(const Json& j);
AgentNode agent_tree_from_json(const Json& j);
TaskLists task_lists_from_json(const Json& j);
Strategy strategy_from_json(const Json& j);

std::string strategy_digest(const Strategy& s);

} // namespace roster
