#pragma once
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "roster/diff.hpp"
#include "roster/domain.hpp"

namespace roster {

enum class PlanKind { team, tasks, replan };
enum class ReflectKind { team_review, task_review, difference_judgement, local_fix };

const char* to_string(PlanKind k);
const char* to_string(ReflectKind k);

struct PlanRequest {
    PlanKind kind = PlanKind::team;
    ScenarioSpec scenario;
    std::vector<std::string> context; // profile, findings, prior attempts
    std::optional<AgentNode> team;    // task-stage requests carry the accepted team

    // Replan requests carry the full input set: global state G, recommendation,
    // the old strategy and the scenario prompt (the query rides on scenario).
    std::optional<Json> global_state;
    std::optional<Json> recommendation;
    std::optional<Strategy> old_strategy;
    std::string scenario_prompt;

    void check() const; // throws ValueError when a replan request is incomplete
};

struct DiffItem {
    std::string diff_id;
    std::string path;
    ChangeKind change = ChangeKind::modify;
    Json old_value;
    Json new_value;
    std::string justification;
};

struct ReflectRequest {
    ReflectKind kind = ReflectKind::team_review;
    Json subject; // strategy draft + findings, worker error, etc.
    std::vector<std::string> evidence;
    std::optional<DiffItem> diff; // difference judgements carry exactly one item
    std::optional<Json> global_state;
    std::optional<Json> recommendation;

    void check() const;
};

/// Corrective action emitted by LocalFix reflections and monitor instructions.
struct FixPatch {
    std::string action; // "retry" | "rebind"
    std::string task_id;
    std::string param;
    std::optional<Binding> binding;
};

enum class ReflectVerdict { pass, fail, improved, not_improved, fix };

const char* to_string(ReflectVerdict v);

struct ReflectResponse {
    ReflectVerdict verdict = ReflectVerdict::pass;
    std::string reason;
    std::optional<FixPatch> patch;
};

struct PlanDraft {
    PlanKind kind = PlanKind::team;
    std::optional<AgentNode> team;       // kind == team
    std::optional<TaskLists> task_lists; // kind == tasks
    std::optional<Strategy> strategy;    // kind == replan
    std::string justification;           // optional, used by scoped diff regeneration
};

// The LLM boundary. Every judgment call in the runtime goes through one of
// these three entry points; everything else is deterministic.
class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual PlanDraft plan(const PlanRequest& req) = 0;
    virtual ReflectResponse reflect(const ReflectRequest& req) = 0;
    virtual std::vector<DiffItem> diff(const Strategy& s_new, const Strategy& s_old) = 0;
};

Json to_json(const PlanRequest& r);
Json to_json(const ReflectRequest& r);
Json to_json(const DiffItem& d);
Json to_json(const FixPatch& p);
FixPatch fix_patch_from_json(const Json& j);

/// Throws DiffInconsistent unless the item paths equal the structural diff
/// path set for (s_old -> s_new) exactly.
void gate_diff_items(const std::vector<DiffItem>& items, const Strategy& s_new,
                     const Strategy& s_old);

namespace detail {
// Response bodies share one schema between the scripted and remote backends.
PlanDraft parse_plan_response(PlanKind kind, const Json& body, const std::string& where);
ReflectResponse parse_reflect_response(ReflectKind kind, const Json& body,
                                       const std::string& where);
std::vector<DiffItem> parse_diff_response(const Json& body, const Strategy& s_new,
                                          const Strategy& s_old, const std::string& where);
} // namespace detail

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

struct ScriptEntry {
    Json expect;  // {"op": "plan"|"reflect"|"diff", "kind"?: ..., "contains"?: ...}
    Json respond; // op-specific body
    std::size_t line = 0;
};

/// Parses the script schema (ordered expect/respond entries). Throws
/// ScriptError with a line number on malformed input.
std::vector<ScriptEntry> parse_script(const Json& array, const std::string& origin = "script");
std::vector<ScriptEntry> parse_script_text(const std::string& text,
                                           const std::string& origin = "script");

// Deterministic replay backend: entries are consumed strictly in order; a
// request that does not match the next entry raises ScriptMismatch naming the
// expected matcher, and running past the end raises ScriptExhausted.
class ScriptedReasoner : public Reasoner {
public:
    explicit ScriptedReasoner(std::vector<ScriptEntry> entries);

    PlanDraft plan(const PlanRequest& req) override;
    ReflectResponse reflect(const ReflectRequest& req) override;
    std::vector<DiffItem> diff(const Strategy& s_new, const Strategy& s_old) override;

    std::size_t consumed() const;
    std::size_t remaining() const;

private:
    Json take(const Json& request);

    std::vector<ScriptEntry> entries_;
    std::size_t cursor_ = 0;
    mutable std::mutex mu_;
};

std::unique_ptr<ScriptedReasoner> load_script(const std::string& source_text,
                                              const std::string& origin = "script");

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

// Proxies requests to an HTTP endpoint with a single `complete` action.
// Temperature is pinned to 0 in every envelope. Transport or protocol
// failures raise BackendError; response bodies share the script schema.
class RemoteReasoner : public Reasoner {
public:
    explicit RemoteReasoner(std::string endpoint, std::string api_token = {});

    PlanDraft plan(const PlanRequest& req) override;
    ReflectResponse reflect(const ReflectRequest& req) override;
    std::vector<DiffItem> diff(const Strategy& s_new, const Strategy& s_old) override;

private:
    Json complete(const Json& request);

    std::string host_;
    int port_ = 80;
    std::string path_;
    std::string token_;
    mutable std::mutex mu_;
};

} // namespace roster
