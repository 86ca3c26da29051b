#include "roster/planner.hpp"

#include <cctype>

#include "roster/text.hpp"

namespace roster {

const char* const kDefaultProfileTemplate =
    "GOAL: {goal}\n"
    "DESCRIPTION: {description}\n"
    "CONSTRAINTS: {constraints}\n"
    "AGENTSET: {agentset}\n"
    "TOOLKIT: {toolkit}";

namespace {

std::string render_description(const ScenarioSpec& s) {
    std::string out = s.description.text;
    if (!s.description.tables.empty()) {
        std::vector<std::string> parts;
        for (const auto& t : s.description.tables) parts.push_back(t.name + " (" + t.summary + ")");
        out += " | tables: " + join(parts, ", ");
    }
    return out;
}

std::string render_slot(const std::string& slot, const ScenarioSpec& s) {
    if (slot == "goal") return s.goal;
    if (slot == "description") return render_description(s);
    if (slot == "constraints")
        return s.constraints.empty() ? "(none)" : join(s.constraints, "; ");
    if (slot == "agentset") {
        std::vector<std::string> roles;
        for (Role r : {Role::tasker, Role::extractor, Role::retriever, Role::painter})
            if (s.agentset.count(r)) roles.emplace_back(to_string(r));
        return join(roles, ", ");
    }
    if (slot == "toolkit") {
        if (s.toolkit.empty()) return "(none)";
        std::vector<std::string> names;
        for (const auto& t : s.toolkit) names.push_back(t.name);
        return join(names, ", ");
    }
    throw TemplateError("unknown template slot '{" + slot + "}'");
}

} // namespace

std::string build_profile(const std::string& tmpl, const ScenarioSpec& scenario) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out += tmpl[i++];
            continue;
        }
        std::size_t close = tmpl.find('}', i);
        if (close == std::string::npos) {
            out += tmpl.substr(i);
            break;
        }
        std::string slot = tmpl.substr(i + 1, close - i - 1);
        bool ident = !slot.empty() && std::all_of(slot.begin(), slot.end(), [](char c) {
            return std::islower(static_cast<unsigned char>(c)) || c == '_';
        });
        if (!ident) { // literal braces pass through
            out += tmpl.substr(i, close - i + 1);
        } else {
            out += render_slot(slot, scenario);
        }
        i = close + 1;
    }
    return out;
}

Json to_json(const InitAttempt& a) {
    Json findings = Json::array();
    for (const auto& f : a.findings) findings.push_back(to_json(f));
    return Json{{"stage", a.stage}, {"attempt", a.attempt}, {"findings", findings},
                {"verdict", a.verdict}};
}

namespace {

std::vector<std::string> findings_context(const std::vector<ValidationFinding>& findings) {
    std::vector<std::string> out;
    for (const auto& f : findings)
        out.push_back(std::string("finding: ") + to_string(f.check) + " " +
                      to_string(f.severity) + " [" + f.subject + "] " + f.detail);
    return out;
}

} // namespace

InitResult initialize(const ScenarioSpec& scenario, Reasoner& reasoner, MemoryStore& memory,
                      const InitConfig& config) {
    scenario.check();
    InitResult result;
    result.profile = build_profile(config.profile_template, scenario);

    std::vector<std::string> context{result.profile};
    const int attempts_per_stage = 1 + config.max_self_retries;

    // Stage 1: agent team. Deterministic validators run before the reasoner's
    // review and short-circuit it on error findings.
    AgentNode team;
    bool team_ok = false;
    std::vector<ValidationFinding> last_findings;
    for (int attempt = 0; attempt < attempts_per_stage && !team_ok; ++attempt) {
        result.team_retries = attempt;
        PlanRequest req;
        req.kind = PlanKind::team;
        req.scenario = scenario;
        req.context = context;
        PlanDraft draft = reasoner.plan(req);
        if (!draft.team) throw ScriptError("team plan response carried no agent tree");

        std::vector<ValidationFinding> findings;
        try {
            findings = validate_team(*draft.team, scenario);
        } catch (const StructureError& e) {
            findings.push_back({CheckKind::system_individual_coupling, Severity::error,
                                draft.team->spec.agent_id, e.what()});
        }
        last_findings = findings;
        if (has_errors(findings)) {
            result.trace.push_back({"team", attempt, findings, "validator"});
            auto lines = findings_context(findings);
            context.insert(context.end(), lines.begin(), lines.end());
            continue;
        }

        ReflectRequest review;
        review.kind = ReflectKind::team_review;
        review.subject = Json{{"agents", to_json(*draft.team)},
                              {"findings", Json::array()}};
        for (const auto& f : findings) review.subject["findings"].push_back(to_json(f));
        review.evidence = context;
        ReflectResponse resp = reasoner.reflect(review);
        if (resp.verdict == ReflectVerdict::pass) {
            result.trace.push_back({"team", attempt, findings, "pass"});
            team = *draft.team;
            team_ok = true;
        } else {
            result.trace.push_back({"team", attempt, findings, "fail: " + resp.reason});
            context.push_back("review: " + resp.reason);
        }
    }
    if (!team_ok)
        throw InitializationFailed("team planning exhausted " +
                                       std::to_string(attempts_per_stage) + " attempts",
                                   last_findings);

    // Stage 2: task lists.
    TaskLists task_lists;
    bool tasks_ok = false;
    for (int attempt = 0; attempt < attempts_per_stage && !tasks_ok; ++attempt) {
        result.task_retries = attempt;
        PlanRequest req;
        req.kind = PlanKind::tasks;
        req.scenario = scenario;
        req.context = context;
        req.team = team;
        PlanDraft draft = reasoner.plan(req);
        if (!draft.task_lists) throw ScriptError("task plan response carried no task lists");

        auto findings = validate_tasks(*draft.task_lists, scenario.toolkit, scenario.constraints);
        // Cross-check list owners against the accepted team.
        std::set<std::string> team_ids;
        for (const auto* a : flatten_tree(team)) team_ids.insert(a->spec.agent_id);
        for (const auto& [agent, tasks] : *draft.task_lists)
            if (team_ids.count(agent) == 0)
                findings.push_back({CheckKind::task_interdependency, Severity::error, agent,
                                    "task list for agent not present in the team"});
        last_findings = findings;
        if (has_errors(findings)) {
            result.trace.push_back({"tasks", attempt, findings, "validator"});
            auto lines = findings_context(findings);
            context.insert(context.end(), lines.begin(), lines.end());
            continue;
        }

        ReflectRequest review;
        review.kind = ReflectKind::task_review;
        review.subject = Json{{"task_lists", to_json(*draft.task_lists)},
                              {"findings", Json::array()}};
        for (const auto& f : findings) review.subject["findings"].push_back(to_json(f));
        review.evidence = context;
        ReflectResponse resp = reasoner.reflect(review);
        if (resp.verdict == ReflectVerdict::pass) {
            result.trace.push_back({"tasks", attempt, findings, "pass"});
            task_lists = *draft.task_lists;
            tasks_ok = true;
        } else {
            result.trace.push_back({"tasks", attempt, findings, "fail: " + resp.reason});
            context.push_back("review: " + resp.reason);
        }
    }
    if (!tasks_ok)
        throw InitializationFailed("task planning exhausted " +
                                       std::to_string(attempts_per_stage) + " attempts",
                                   last_findings);

    result.strategy.root = std::move(team);
    result.strategy.task_lists = std::move(task_lists);
    result.strategy.round = 0;
    result.strategy.provenance = Provenance::initial;
    result.strategy.normalize();

    memory.record(planner_owner(), Tier::short_term, canonical_text(to_json(result.strategy)),
                  {"strategy", "strategy:round0"}, 0.9, 0);
    Json trace = Json::array();
    for (const auto& a : result.trace) trace.push_back(to_json(a));
    memory.record(planner_owner(), Tier::short_term, canonical_text(trace), {"trace", "init"},
                  0.6, 0);
    return result;
}

} // namespace roster
