#include "roster/domain.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "roster/text.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

const char* to_string(Role role) {
    switch (role) {
    case Role::tasker: return "tasker";
    case Role::extractor: return "extractor";
    case Role::retriever: return "retriever";
    case Role::painter: return "painter";
    }
    return "unknown";
}

std::optional<Role> role_from_string(const std::string& name) {
    if (name == "tasker") return Role::tasker;
    if (name == "extractor") return Role::extractor;
    if (name == "retriever") return Role::retriever;
    if (name == "painter") return Role::painter;
    return std::nullopt;
}

int phase_rank(Role role) {
    switch (role) {
    case Role::extractor: return 0;
    case Role::retriever: return 1;
    case Role::painter: return 2;
    case Role::tasker: return 3;
    }
    return 3;
}

const char* to_string(Provenance p) {
    return p == Provenance::initial ? "initial" : "replanned";
}

const char* to_string(CheckKind c) {
    switch (c) {
    case CheckKind::compliance: return "compliance";
    case CheckKind::scenario_compatibility: return "scenario_compatibility";
    case CheckKind::system_individual_coupling: return "system_individual_coupling";
    case CheckKind::task_interdependency: return "task_interdependency";
    case CheckKind::io_parameter_logic: return "io_parameter_logic";
    }
    return "unknown";
}

const char* to_string(Severity s) { return s == Severity::error ? "error" : "warning"; }

// ---------------------------------------------------------------------------
// ToolSpec / ScenarioSpec
// ---------------------------------------------------------------------------

const SchemaField* ToolSpec::find_input(const std::string& param) const {
    for (const auto& f : inputs)
        if (f.name == param) return &f;
    return nullptr;
}

const SchemaField* ToolSpec::find_output(const std::string& field) const {
    for (const auto& f : outputs)
        if (f.name == field) return &f;
    return nullptr;
}

const ToolSpec* ScenarioSpec::find_tool(const std::string& name) const {
    for (const auto& t : toolkit)
        if (t.name == name) return &t;
    return nullptr;
}

void ScenarioSpec::check() const {
    if (goal.empty()) throw ValueError("scenario: goal must be non-empty");
    if (description.text.empty()) throw ValueError("scenario: description must be non-empty");
    if (user_query.empty()) throw ValueError("scenario: user_query must be non-empty");
    std::set<std::string> names;
    for (const auto& t : toolkit) {
        if (!names.insert(t.name).second)
            throw ValueError("scenario: duplicate tool name '" + t.name + "'");
        std::set<std::string> params;
        for (const auto& f : t.inputs)
            if (!params.insert(f.name).second)
                throw ValueError("tool '" + t.name + "': duplicate input param '" + f.name + "'");
        std::set<std::string> fields;
        for (const auto& f : t.outputs)
            if (!fields.insert(f.name).second)
                throw ValueError("tool '" + t.name + "': duplicate output field '" + f.name + "'");
    }
}

Constraint parse_constraint(const std::string& text) {
    Constraint c;
    c.text = text;
    std::istringstream in(text);
    std::string head, arg;
    in >> head >> arg;
    std::string rest;
    if (in >> rest) return c; // more than two tokens: free text
    if (head == "max_agents" && !arg.empty()) {
        try {
            c.limit = std::stoi(arg);
        } catch (...) {
            return c;
        }
        c.kind = Constraint::Kind::max_agents;
        return c;
    }
    if ((head == "require_role" || head == "forbid_role") && !arg.empty()) {
        auto role = role_from_string(arg);
        if (!role) return c;
        c.role = *role;
        c.kind = head == "require_role" ? Constraint::Kind::require_role
                                        : Constraint::Kind::forbid_role;
        return c;
    }
    if (head == "require_tool" && !arg.empty()) {
        c.tool = arg;
        c.kind = Constraint::Kind::require_tool;
        return c;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Binding / TaskEntry
// ---------------------------------------------------------------------------

Binding Binding::make_literal(Json value) {
    Binding b;
    b.kind = Kind::literal;
    b.literal = std::move(value);
    return b;
}

Binding Binding::make_output_ref(std::string task_dot_field) {
    Binding b;
    b.kind = Kind::output_ref;
    b.ref = std::move(task_dot_field);
    return b;
}

Binding Binding::make_scenario_ref(std::string field) {
    Binding b;
    b.kind = Kind::scenario_ref;
    b.ref = std::move(field);
    return b;
}

std::pair<std::string, std::string> Binding::ref_parts() const {
    if (kind != Kind::output_ref) throw ValueError("binding is not an output reference");
    auto dot = ref.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == ref.size())
        throw ValueError("malformed output reference '" + ref + "'");
    return {ref.substr(0, dot), ref.substr(dot + 1)};
}

bool operator==(const Binding& a, const Binding& b) {
    return a.kind == b.kind && a.ref == b.ref && a.literal == b.literal;
}

// ---------------------------------------------------------------------------
// Strategy helpers
// ---------------------------------------------------------------------------

std::vector<const AgentNode*> flatten_tree(const AgentNode& root) {
    std::vector<const AgentNode*> out;
    std::function<void(const AgentNode&)> visit = [&](const AgentNode& n) {
        out.push_back(&n);
        for (const auto& c : n.children) visit(c);
    };
    visit(root);
    return out;
}

std::size_t tree_size(const AgentNode& root) { return flatten_tree(root).size(); }

const std::vector<TaskEntry>* Strategy::tasks_for(const std::string& agent_id) const {
    for (const auto& [agent, tasks] : task_lists)
        if (agent == agent_id) return &tasks;
    return nullptr;
}

std::vector<TaskEntry>* Strategy::tasks_for(const std::string& agent_id) {
    for (auto& [agent, tasks] : task_lists)
        if (agent == agent_id) return &tasks;
    return nullptr;
}

const TaskEntry* Strategy::find_task(const std::string& task_id) const {
    for (const auto& [agent, tasks] : task_lists)
        for (const auto& t : tasks)
            if (t.task_id == task_id) return &t;
    return nullptr;
}

std::string Strategy::agent_of_task(const std::string& task_id) const {
    for (const auto& [agent, tasks] : task_lists)
        for (const auto& t : tasks)
            if (t.task_id == task_id) return agent;
    return {};
}

void Strategy::normalize() {
    TaskLists ordered;
    for (const AgentNode* node : flatten_tree(root)) {
        const auto* tasks = tasks_for(node->spec.agent_id);
        ordered.emplace_back(node->spec.agent_id,
                             tasks ? *tasks : std::vector<TaskEntry>{});
    }
    std::set<std::string> known;
    for (const auto& [agent, tasks] : ordered) known.insert(agent);
    for (auto& [agent, tasks] : task_lists)
        if (known.count(agent) == 0) ordered.emplace_back(agent, std::move(tasks));
    task_lists = std::move(ordered);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

bool has_errors(const std::vector<ValidationFinding>& findings) {
    return std::any_of(findings.begin(), findings.end(),
                       [](const auto& f) { return f.severity == Severity::error; });
}

std::string render_findings(const std::vector<ValidationFinding>& findings) {
    std::vector<std::string> lines;
    lines.reserve(findings.size());
    for (const auto& f : findings)
        lines.push_back(std::string(to_string(f.check)) + " " + to_string(f.severity) + " [" +
                        f.subject + "] " + f.detail);
    return join(lines, "\n");
}

namespace {

// Data-source references in agent profiles are written `table:<name>`.
std::vector<std::string> profile_table_refs(const std::string& profile) {
    std::vector<std::string> refs;
    const std::string marker = "table:";
    std::size_t pos = 0;
    while ((pos = profile.find(marker, pos)) != std::string::npos) {
        pos += marker.size();
        std::string name;
        while (pos < profile.size() &&
               (std::isalnum(static_cast<unsigned char>(profile[pos])) || profile[pos] == '_'))
            name.push_back(profile[pos++]);
        if (!name.empty()) refs.push_back(name);
    }
    return refs;
}

} // namespace

std::vector<ValidationFinding> validate_team(const AgentNode& al, const ScenarioSpec& scenario) {
    if (al.spec.agent_id.empty()) throw StructureError("agent tree root has no id");
    auto agents = flatten_tree(al);
    std::set<std::string> ids;
    for (const auto* a : agents)
        if (!ids.insert(a->spec.agent_id).second)
            throw StructureError("duplicate agent id '" + a->spec.agent_id + "'");

    std::vector<ValidationFinding> findings;
    auto add = [&](CheckKind check, Severity sev, std::string subject, std::string detail) {
        findings.push_back({check, sev, std::move(subject), std::move(detail)});
    };

    if (al.spec.role != Role::tasker)
        add(CheckKind::system_individual_coupling, Severity::error, al.spec.agent_id,
            "root agent must be a tasker (control center), got " +
                std::string(to_string(al.spec.role)));

    // Compliance: agentset membership plus the machine-checkable constraints.
    for (const auto* a : agents)
        if (scenario.agentset.count(a->spec.role) == 0)
            add(CheckKind::compliance, Severity::error, a->spec.agent_id,
                std::string("role ") + to_string(a->spec.role) +
                    " is outside the scenario agentset");

    for (const auto& text : scenario.constraints) {
        Constraint c = parse_constraint(text);
        switch (c.kind) {
        case Constraint::Kind::max_agents:
            if (static_cast<int>(agents.size()) > c.limit)
                add(CheckKind::compliance, Severity::error, al.spec.agent_id,
                    "team of " + std::to_string(agents.size()) + " agents violates '" + text +
                        "'");
            break;
        case Constraint::Kind::require_role: {
            bool present = std::any_of(agents.begin(), agents.end(),
                                       [&](const auto* a) { return a->spec.role == c.role; });
            if (!present)
                add(CheckKind::compliance, Severity::error, al.spec.agent_id,
                    "no agent satisfies '" + text + "'");
            break;
        }
        case Constraint::Kind::forbid_role:
            for (const auto* a : agents)
                if (a->spec.role == c.role)
                    add(CheckKind::compliance, Severity::error, a->spec.agent_id,
                        "role violates '" + text + "'");
            break;
        case Constraint::Kind::require_tool:
        case Constraint::Kind::free_text:
            break; // require_tool is task-level; free text goes to the reasoner
        }
    }

    // Scenario compatibility: profile data-source names must exist in the
    // description's table index.
    std::set<std::string> tables;
    for (const auto& t : scenario.description.tables) tables.insert(t.name);
    for (const auto* a : agents)
        for (const auto& ref : profile_table_refs(a->spec.profile))
            if (tables.count(ref) == 0)
                add(CheckKind::scenario_compatibility, Severity::error, a->spec.agent_id,
                    "profile references unknown data source 'table:" + ref + "'");

    // Coupling: sibling call order must not place a later-phase worker before
    // an earlier-phase one (extractor -> retriever -> painter).
    std::function<void(const AgentNode&)> order_check = [&](const AgentNode& n) {
        int max_phase = -1;
        std::string max_agent;
        for (const auto& child : n.children) {
            if (child.spec.role != Role::tasker) {
                int p = phase_rank(child.spec.role);
                if (p < max_phase)
                    add(CheckKind::system_individual_coupling, Severity::error,
                        child.spec.agent_id,
                        std::string(to_string(child.spec.role)) + " is ordered after " +
                            max_agent + " in the call order");
                if (p > max_phase) {
                    max_phase = p;
                    max_agent = child.spec.agent_id;
                }
            }
            order_check(child);
        }
    };
    order_check(al);

    // Coupling: a painter with no data producers upstream is isolated.
    bool has_producer = std::any_of(agents.begin(), agents.end(), [](const auto* a) {
        return a->spec.role == Role::extractor || a->spec.role == Role::retriever;
    });
    if (!has_producer)
        for (const auto* a : agents)
            if (a->spec.role == Role::painter)
                add(CheckKind::system_individual_coupling, Severity::error, a->spec.agent_id,
                    "painter has no extractor or retriever to feed it");

    // Coupling: duplicate role + identical profile is redundant.
    std::set<std::pair<int, std::string>> seen;
    for (const auto* a : agents) {
        auto key = std::make_pair(static_cast<int>(a->spec.role), a->spec.profile);
        if (!seen.insert(key).second)
            add(CheckKind::system_individual_coupling, Severity::warning, a->spec.agent_id,
                std::string("redundant agent: duplicate ") + to_string(a->spec.role) +
                    " with identical profile");
    }

    return findings;
}

namespace {

struct TaskIndex {
    const TaskEntry* task = nullptr;
    std::string agent;
};

// Tarjan SCC over the dependency graph; components of size > 1 (or a
// self-loop) are cycles.
std::vector<std::vector<std::string>> dependency_cycles(
    const std::vector<std::string>& order,
    const std::map<std::string, std::vector<std::string>>& edges) {
    std::map<std::string, int> index, low;
    std::map<std::string, bool> on_stack;
    std::vector<std::string> stack;
    std::vector<std::vector<std::string>> cycles;
    int counter = 0;

    std::function<void(const std::string&)> strongconnect = [&](const std::string& v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        auto it = edges.find(v);
        if (it != edges.end())
            for (const auto& w : it->second) {
                if (edges.find(w) == edges.end() && index.find(w) == index.end()) continue;
                if (index.find(w) == index.end()) {
                    strongconnect(w);
                    low[v] = std::min(low[v], low[w]);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
            }
        if (low[v] == index[v]) {
            std::vector<std::string> comp;
            while (true) {
                std::string w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w);
                if (w == v) break;
            }
            bool self_loop = false;
            if (comp.size() == 1) {
                auto eit = edges.find(comp[0]);
                if (eit != edges.end())
                    self_loop = std::count(eit->second.begin(), eit->second.end(), comp[0]) > 0;
            }
            if (comp.size() > 1 || self_loop) {
                std::sort(comp.begin(), comp.end());
                cycles.push_back(std::move(comp));
            }
        }
    };

    for (const auto& v : order)
        if (index.find(v) == index.end()) strongconnect(v);
    std::sort(cycles.begin(), cycles.end());
    return cycles;
}

} // namespace

std::vector<ValidationFinding> validate_tasks(const TaskLists& tl,
                                              const std::vector<ToolSpec>& toolkit,
                                              const std::vector<std::string>& constraints) {
    std::vector<ValidationFinding> findings;
    auto add = [&](CheckKind check, Severity sev, std::string subject, std::string detail) {
        findings.push_back({check, sev, std::move(subject), std::move(detail)});
    };
    auto find_tool = [&](const std::string& name) -> const ToolSpec* {
        for (const auto& t : toolkit)
            if (t.name == name) return &t;
        return nullptr;
    };

    std::map<std::string, TaskIndex> tasks;
    std::vector<std::string> order;
    for (const auto& [agent, list] : tl)
        for (const auto& t : list) {
            if (tasks.count(t.task_id)) {
                add(CheckKind::task_interdependency, Severity::error, t.task_id,
                    "duplicate task id");
                continue;
            }
            tasks[t.task_id] = {&t, agent};
            order.push_back(t.task_id);
        }

    for (const auto& id : order) {
        const TaskEntry& t = *tasks[id].task;
        const ToolSpec* tool = find_tool(t.tool);
        if (!tool)
            add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                "unknown tool '" + t.tool + "'");

        for (const auto& dep : t.depends_on)
            if (tasks.find(dep) == tasks.end())
                add(CheckKind::task_interdependency, Severity::error, t.task_id,
                    "depends on unknown task '" + dep + "'");

        std::set<std::string> bound;
        for (const auto& [param, binding] : t.inputs) {
            bound.insert(param);
            if (tool && !tool->find_input(param))
                add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                    "binding for unknown param '" + param + "' of tool '" + t.tool + "'");
            if (binding.kind == Binding::Kind::output_ref) {
                std::pair<std::string, std::string> parts;
                try {
                    parts = binding.ref_parts();
                } catch (const ValueError& e) {
                    add(CheckKind::io_parameter_logic, Severity::error, t.task_id, e.what());
                    continue;
                }
                auto up = tasks.find(parts.first);
                if (up == tasks.end()) {
                    add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                        "unresolved binding '" + binding.ref + "': unknown task");
                    continue;
                }
                const ToolSpec* up_tool = find_tool(up->second.task->tool);
                const SchemaField* field =
                    up_tool ? up_tool->find_output(parts.second) : nullptr;
                if (up_tool && !field)
                    add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                        "unresolved binding '" + binding.ref + "': no such output field");
                if (tool && field) {
                    const SchemaField* p = tool->find_input(param);
                    if (p && p->type != field->type)
                        add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                            "type mismatch on '" + binding.ref + "': " + field->type +
                                " does not feed " + p->type + " param '" + param + "'");
                }
                if (std::count(t.depends_on.begin(), t.depends_on.end(), parts.first) == 0)
                    add(CheckKind::task_interdependency, Severity::error, t.task_id,
                        "reads '" + binding.ref + "' but does not depend on '" + parts.first +
                            "'");
            } else if (binding.kind == Binding::Kind::scenario_ref) {
                if (binding.ref != "user_query" && binding.ref != "goal" &&
                    binding.ref != "description")
                    add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                        "unknown scenario reference '" + binding.ref + "'");
                else if (tool) {
                    const SchemaField* p = tool->find_input(param);
                    if (p && p->type != "text")
                        add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                            "scenario reference '" + binding.ref + "' is text, param '" + param +
                                "' expects " + p->type);
                }
            }
        }
        if (tool)
            for (const auto& f : tool->inputs)
                if (bound.count(f.name) == 0)
                    add(CheckKind::io_parameter_logic, Severity::error, t.task_id,
                        "unresolved input: param '" + f.name + "' of tool '" + t.tool +
                            "' has no binding");
    }

    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& id : order) edges[id] = tasks[id].task->depends_on;
    for (const auto& cycle : dependency_cycles(order, edges))
        add(CheckKind::task_interdependency, Severity::error, cycle.front(),
            "dependency cycle: " + join(cycle, ", "));

    for (const auto& text : constraints) {
        Constraint c = parse_constraint(text);
        if (c.kind != Constraint::Kind::require_tool) continue;
        bool used = std::any_of(order.begin(), order.end(),
                                [&](const auto& id) { return tasks[id].task->tool == c.tool; });
        if (!used)
            add(CheckKind::compliance, Severity::error, "",
                "no task uses required tool '" + c.tool + "' ('" + text + "')");
    }

    return findings;
}

std::vector<ValidationFinding> validate_strategy(const Strategy& s, const ScenarioSpec& scenario) {
    auto findings = validate_team(s.root, scenario);
    auto task_findings = validate_tasks(s.task_lists, scenario.toolkit, scenario.constraints);
    findings.insert(findings.end(), task_findings.begin(), task_findings.end());

    std::set<std::string> tree_ids;
    for (const auto* a : flatten_tree(s.root)) tree_ids.insert(a->spec.agent_id);
    std::set<std::string> list_ids;
    for (const auto& [agent, tasks] : s.task_lists) list_ids.insert(agent);
    for (const auto& id : list_ids)
        if (tree_ids.count(id) == 0)
            findings.push_back({CheckKind::task_interdependency, Severity::error, id,
                                "task list for agent not present in the agent tree"});
    for (const auto& id : tree_ids)
        if (list_ids.count(id) == 0)
            findings.push_back({CheckKind::task_interdependency, Severity::error, id,
                                "agent has no task list entry"});
    return findings;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

Json fields_to_json(const std::vector<SchemaField>& fields) {
    Json arr = Json::array();
    for (const auto& f : fields) arr.push_back(Json{{"name", f.name}, {"type", f.type}});
    return arr;
}

std::vector<SchemaField> fields_from_json(const Json& j) {
    std::vector<SchemaField> out;
    for (const auto& f : j) out.push_back({f.at("name").get<std::string>(),
                                           f.at("type").get<std::string>()});
    return out;
}

} // namespace

Json to_json(const ToolSpec& t) {
    return Json{{"name", t.name},
                {"inputs", fields_to_json(t.inputs)},
                {"outputs", fields_to_json(t.outputs)},
                {"deterministic", t.deterministic}};
}

ToolSpec tool_from_json(const Json& j) {
    ToolSpec t;
    t.name = j.at("name").get<std::string>();
    if (j.contains("inputs")) t.inputs = fields_from_json(j.at("inputs"));
    if (j.contains("outputs")) t.outputs = fields_from_json(j.at("outputs"));
    t.deterministic = j.value("deterministic", true);
    return t;
}

Json to_json(const ScenarioSpec& s) {
    Json tables = Json::array();
    for (const auto& t : s.description.tables) {
        Json entry{{"name", t.name}, {"summary", t.summary}};
        if (!t.columns.empty()) entry["columns"] = fields_to_json(t.columns);
        tables.push_back(std::move(entry));
    }
    Json agentset = Json::array();
    for (Role r : {Role::tasker, Role::extractor, Role::retriever, Role::painter})
        if (s.agentset.count(r)) agentset.push_back(to_string(r));
    Json toolkit = Json::array();
    for (const auto& t : s.toolkit) toolkit.push_back(to_json(t));
    return Json{{"goal", s.goal},
                {"description", Json{{"text", s.description.text}, {"tables", tables}}},
                {"constraints", s.constraints},
                {"agentset", agentset},
                {"toolkit", toolkit},
                {"user_query", s.user_query}};
}

ScenarioSpec scenario_from_json(const Json& j) {
    ScenarioSpec s;
    s.goal = j.at("goal").get<std::string>();
    const Json& d = j.at("description");
    s.description.text = d.at("text").get<std::string>();
    if (d.contains("tables"))
        for (const auto& t : d.at("tables")) {
            TableSummary ts;
            ts.name = t.at("name").get<std::string>();
            ts.summary = t.value("summary", std::string{});
            if (t.contains("columns")) ts.columns = fields_from_json(t.at("columns"));
            s.description.tables.push_back(std::move(ts));
        }
    if (j.contains("constraints"))
        s.constraints = j.at("constraints").get<std::vector<std::string>>();
    for (const auto& r : j.at("agentset")) {
        auto role = role_from_string(r.get<std::string>());
        if (!role) throw ValueError("unknown role '" + r.get<std::string>() + "' in agentset");
        s.agentset.insert(*role);
    }
    if (j.contains("toolkit"))
        for (const auto& t : j.at("toolkit")) s.toolkit.push_back(tool_from_json(t));
    s.user_query = j.at("user_query").get<std::string>();
    return s;
}

Json to_json(const Binding& b) {
    switch (b.kind) {
    case Binding::Kind::literal: return Json{{"literal", b.literal}};
    case Binding::Kind::output_ref: return Json{{"from", b.ref}};
    case Binding::Kind::scenario_ref: return Json{{"scenario", b.ref}};
    }
    return Json::object();
}

Binding binding_from_json(const Json& j) {
    if (j.contains("literal")) return Binding::make_literal(j.at("literal"));
    if (j.contains("from")) return Binding::make_output_ref(j.at("from").get<std::string>());
    if (j.contains("scenario"))
        return Binding::make_scenario_ref(j.at("scenario").get<std::string>());
    throw ValueError("binding must have one of: literal, from, scenario");
}

Json to_json(const TaskEntry& t) {
    Json inputs = Json::array();
    for (const auto& [param, binding] : t.inputs)
        inputs.push_back(Json{{"param", param}, {"binding", to_json(binding)}});
    return Json{{"task_id", t.task_id},
                {"tool", t.tool},
                {"inputs", inputs},
                {"output_key", t.output_key},
                {"depends_on", t.depends_on}};
}

TaskEntry task_from_json(const Json& j) {
    TaskEntry t;
    t.task_id = j.at("task_id").get<std::string>();
    t.tool = j.at("tool").get<std::string>();
    if (j.contains("inputs"))
        for (const auto& i : j.at("inputs"))
            t.inputs.emplace_back(i.at("param").get<std::string>(),
                                  binding_from_json(i.at("binding")));
    t.output_key = j.value("output_key", t.task_id);
    if (j.contains("depends_on"))
        t.depends_on = j.at("depends_on").get<std::vector<std::string>>();
    return t;
}

Json to_json(const AgentNode& n) {
    Json children = Json::array();
    for (const auto& c : n.children) children.push_back(to_json(c));
    return Json{{"agent_id", n.spec.agent_id},
                {"role", to_string(n.spec.role)},
                {"profile", n.spec.profile},
                {"template_id", n.spec.template_id},
                {"children", children}};
}

AgentNode agent_tree_from_json(const Json& j) {
    AgentNode n;
    n.spec.agent_id = j.at("agent_id").get<std::string>();
    auto role = role_from_string(j.at("role").get<std::string>());
    if (!role)
        throw ValueError("unknown role '" + j.at("role").get<std::string>() + "' for agent '" +
                         n.spec.agent_id + "'");
    n.spec.role = *role;
    n.spec.profile = j.value("profile", std::string{});
    n.spec.template_id = j.value("template_id", std::string{});
    if (j.contains("children"))
        for (const auto& c : j.at("children")) n.children.push_back(agent_tree_from_json(c));
    return n;
}

Json to_json(const TaskLists& tl) {
    Json arr = Json::array();
    for (const auto& [agent, tasks] : tl) {
        Json list = Json::array();
        for (const auto& t : tasks) list.push_back(to_json(t));
        arr.push_back(Json{{"agent", agent}, {"tasks", list}});
    }
    return arr;
}

TaskLists task_lists_from_json(const Json& j) {
    TaskLists tl;
    for (const auto& entry : j) {
        std::vector<TaskEntry> tasks;
        if (entry.contains("tasks"))
            for (const auto& t : entry.at("tasks")) tasks.push_back(task_from_json(t));
        tl.emplace_back(entry.at("agent").get<std::string>(), std::move(tasks));
    }
    return tl;
}

Json to_json(const Strategy& s) {
    return Json{{"round", s.round},
                {"provenance", to_string(s.provenance)},
                {"agents", to_json(s.root)},
                {"task_lists", to_json(s.task_lists)}};
}

Strategy strategy_from_json(const Json& j) {
    Strategy s;
    s.round = j.value("round", 0);
    s.provenance = j.value("provenance", std::string{"initial"}) == "replanned"
                       ? Provenance::replanned
                       : Provenance::initial;
    s.root = agent_tree_from_json(j.at("agents"));
    if (j.contains("task_lists")) s.task_lists = task_lists_from_json(j.at("task_lists"));
    s.normalize();
    return s;
}

Json to_json(const ValidationFinding& f) {
    return Json{{"check", to_string(f.check)},
                {"severity", to_string(f.severity)},
                {"subject", f.subject},
                {"detail", f.detail}};
}

std::string strategy_digest(const Strategy& s) { return digest(to_json(s)); }

} // namespace roster
