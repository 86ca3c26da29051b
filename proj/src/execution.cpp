#include "roster/execution.hpp"

#include <algorithm>

#include "roster/text.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Built-in fixture tools
// ---------------------------------------------------------------------------

namespace {

TaskError tool_error(const std::string& tool, std::string message) {
    return {tool, "", "tool", std::move(message)};
}

int column_index(const Json& table, const std::string& name) {
    const auto& cols = table.at("columns");
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i].at("name") == name) return static_cast<int>(i);
    return -1;
}

ToolResult table_load_fn(const FixtureTables& tables, const Json& inputs) {
    const std::string name = inputs.at("name").get<std::string>();
    auto it = tables.find(name);
    if (it == tables.end()) return tool_error("table_load", "no fixture table '" + name + "'");
    return Json{{"table", it->second}};
}

ToolResult row_filter_fn(const Json& inputs) {
    const Json& table = inputs.at("table");
    const std::string column = inputs.at("column").get<std::string>();
    const std::string equals = inputs.at("equals").get<std::string>();
    int idx = column_index(table, column);
    if (idx < 0) return tool_error("row_filter", "no column '" + column + "'");
    Json rows = Json::array();
    for (const auto& row : table.at("rows")) {
        const Json& cell = row.at(static_cast<std::size_t>(idx));
        bool match = cell.is_string() ? cell.get<std::string>() == equals
                                      : line_text(cell) == equals;
        if (match) rows.push_back(row);
    }
    return Json{{"table", Json{{"columns", table.at("columns")}, {"rows", rows}}}};
}

ToolResult aggregate_fn(const Json& inputs) {
    const Json& table = inputs.at("table");
    const std::string column = inputs.at("column").get<std::string>();
    const std::string op = inputs.at("op").get<std::string>();
    int idx = column_index(table, column);
    if (idx < 0) return tool_error("aggregate", "no column '" + column + "'");
    std::vector<double> values;
    for (const auto& row : table.at("rows")) {
        const Json& cell = row.at(static_cast<std::size_t>(idx));
        if (cell.is_number()) values.push_back(cell.get<double>());
    }
    double out = 0.0;
    if (op == "count") {
        out = static_cast<double>(table.at("rows").size());
    } else if (op == "sum" || op == "avg") {
        for (double v : values) out += v;
        if (op == "avg") out = values.empty() ? 0.0 : out / static_cast<double>(values.size());
    } else if (op == "min" || op == "max") {
        if (values.empty()) return tool_error("aggregate", "no numeric values in '" + column + "'");
        out = op == "min" ? *std::min_element(values.begin(), values.end())
                          : *std::max_element(values.begin(), values.end());
    } else {
        return tool_error("aggregate", "unknown op '" + op + "'");
    }
    return Json{{"value", out}};
}

ToolResult text_extract_fn(const Json& inputs) {
    const std::string text = inputs.at("text").get<std::string>();
    const std::string pattern = inputs.at("pattern").get<std::string>();
    Json snippets = Json::array();
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        std::string line =
            text.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!line.empty() && line.find(pattern) != std::string::npos) snippets.push_back(line);
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return Json{{"snippets", snippets}};
}

ToolResult chart_spec_fn(const Json& inputs) {
    const Json& table = inputs.at("table");
    const std::string kind = inputs.at("kind").get<std::string>();
    const std::string x = inputs.at("x").get<std::string>();
    const std::string y = inputs.at("y").get<std::string>();
    static const std::set<std::string> kinds = {"bar", "line", "pie", "scatter"};
    if (kinds.count(kind) == 0) return tool_error("chart_spec", "unknown chart kind '" + kind + "'");
    int xi = column_index(table, x), yi = column_index(table, y);
    if (xi < 0 || yi < 0)
        return tool_error("chart_spec", "axis column missing ('" + x + "', '" + y + "')");
    Json series = Json::array();
    for (const auto& row : table.at("rows"))
        series.push_back(Json{{"x", row.at(static_cast<std::size_t>(xi))},
                              {"y", row.at(static_cast<std::size_t>(yi))}});
    return Json{
        {"chart", Json{{"kind", kind}, {"x", x}, {"y", y}, {"series", series}}}};
}

} // namespace

std::vector<ToolSpec> builtin_tool_specs() {
    return {
        {"table_load", {{"name", "table_name"}}, {{"table", "table"}}, true},
        {"row_filter",
         {{"table", "table"}, {"column", "col_name"}, {"equals", "text"}},
         {{"table", "table"}},
         true},
        {"aggregate",
         {{"table", "table"}, {"column", "col_name"}, {"op", "agg_op"}},
         {{"value", "number"}},
         true},
        {"text_extract",
         {{"text", "text"}, {"pattern", "keyword"}},
         {{"snippets", "text_list"}},
         true},
        {"chart_spec",
         {{"table", "table"}, {"kind", "chart_kind"}, {"x", "col_name"}, {"y", "col_name"}},
         {{"chart", "chart"}},
         true},
    };
}

void ToolRegistry::add(ToolSpec spec, ToolFn fn) {
    tools_.emplace_back(std::move(spec), std::move(fn));
}

const ToolSpec* ToolRegistry::spec(const std::string& name) const {
    for (const auto& [s, fn] : tools_)
        if (s.name == name) return &s;
    return nullptr;
}

std::vector<ToolSpec> ToolRegistry::specs() const {
    std::vector<ToolSpec> out;
    for (const auto& [s, fn] : tools_) out.push_back(s);
    return out;
}

ToolResult ToolRegistry::apply(const std::string& name, const Json& inputs) const {
    for (const auto& [s, fn] : tools_)
        if (s.name == name) return fn(inputs);
    return tool_error(name, "unknown tool '" + name + "'");
}

ToolRegistry ToolRegistry::builtin(FixtureTables tables) {
    ToolRegistry reg;
    auto specs = builtin_tool_specs();
    auto shared = std::make_shared<FixtureTables>(std::move(tables));
    reg.add(specs[0], [shared](const Json& in) { return table_load_fn(*shared, in); });
    reg.add(specs[1], [](const Json& in) { return row_filter_fn(in); });
    reg.add(specs[2], [](const Json& in) { return aggregate_fn(in); });
    reg.add(specs[3], [](const Json& in) { return text_extract_fn(in); });
    reg.add(specs[4], [](const Json& in) { return chart_spec_fn(in); });
    return reg;
}

ToolFn ToolRegistry::identity_fn(ToolSpec spec) {
    return [spec](const Json& inputs) -> ToolResult {
        Json out = Json::object();
        std::size_t i = 0;
        for (const auto& field : spec.outputs) {
            if (i < spec.inputs.size() && inputs.contains(spec.inputs[i].name))
                out[field.name] = inputs.at(spec.inputs[i].name);
            else
                out[field.name] = Json();
            ++i;
        }
        return out;
    };
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

Json to_json(const ReflectionEntry& e) {
    return Json{{"attempt", e.attempt}, {"error", e.error}, {"fix", e.fix}};
}

Json to_json(const ErrorReportDetailed& r) {
    Json trace = Json::array();
    for (const auto& e : r.reflection_trace) trace.push_back(to_json(e));
    return Json{{"worker", r.worker},
                {"logs", r.logs},
                {"error_message", r.error_message},
                {"history", r.history},
                {"reflection_trace", trace},
                {"keywords", std::vector<std::string>(r.keywords.begin(), r.keywords.end())},
                {"task", r.task_id},
                {"failure_class", r.failure_class}};
}

Json to_json(const StatusReportNormal& r) {
    return Json{{"worker", r.worker}, {"results", r.results}, {"context", r.context}};
}

std::set<std::string> report_keywords(const std::string& error_message,
                                      const std::string& failure_class) {
    auto keywords = tokenize(error_message);
    for (const auto& t : tokenize(failure_class)) keywords.insert(t);
    return keywords;
}

// ---------------------------------------------------------------------------
// execute_task
// ---------------------------------------------------------------------------

bool value_conforms(const Json& v, const std::string& type) {
    if (v.is_null()) return false;
    if (type == "table") return v.is_object() && v.contains("columns") && v.contains("rows");
    if (type == "number") return v.is_number();
    if (type == "text" || type == "table_name" || type == "col_name" || type == "keyword" ||
        type == "agg_op" || type == "chart_kind")
        return v.is_string();
    if (type == "text_list") return v.is_array();
    if (type == "chart") return v.is_object() && v.contains("kind");
    return true; // unknown labels: presence is enough
}

ToolResult execute_task(const TaskEntry& task, const Json& bindings, const ToolRegistry& tools,
                        FaultHook* faults, int round) {
    const ToolSpec* spec = tools.spec(task.tool);
    if (!spec)
        return TaskError{task.tool, digest(bindings), "tool", "unknown tool '" + task.tool + "'"};
    for (const auto& field : spec->inputs)
        if (!bindings.contains(field.name))
            throw BindingError("task '" + task.task_id + "': param '" + field.name +
                               "' is unresolved");
    const std::string inputs_digest = digest(bindings);

    if (faults) {
        if (auto injected = faults->before_apply(task, round)) {
            injected->tool = task.tool;
            injected->inputs_digest = inputs_digest;
            return *injected;
        }
    }

    ToolResult result = tools.apply(task.tool, bindings);
    if (auto* err = std::get_if<TaskError>(&result)) {
        err->inputs_digest = inputs_digest;
        return *err;
    }

    Json outputs = std::get<Json>(std::move(result));
    if (faults) faults->after_apply(task, round, outputs);

    for (const auto& field : spec->outputs) {
        if (!outputs.contains(field.name))
            return TaskError{task.tool, inputs_digest, "schema",
                             "tool produced no field '" + field.name + "' (" + field.type + ")"};
        if (!value_conforms(outputs.at(field.name), field.type))
            return TaskError{task.tool, inputs_digest, "schema",
                             "output corrupted: field '" + field.name +
                                 "' does not conform to '" + field.type + "'"};
    }
    return outputs;
}

// ---------------------------------------------------------------------------
// self_correct
// ---------------------------------------------------------------------------

namespace {

std::string render_patch(const FixPatch& p) {
    if (p.action == "rebind")
        return "rebind " + (p.task_id.empty() ? std::string("task") : p.task_id) + "." + p.param;
    return p.action;
}

void apply_patch_to_task(TaskEntry& task, const FixPatch& patch) {
    if (patch.action != "rebind" || !patch.binding) return;
    bool replaced = false;
    for (auto& [param, binding] : task.inputs)
        if (param == patch.param) {
            binding = *patch.binding;
            replaced = true;
        }
    if (!replaced) task.inputs.emplace_back(patch.param, *patch.binding);
    if (patch.binding->kind == Binding::Kind::output_ref) {
        auto upstream = patch.binding->ref_parts().first;
        if (std::count(task.depends_on.begin(), task.depends_on.end(), upstream) == 0)
            task.depends_on.push_back(upstream);
    }
}

} // namespace

SelfCorrectOutcome self_correct(const std::string& worker, TaskEntry& task,
                                const TaskError& initial_error,
                                const std::function<ToolResult(const TaskEntry&)>& resolve,
                                const ToolRegistry& tools, FaultHook* faults, Reasoner& reasoner,
                                int budget, int round) {
    SelfCorrectOutcome outcome;
    outcome.trace.push_back({1, initial_error.message, ""});
    TaskError last = initial_error;

    for (int attempt = 2; attempt <= 1 + budget; ++attempt) {
        ReflectRequest req;
        req.kind = ReflectKind::local_fix;
        req.subject = Json{{"worker", worker},
                           {"task", to_json(task)},
                           {"error", Json{{"class", last.failure_class},
                                          {"message", last.message},
                                          {"tool", last.tool}}}};
        for (const auto& e : outcome.trace) req.evidence.push_back("attempt " +
                                                                   std::to_string(e.attempt) +
                                                                   ": " + e.error);
        ReflectResponse resp = reasoner.reflect(req);
        ++outcome.reflect_calls;
        if (resp.verdict != ReflectVerdict::fix) break; // nothing to try, escalate now

        apply_patch_to_task(task, *resp.patch);
        outcome.trace.back().fix = render_patch(*resp.patch);

        ToolResult resolved = resolve(task);
        ToolResult result = std::holds_alternative<TaskError>(resolved)
                                ? resolved
                                : execute_task(task, std::get<Json>(resolved), tools, faults,
                                               round);
        if (auto* outputs = std::get_if<Json>(&result)) {
            outcome.outputs = std::move(*outputs);
            return outcome;
        }
        last = std::get<TaskError>(result);
        outcome.trace.push_back({attempt, last.message, ""});
    }
    outcome.final_error = last;
    return outcome;
}

// ---------------------------------------------------------------------------
// Alert protocol
// ---------------------------------------------------------------------------

void raise_alert(MessageBus& bus, const ErrorReportDetailed& detailed,
                 const std::vector<StatusReportNormal>& peer_reports, int round,
                 const std::string& monitor_id) {
    Message alert;
    alert.sender = detailed.worker;
    alert.kind = MsgKind::error_alert;
    alert.round = round;
    alert.payload = Json{{"worker", detailed.worker},
                         {"task", detailed.task_id},
                         {"class", detailed.failure_class},
                         {"message", detailed.error_message}};
    bus.broadcast(std::move(alert));

    for (const auto& peer : peer_reports) {
        Message ack;
        ack.sender = peer.worker;
        ack.recipients = Recipients::unicast(monitor_id);
        ack.kind = MsgKind::pause_ack;
        ack.round = round;
        ack.payload = Json{{"worker", peer.worker}};
        bus.send(std::move(ack));
    }
    for (const auto& peer : peer_reports) {
        Message status;
        status.sender = peer.worker;
        status.recipients = Recipients::unicast(monitor_id);
        status.kind = MsgKind::status_report;
        status.round = round;
        status.payload = Json{{"worker", peer.worker}, {"detailed", false},
                              {"report", to_json(peer)}};
        bus.send(std::move(status));
    }
    Message report;
    report.sender = detailed.worker;
    report.recipients = Recipients::unicast(monitor_id);
    report.kind = MsgKind::status_report;
    report.round = round;
    report.payload = Json{{"worker", detailed.worker}, {"detailed", true},
                          {"report", to_json(detailed)}};
    bus.send(std::move(report));
}

void ensure_registered(MessageBus& bus, const Strategy& strategy) {
    for (const auto* agent : flatten_tree(strategy.root))
        if (!bus.known(agent->spec.agent_id))
            bus.register_agent(agent->spec.agent_id, AgentClass::worker);
}

// ---------------------------------------------------------------------------
// RoundExecution
// ---------------------------------------------------------------------------

RoundExecution::RoundExecution(Strategy& strategy, const ScenarioSpec& scenario,
                               ToolRegistry& tools, Reasoner& reasoner, MessageBus& bus,
                               MemoryStore& memory, FaultHook* faults, RoundOptions options)
    : strategy_(strategy), scenario_(scenario), tools_(tools), reasoner_(reasoner), bus_(bus),
      memory_(memory), faults_(faults), options_(options) {
    auto agents = flatten_tree(strategy_.root);
    for (std::size_t dfs = 0; dfs < agents.size(); ++dfs) {
        const auto& id = agents[dfs]->spec.agent_id;
        const auto* tasks = strategy_.tasks_for(id);
        if (!tasks) continue;
        for (std::size_t i = 0; i < tasks->size(); ++i)
            slots_.push_back({id, i, phase_rank(agents[dfs]->spec.role),
                              static_cast<int>(dfs), false});
    }
    std::stable_sort(slots_.begin(), slots_.end(), [](const Slot& a, const Slot& b) {
        if (a.phase != b.phase) return a.phase < b.phase;
        if (a.agent_dfs != b.agent_dfs) return a.agent_dfs < b.agent_dfs;
        return a.task_index < b.task_index;
    });
}

TaskEntry& RoundExecution::task_ref(const Slot& slot) {
    return (*strategy_.tasks_for(slot.agent))[slot.task_index];
}

ToolResult RoundExecution::resolve_inputs(const TaskEntry& task) const {
    Json inputs = Json::object();
    for (const auto& [param, binding] : task.inputs) {
        switch (binding.kind) {
        case Binding::Kind::literal: inputs[param] = binding.literal; break;
        case Binding::Kind::output_ref: {
            std::pair<std::string, std::string> parts;
            try {
                parts = binding.ref_parts();
            } catch (const ValueError& e) {
                return TaskError{task.tool, "", "binding", e.what()};
            }
            auto it = results_.find(parts.first);
            if (it == results_.end())
                return TaskError{task.tool, "", "binding",
                                 "unresolved binding '" + binding.ref +
                                     "': upstream task has no outputs"};
            if (!it->second.contains(parts.second))
                return TaskError{task.tool, "", "binding",
                                 "unresolved binding '" + binding.ref + "': no such field"};
            inputs[param] = it->second.at(parts.second);
            break;
        }
        case Binding::Kind::scenario_ref:
            if (binding.ref == "user_query")
                inputs[param] = scenario_.user_query;
            else if (binding.ref == "goal")
                inputs[param] = scenario_.goal;
            else if (binding.ref == "description")
                inputs[param] = scenario_.description.text;
            else
                return TaskError{task.tool, "", "binding",
                                 "unknown scenario reference '" + binding.ref + "'"};
            break;
        }
    }
    return inputs;
}

void RoundExecution::record_outcome(const std::string& agent, const TaskEntry& task, bool ok,
                                    const std::string& note) {
    logs_[agent].push_back("task " + task.task_id + (ok ? " ok" : " failed: " + note));
    if (ok) history_[agent].push_back(task.task_id + " -> " + task.output_key);
    memory_.record(agent, Tier::sensory, "task " + task.task_id + (ok ? " ok" : " error: " + note),
                   {"task", task.task_id, ok ? "ok" : "error"}, ok ? 0.3 : 0.8, strategy_.round);
}

RoundOutcome RoundExecution::pause_with_alert(const std::string& agent, TaskEntry& task,
                                              const SelfCorrectOutcome& outcome) {
    const TaskError& err = *outcome.final_error;
    ErrorReportDetailed detailed;
    detailed.worker = agent;
    detailed.logs = logs_[agent];
    detailed.error_message = err.message;
    detailed.history = history_[agent];
    detailed.reflection_trace = outcome.trace;
    detailed.keywords = report_keywords(err.message, err.failure_class);
    detailed.task_id = task.task_id;
    detailed.failure_class = err.failure_class;

    std::vector<StatusReportNormal> peers;
    for (const auto* node : flatten_tree(strategy_.root)) {
        const auto& id = node->spec.agent_id;
        if (id == agent) continue;
        const auto* tasks = strategy_.tasks_for(id);
        if (!tasks || tasks->empty()) continue; // not a pipeline participant
        StatusReportNormal report;
        report.worker = id;
        report.results = history_[id];
        report.context = logs_[id];
        peers.push_back(std::move(report));
    }

    // Peers consume the pending alert before acknowledging.
    raise_alert(bus_, detailed, peers, strategy_.round, options_.monitor_id);
    for (const auto& peer : peers)
        while (bus_.pending(peer.worker) > 0) bus_.next(peer.worker);
    while (bus_.pending(agent) > 0) bus_.next(agent);

    pending_task_ = task.task_id;
    RoundOutcome out;
    out.kind = RoundOutcome::Kind::paused;
    out.alert = AlertContext{std::move(detailed), std::move(peers), agent, task.task_id, err,
                             results_};
    return out;
}

RoundOutcome RoundExecution::drive() {
    while (true) {
        Slot* next_slot = nullptr;
        bool all_done = true;
        for (auto& slot : slots_) {
            if (slot.done) continue;
            all_done = false;
            const TaskEntry& task = task_ref(slot);
            bool ready = std::all_of(task.depends_on.begin(), task.depends_on.end(),
                                     [&](const std::string& dep) { return results_.count(dep); });
            if (ready) {
                next_slot = &slot;
                break;
            }
        }
        if (all_done) {
            RoundOutcome out;
            out.kind = RoundOutcome::Kind::completed;
            out.outputs = Json::object();
            for (const auto& [task, key] : completion_order_) out.outputs[key] = results_[task];
            return out;
        }
        if (!next_slot) {
            // Every remaining task is blocked; report the first as a
            // dependency failure (unreachable for validated strategies).
            for (auto& slot : slots_)
                if (!slot.done) {
                    TaskEntry& task = task_ref(slot);
                    SelfCorrectOutcome stall;
                    stall.trace.push_back({1, "dependency deadlock", ""});
                    stall.final_error = TaskError{task.tool, "", "dependency",
                                                  "dependency deadlock at task '" +
                                                      task.task_id + "'"};
                    record_outcome(slot.agent, task, false, "dependency deadlock");
                    return pause_with_alert(slot.agent, task, stall);
                }
        }

        Slot& slot = *next_slot;
        TaskEntry& task = task_ref(slot);
        if (std::find(invocation_order_.begin(), invocation_order_.end(), slot.agent) ==
            invocation_order_.end())
            invocation_order_.push_back(slot.agent);

        ToolResult resolved = resolve_inputs(task);
        ToolResult result = std::holds_alternative<TaskError>(resolved)
                                ? resolved
                                : execute_task(task, std::get<Json>(resolved), tools_, faults_,
                                               strategy_.round);

        if (auto* err = std::get_if<TaskError>(&result)) {
            record_outcome(slot.agent, task, false, err->failure_class + ": " + err->message);
            auto resolver = [this](const TaskEntry& t) { return resolve_inputs(t); };
            SelfCorrectOutcome corrected =
                self_correct(slot.agent, task, *err, resolver, tools_, faults_, reasoner_,
                             options_.self_correct_budget, strategy_.round);
            reflection_counts_[slot.agent] += corrected.reflect_calls;
            for (const auto& e : corrected.trace)
                if (e.attempt > 1)
                    logs_[slot.agent].push_back("attempt " + std::to_string(e.attempt) +
                                                " failed: " + e.error);
            if (!corrected.outputs) return pause_with_alert(slot.agent, task, corrected);
            result = *corrected.outputs;
            logs_[slot.agent].push_back("task " + task.task_id + " recovered after self-correction");
        }

        const Json& outputs = std::get<Json>(result);
        results_[task.task_id] = outputs;
        completion_order_.emplace_back(task.task_id, task.output_key);
        record_outcome(slot.agent, task, true, "");

        Message msg;
        msg.sender = slot.agent;
        msg.recipients = Recipients::unicast(strategy_.root.spec.agent_id);
        msg.kind = MsgKind::result;
        msg.round = strategy_.round;
        msg.payload = Json{{"task", task.task_id}, {"output_key", task.output_key},
                           {"digest", digest(outputs)}};
        bus_.send(std::move(msg));
        slot.done = true;
    }
}

RoundOutcome RoundExecution::run() { return drive(); }

RoundOutcome RoundExecution::resume(const std::vector<FixPatch>& instruction_steps) {
    // Workers consume the pending resume broadcast before anything restarts.
    for (const auto* node : flatten_tree(strategy_.root)) {
        const auto& id = node->spec.agent_id;
        if (bus_.known(id))
            while (bus_.pending(id) > 0) bus_.next(id);
    }
    if (pending_task_) {
        for (auto& slot : slots_) {
            TaskEntry& task = task_ref(slot);
            if (task.task_id != *pending_task_) continue;
            for (const auto& patch : instruction_steps) {
                if (!patch.task_id.empty() && patch.task_id != task.task_id) {
                    // Instruction may touch another task of the strategy.
                    for (auto& other : slots_) {
                        TaskEntry& t = task_ref(other);
                        if (t.task_id == patch.task_id) apply_patch_to_task(t, patch);
                    }
                    continue;
                }
                apply_patch_to_task(task, patch);
            }
            break;
        }
        pending_task_.reset();
    }
    return drive();
}

RoundOutcome run_round(Strategy& strategy, const ScenarioSpec& scenario, ToolRegistry& tools,
                       Reasoner& reasoner, MessageBus& bus, MemoryStore& memory,
                       FaultHook* faults, RoundOptions options) {
    RoundExecution exec(strategy, scenario, tools, reasoner, bus, memory, faults, options);
    return exec.run();
}

} // namespace roster
