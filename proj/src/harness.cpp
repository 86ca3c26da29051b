#include "roster/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "roster/text.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

Json to_json(const FaultSpec& f) {
    Json j{{"target", f.target}, {"mode", f.mode}, {"trigger_round", f.trigger_round}};
    if (f.mode == "delay_steps") j["delay_steps"] = f.delay_steps;
    if (!f.message.empty()) j["message"] = f.message;
    return j;
}

FaultSpec fault_from_json(const Json& j) {
    FaultSpec f;
    f.target = j.at("target").get<std::string>();
    f.mode = j.at("mode").get<std::string>();
    static const std::set<std::string> modes = {"fail_once", "fail_always", "corrupt_output",
                                                "delay_steps"};
    if (modes.count(f.mode) == 0) throw ValueError("unknown fault mode '" + f.mode + "'");
    f.trigger_round = j.value("trigger_round", 0);
    f.delay_steps = j.value("delay_steps", 1);
    f.message = j.value("message", std::string{});
    return f;
}

FaultSchedule::FaultSchedule(std::vector<FaultSpec> faults) {
    for (auto& f : faults) faults_.push_back({std::move(f), 0});
}

namespace {

std::string default_fault_message(const FaultSpec& f, const TaskEntry& task) {
    if (f.mode == "delay_steps")
        return "tool timeout: " + task.tool + " stalled on task:" + task.task_id;
    if (f.mode == "fail_always")
        return "tool failure: " + task.tool + " crashed on task:" + task.task_id;
    return "transient tool failure: " + task.tool + " failed on task:" + task.task_id;
}

std::string fault_class(const FaultSpec& f) {
    if (f.mode == "delay_steps") return "timeout";
    if (f.mode == "fail_always") return "persistent";
    return "transient";
}

} // namespace

std::optional<TaskError> FaultSchedule::before_apply(const TaskEntry& task, int round) {
    for (auto& armed : faults_) {
        const FaultSpec& f = armed.spec;
        if (f.target != task.task_id && f.target != task.tool) continue;
        if (round < f.trigger_round) continue;
        if (f.mode == "fail_once") {
            if (armed.fired > 0) continue;
            ++armed.fired;
            ++injected_;
            return TaskError{task.tool, "", fault_class(f),
                             f.message.empty() ? default_fault_message(f, task) : f.message};
        }
        if (f.mode == "fail_always") {
            ++armed.fired;
            ++injected_;
            return TaskError{task.tool, "", fault_class(f),
                             f.message.empty() ? default_fault_message(f, task) : f.message};
        }
        if (f.mode == "delay_steps") {
            if (armed.fired >= f.delay_steps) continue;
            ++armed.fired;
            ++injected_;
            return TaskError{task.tool, "", fault_class(f),
                             f.message.empty() ? default_fault_message(f, task) : f.message};
        }
    }
    return std::nullopt;
}

void FaultSchedule::after_apply(const TaskEntry& task, int round, Json& outputs) {
    for (auto& armed : faults_) {
        const FaultSpec& f = armed.spec;
        if (f.mode != "corrupt_output") continue;
        if (f.target != task.task_id && f.target != task.tool) continue;
        if (round < f.trigger_round || armed.fired > 0) continue;
        ++armed.fired;
        ++injected_;
        for (auto& [key, value] : outputs.items()) value = Json();
    }
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace {

void collect_task_ids(const Json& j, std::set<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items()) {
            if (key == "task_id" && value.is_string()) out.insert(value.get<std::string>());
            collect_task_ids(value, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_task_ids(v, out);
    }
}

} // namespace

LoadedScenario load_scenario_text(const std::string& text, const std::string& origin) {
    Json doc = parse_json(text, origin);
    LoadedScenario loaded;
    try {
        if (!doc.contains("scenario")) throw ScenarioError(origin + ": missing scenario section");
        const Json& sc = doc.at("scenario");
        loaded.scenario = scenario_from_json(sc);

        // Table fixtures ride on the description's table index entries.
        if (sc.at("description").contains("tables"))
            for (const auto& t : sc.at("description").at("tables"))
                if (t.contains("rows"))
                    loaded.tables[t.at("name").get<std::string>()] =
                        Json{{"columns", t.value("columns", Json::array())},
                             {"rows", t.at("rows")}};

        // Toolkit: the `tools` section lists built-in names and/or custom
        // identity-backed specs. The scenario's own toolkit array also
        // accepts plain names.
        std::map<std::string, ToolSpec> builtins;
        for (auto& spec : builtin_tool_specs()) builtins[spec.name] = spec;
        auto resolve_tool = [&](const Json& entry) -> ToolSpec {
            if (entry.is_string()) {
                auto it = builtins.find(entry.get<std::string>());
                if (it == builtins.end())
                    throw ScenarioError(origin + ": unknown built-in tool '" +
                                        entry.get<std::string>() + "'");
                return it->second;
            }
            // Full specs: names matching a built-in keep the built-in runtime;
            // anything else becomes an identity-backed custom tool.
            ToolSpec spec = tool_from_json(entry);
            auto it = builtins.find(spec.name);
            if (it != builtins.end()) return it->second;
            loaded.custom_tools.push_back(spec);
            return spec;
        };
        loaded.scenario.toolkit.clear();
        if (doc.contains("tools"))
            for (const auto& entry : doc.at("tools"))
                loaded.scenario.toolkit.push_back(resolve_tool(entry));
        if (sc.contains("toolkit"))
            for (const auto& entry : sc.at("toolkit"))
                loaded.scenario.toolkit.push_back(resolve_tool(entry));
        if (loaded.scenario.toolkit.empty())
            for (auto& spec : builtin_tool_specs()) loaded.scenario.toolkit.push_back(spec);

        if (sc.contains("subtask_types"))
            for (const auto& [task, category] : sc.at("subtask_types").items())
                loaded.subtask_types[task] = category.get<std::string>();

        if (doc.contains("script")) loaded.script = parse_script(doc.at("script"), origin);

        if (doc.contains("faults"))
            for (const auto& f : doc.at("faults")) loaded.faults.push_back(fault_from_json(f));

        loaded.error_tree =
            doc.contains("error_tree") ? error_tree_from_json(doc.at("error_tree"))
                                       : default_error_tree();

        if (doc.contains("toggles")) {
            const Json& t = doc.at("toggles");
            loaded.toggles.monitor = t.value("monitor", true);
            loaded.toggles.gap_narrow = t.value("gap_narrow", true);
            loaded.toggles.memory = t.value("memory", true);
            loaded.toggles.self_reflection = t.value("self_reflection", true);
        }

        if (doc.contains("rules"))
            for (const auto& r : doc.at("rules")) loaded.rules.push_back(gap_rule_from_json(r));

        loaded.scenario.check();

        // Fault targets must resolve: a tool name or a task id somewhere in
        // the script's planned strategies.
        std::set<std::string> targets;
        for (const auto& t : loaded.scenario.toolkit) targets.insert(t.name);
        for (const auto& entry : loaded.script) collect_task_ids(entry.respond, targets);
        for (const auto& f : loaded.faults)
            if (targets.count(f.target) == 0)
                throw ScenarioError(origin + ": fault targets unknown task or tool '" +
                                    f.target + "'");
    } catch (const Json::exception& e) {
        throw ScenarioError(origin + ": " + e.what());
    } catch (const ValueError& e) {
        throw ScenarioError(origin + ": " + e.what());
    } catch (const ScriptError& e) {
        throw ScenarioError(origin + ": " + e.what());
    }
    return loaded;
}

LoadedScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(path + ": cannot open");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_scenario_text(buffer.str(), path);
}

Json to_json(const LoadedScenario& s) {
    Json sc = to_json(s.scenario);
    // Fold rows back onto the description tables.
    for (auto& t : sc.at("description").at("tables")) {
        auto it = s.tables.find(t.at("name").get<std::string>());
        if (it != s.tables.end()) {
            if (!t.contains("columns")) t["columns"] = it->second.at("columns");
            t["rows"] = it->second.at("rows");
        }
    }
    if (!s.subtask_types.empty()) {
        Json st = Json::object();
        for (const auto& [task, category] : s.subtask_types) st[task] = category;
        sc["subtask_types"] = st;
    }
    Json script = Json::array();
    for (const auto& e : s.script)
        script.push_back(Json{{"expect", e.expect}, {"respond", e.respond}});
    Json faults = Json::array();
    for (const auto& f : s.faults) faults.push_back(to_json(f));
    Json rules = Json::array();
    for (const auto& r : s.rules) rules.push_back(to_json(r));
    Json j{{"scenario", sc}, {"script", script}, {"faults", faults}};
    j["error_tree"] = to_json(s.error_tree);
    j["toggles"] = Json{{"monitor", s.toggles.monitor},
                        {"gap_narrow", s.toggles.gap_narrow},
                        {"memory", s.toggles.memory},
                        {"self_reflection", s.toggles.self_reflection}};
    if (!rules.empty()) j["rules"] = rules;
    return j;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

Json report_to_json(const RunReport& r) {
    Json reflections = Json::object();
    for (const auto& [agent, count] : r.self_reflection_counts) reflections[agent] = count;
    Json histogram = Json::object();
    for (const auto& [category, count] : r.subtask_type_histogram) histogram[category] = count;
    return Json{{"success", r.success},
                {"outcome", r.outcome},
                {"final_answer_digest", r.final_answer_digest},
                {"worker_count", r.worker_count},
                {"self_reflection_counts", reflections},
                {"replanning_count", r.replanning_count},
                {"instruction_count", r.instruction_count},
                {"recommendation_count", r.recommendation_count},
                {"subtask_type_histogram", histogram},
                {"event_log_digest", r.event_log_digest},
                {"seed", r.seed}};
}

namespace {

std::string percent(int part, int total) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%",
                  total == 0 ? 0.0 : 100.0 * static_cast<double>(part) / total);
    return buf;
}

} // namespace

std::string emit_report(const RunReport& r, ReportFormat format) {
    if (format == ReportFormat::structured) return canonical_text(report_to_json(r)) + "\n";

    std::ostringstream out;
    out << "run report\n==========\n";
    out << "outcome: " << r.outcome << "\n";
    out << "success: " << (r.success ? "true" : "false") << "\n";
    out << "seed: " << r.seed << "\n";
    out << "final answer digest: " << (r.final_answer_digest.empty() ? "(none)"
                                                                     : r.final_answer_digest)
        << "\n";
    out << "event log digest: " << r.event_log_digest << "\n";

    out << "\nsubtask types:\n";
    int task_total = 0;
    for (const auto& [category, count] : r.subtask_type_histogram) task_total += count;
    if (r.subtask_type_histogram.empty()) out << "  (none)\n";
    for (const auto& [category, count] : r.subtask_type_histogram)
        out << "  " << category << ": " << count << " (" << percent(count, task_total) << ")\n";

    out << "\nteam:\n  workers: " << r.worker_count << "\n";

    out << "\ncorrective activity:\n  self-reflection calls:\n";
    if (r.self_reflection_counts.empty()) out << "    (none)\n";
    for (const auto& [agent, count] : r.self_reflection_counts)
        out << "    " << agent << ": " << count << "\n";
    out << "  replanning rounds: " << r.replanning_count << "\n";

    const int verdicts = r.instruction_count + r.recommendation_count;
    out << "\nmonitor verdicts:\n";
    out << "  instructions: " << r.instruction_count << " ("
        << percent(r.instruction_count, verdicts) << ")\n";
    out << "  recommendations: " << r.recommendation_count << " ("
        << percent(r.recommendation_count, verdicts) << ")\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

RunResult run_scenario(const LoadedScenario& scenario, const RunOptions& options) {
    RunResult result;
    RunReport& report = result.report;
    report.seed = options.seed;

    Toggles toggles;
    toggles.monitor = scenario.toggles.monitor && options.toggle_override.monitor;
    toggles.gap_narrow = scenario.toggles.gap_narrow && options.toggle_override.gap_narrow;
    toggles.memory = scenario.toggles.memory && options.toggle_override.memory;
    toggles.self_reflection =
        scenario.toggles.self_reflection && options.toggle_override.self_reflection;

    MemoryConfig mem_config;
    mem_config.enabled = toggles.memory;
    MemoryStore memory(mem_config);

    MessageBus bus;
    bus.register_agent("planner", AgentClass::planner);
    bus.register_agent("monitor", AgentClass::monitor);

    std::shared_ptr<Reasoner> reasoner = options.reasoner;
    if (!reasoner) reasoner = std::make_shared<ScriptedReasoner>(scenario.script);

    ToolRegistry registry = ToolRegistry::builtin(scenario.tables);
    for (const auto& spec : scenario.custom_tools)
        registry.add(spec, ToolRegistry::identity_fn(spec));

    FaultSchedule faults(scenario.faults);
    Monitor monitor(scenario.error_tree, scenario.scenario, bus, memory);

    ReplanConfig replan_config;
    replan_config.gap_narrow = toggles.gap_narrow;
    if (!scenario.rules.empty()) replan_config.rules = scenario.rules;

    RoundOptions round_options;
    round_options.self_correct_budget = toggles.self_reflection ? 2 : 0;

    Strategy strategy;
    std::map<std::string, int> reflections;
    Json final_outputs;
    std::string outcome;
    bool success = false;
    int replans = 0;
    int episodes = 0;

    try {
        InitResult init = initialize(scenario.scenario, *reasoner, memory);
        result.init_trace = init.trace;
        strategy = std::move(init.strategy);
        ensure_registered(bus, strategy);
        monitor.on_round_advanced(0);

        while (outcome.empty()) {
            RoundExecution exec(strategy, scenario.scenario, registry, *reasoner, bus, memory,
                                &faults, round_options);
            RoundOutcome out = exec.run();
            bool next_round = false;

            while (out.kind == RoundOutcome::Kind::paused && outcome.empty() && !next_round) {
                ++episodes;
                if (episodes > options.max_alert_episodes) {
                    outcome = "stalled";
                    break;
                }
                if (!toggles.monitor) {
                    outcome = "monitor_disabled";
                    break;
                }
                GlobalState state = monitor.collect_state(*out.alert, strategy);
                std::string leaf = monitor.classify_episode(*out.alert);
                Verdict verdict = monitor.adjudicate(state, leaf, strategy, *out.alert, *reasoner);

                if (verdict.kind == Verdict::Kind::instruction) {
                    out = exec.resume(verdict.steps);
                    continue;
                }

                // Recommendation: the delivered global state joins the
                // planner's short-term memory, then re-planning starts.
                memory.record(planner_owner(), Tier::short_term, canonical_text(to_json(state)),
                              {"global_state", "recommendation"}, 0.8, strategy.round);
                while (bus.pending("planner") > 0) bus.next("planner");
                if (replans >= options.max_replans) {
                    outcome = "replan_budget_exhausted";
                    break;
                }
                std::string prompt = build_profile(kDefaultProfileTemplate, scenario.scenario);
                try {
                    ReplanResult replanned = replan(state, verdict, scenario.scenario, strategy,
                                                    prompt, *reasoner, memory, replan_config);
                    ReplanAudit audit;
                    audit.s_old_digest = strategy_digest(strategy);
                    audit.s_opt_digest = strategy_digest(replanned.strategy);
                    audit.accepted_paths = replanned.accepted_paths;
                    audit.s_old = strategy;
                    audit.s_opt = replanned.strategy;
                    result.replans.push_back(std::move(audit));

                    strategy = std::move(replanned.strategy);
                    ++replans;
                    ensure_registered(bus, strategy);
                    memory.promote(strategy.round);
                    monitor.on_round_advanced(strategy.round);
                    next_round = true;
                } catch (const ReplanExhausted&) {
                    outcome = "replan_exhausted";
                }
            }

            for (const auto& [agent, count] : exec.reflection_counts()) reflections[agent] += count;
            if (outcome.empty() && !next_round && out.kind == RoundOutcome::Kind::completed) {
                final_outputs = out.outputs;
                outcome = "completed";
                success = true;
            }
        }
    } catch (const InitializationFailed&) {
        outcome = "initialization_failed";
    } catch (const MonitorError&) {
        outcome = "monitor_error";
    } catch (const Error&) {
        outcome = "error";
    }

    report.success = success;
    report.outcome = outcome;
    report.final_answer_digest = success ? digest(final_outputs) : "";
    report.worker_count =
        strategy.root.spec.agent_id.empty() ? 0 : static_cast<int>(tree_size(strategy.root));
    if (!strategy.root.spec.agent_id.empty())
        for (const auto* a : flatten_tree(strategy.root))
            reflections.emplace(a->spec.agent_id, 0); // zero-activity agents still show up
    for (const auto& [agent, count] : reflections)
        report.self_reflection_counts.emplace_back(agent, count);
    report.replanning_count = replans;

    // Verdict counters always come from the exported log.
    std::set<std::uint64_t> instruction_ids, recommendation_ids;
    for (const auto& entry : bus.log()) {
        if (entry.kind == "Instruction") instruction_ids.insert(entry.msg_id);
        if (entry.kind == "Recommendation") recommendation_ids.insert(entry.msg_id);
    }
    report.instruction_count = static_cast<int>(instruction_ids.size());
    report.recommendation_count = static_cast<int>(recommendation_ids.size());

    std::map<std::string, int> histogram;
    if (!strategy.root.spec.agent_id.empty())
        for (const auto& [agent, tasks] : strategy.task_lists)
            for (const auto& task : tasks) {
                auto it = scenario.subtask_types.find(task.task_id);
                ++histogram[it == scenario.subtask_types.end() ? "uncategorized" : it->second];
            }
    for (const auto& [category, count] : histogram)
        report.subtask_type_histogram.emplace_back(category, count);

    result.message_log = bus.export_log_jsonl();
    report.event_log_digest = bus.log_digest();
    if (!strategy.root.spec.agent_id.empty()) result.final_strategy = strategy;
    return result;
}

} // namespace roster
