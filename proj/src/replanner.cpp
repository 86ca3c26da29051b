#include "roster/replanner.hpp"

#include <algorithm>

#include "roster/planner.hpp"
#include "roster/text.hpp"

namespace roster {

std::vector<GapRule> default_gap_rules() {
    return {
        {"R1", "justification_grounded",
         "a difference must be justified by an insight or suggestion", Json::object()},
        {"R2", "remove_implicated",
         "a removal may only target an agent or task implicated in the key insights",
         Json::object()},
        {"R3", "single_subject", "one difference touches one agent or one task entry",
         Json::object()},
        {"R4", "no_new_errors",
         "an applied difference must not introduce an error-severity finding", Json::object()},
    };
}

GapRule gap_rule_from_json(const Json& j) {
    GapRule r;
    r.rule_id = j.at("rule_id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.description = j.value("description", std::string{});
    r.parameters = j.value("parameters", Json::object());
    static const std::set<std::string> kinds = {"justification_grounded", "remove_implicated",
                                                "single_subject", "no_new_errors",
                                                "forbid_change", "path_prefix_forbidden"};
    if (kinds.count(r.kind) == 0)
        throw ValueError("unknown gap rule kind '" + r.kind + "'");
    return r;
}

Json to_json(const GapRule& r) {
    return Json{{"rule_id", r.rule_id}, {"kind", r.kind}, {"description", r.description},
                {"parameters", r.parameters}};
}

namespace {

std::vector<StrategyDiff> to_strategy_diffs(const std::vector<DiffItem>& items) {
    std::vector<StrategyDiff> out;
    for (const auto& d : items) out.push_back({d.path, d.change, d.old_value, d.new_value});
    return out;
}

bool justification_grounded(const DiffItem& item, const GlobalState& state,
                            const Verdict& rec) {
    if (item.justification.empty()) return false;
    for (const auto& insight : state.key_insights)
        if (item.justification.find(insight) != std::string::npos) return true;
    auto tokens = tokenize(item.justification);
    for (const auto& suggestion : rec.suggestions) {
        if (item.justification.find(suggestion) != std::string::npos) return true;
        auto colon = suggestion.find(':');
        if (colon != std::string::npos && tokens.count(suggestion.substr(0, colon))) return true;
    }
    return false;
}

bool remove_implicated(const DiffItem& item, const GlobalState& state) {
    if (item.change != ChangeKind::remove) return true;
    PathInfo info = parse_diff_path(item.path);
    const std::string subject = info.kind == PathInfo::Kind::task ? "task:" + info.task
                                                                  : "agent:" + info.agent;
    return std::count(state.key_insights.begin(), state.key_insights.end(), subject) > 0;
}

} // namespace

RuleCheck check_rules(const DiffItem& item, const std::vector<GapRule>& rules,
                      const GlobalState& state, const Verdict& recommendation,
                      const Strategy& base, const ScenarioSpec& scenario,
                      const std::vector<DiffItem>& accepted_so_far) {
    for (const auto& rule : rules) {
        if (rule.kind == "justification_grounded") {
            if (!justification_grounded(item, state, recommendation))
                return {false, rule.rule_id,
                        "justification does not reference any insight or suggestion"};
        } else if (rule.kind == "remove_implicated") {
            bool ok;
            try {
                ok = remove_implicated(item, state);
            } catch (const DiffError&) {
                ok = false;
            }
            if (!ok)
                return {false, rule.rule_id, "removal targets a subject outside the key insights"};
        } else if (rule.kind == "single_subject") {
            try {
                parse_diff_path(item.path);
            } catch (const DiffError& e) {
                return {false, rule.rule_id, e.what()};
            }
        } else if (rule.kind == "no_new_errors") {
            auto diffs = to_strategy_diffs(accepted_so_far);
            diffs.push_back({item.path, item.change, item.old_value, item.new_value});
            try {
                Strategy patched = apply_diffs(base, diffs);
                auto findings = validate_strategy(patched, scenario);
                for (const auto& f : findings)
                    if (f.severity == Severity::error)
                        return {false, rule.rule_id,
                                "introduces finding: " + std::string(to_string(f.check)) + " [" +
                                    f.subject + "] " + f.detail};
            } catch (const DiffError& e) {
                return {false, rule.rule_id, std::string("does not integrate: ") + e.what()};
            }
        } else if (rule.kind == "forbid_change") {
            if (to_string(item.change) == rule.parameters.value("change", std::string{}))
                return {false, rule.rule_id, "change kind is forbidden by configuration"};
        } else if (rule.kind == "path_prefix_forbidden") {
            const std::string prefix = rule.parameters.value("prefix", std::string{});
            if (!prefix.empty() && item.path.rfind(prefix, 0) == 0)
                return {false, rule.rule_id, "path prefix is forbidden by configuration"};
        }
    }
    return {true, "", ""};
}

namespace {

std::vector<std::string> render_context(const std::vector<MemoryRecord>& records) {
    std::vector<std::string> out;
    for (const auto& r : records)
        out.push_back(std::string("[") + to_string(r.tier) + " " + r.rec_id + "] " + r.content);
    return out;
}

} // namespace

ReplanResult replan(const GlobalState& state, const Verdict& recommendation,
                    const ScenarioSpec& scenario, const Strategy& s_old,
                    const std::string& scenario_prompt, Reasoner& reasoner, MemoryStore& memory,
                    const ReplanConfig& config) {
    if (recommendation.kind != Verdict::Kind::recommendation)
        throw ValueError("replan requires a recommendation verdict");

    // Historical strategies (long tier) + the delivered global state (short
    // tier) assemble the hybrid prompt context.
    auto context_records = memory.hybrid_context(planner_owner(), {"strategy", "global_state"},
                                                 config.context_budget, s_old.round);
    std::vector<std::string> base_context = render_context(context_records);
    std::string prompt = scenario_prompt;
    for (const auto& line : base_context) prompt += "\n" + line;

    const Json state_json = to_json(state);
    const Json rec_json = to_json(recommendation);

    int budget_used = 0;
    auto spend_budget = [&](const std::string& why,
                            const std::vector<ValidationFinding>& findings = {}) {
        if (budget_used >= config.max_replan_retries)
            throw ReplanExhausted("replan budget exhausted after " +
                                      std::to_string(budget_used) + " regenerations: " + why,
                                  findings);
        ++budget_used;
    };

    auto plan_new = [&](const std::vector<std::string>& extra) -> PlanDraft {
        PlanRequest req;
        req.kind = PlanKind::replan;
        req.scenario = scenario;
        req.context = base_context;
        req.context.insert(req.context.end(), extra.begin(), extra.end());
        req.global_state = state_json;
        req.recommendation = rec_json;
        req.old_strategy = s_old;
        req.scenario_prompt = prompt;
        PlanDraft draft = reasoner.plan(req);
        if (!draft.strategy) throw ScriptError("replan response carried no strategy");
        return draft;
    };

    Strategy s_new = *plan_new({}).strategy;
    std::vector<DiffItem> differences = reasoner.diff(s_new, s_old);
    gate_diff_items(differences, s_new, s_old); // never trust the backend's diff

    std::vector<DiffItem> accepted;
    while (true) {
        accepted.clear();
        bool restart = false;

        for (std::size_t i = 0; i < differences.size() && !restart;) {
            DiffItem& item = differences[i];

            if (config.gap_narrow) {
                RuleCheck rc = check_rules(item, config.rules, state, recommendation, s_old,
                                           scenario, accepted);
                if (!rc.pass) {
                    spend_budget("difference at '" + item.path + "' violates " + rc.rule_id);
                    // One plan call scoped to the offending path; the
                    // regenerated item is read off the structural diff.
                    PlanDraft draft = plan_new({"rule " + rc.rule_id + " violated at '" +
                                                item.path + "': " + rc.detail});
                    auto structural = diff_strategies(s_old, *draft.strategy);
                    auto found = std::find_if(structural.begin(), structural.end(),
                                              [&](const StrategyDiff& d) {
                                                  return d.path == item.path;
                                              });
                    if (found == structural.end()) {
                        differences.erase(differences.begin() +
                                          static_cast<std::ptrdiff_t>(i));
                    } else {
                        item.change = found->change;
                        item.old_value = found->old_value;
                        item.new_value = found->new_value;
                        if (!draft.justification.empty())
                            item.justification = draft.justification;
                    }
                    continue; // re-check the same slot
                }
            }

            ReflectRequest judge;
            judge.kind = ReflectKind::difference_judgement;
            judge.subject = to_json(item);
            judge.diff = item;
            judge.global_state = state_json;
            judge.recommendation = rec_json;
            ReflectResponse resp = reasoner.reflect(judge);
            if (resp.verdict == ReflectVerdict::improved) {
                accepted.push_back(item);
                ++i;
            } else {
                spend_budget("difference at '" + item.path + "' judged not improved");
                s_new = *plan_new({"differences judged not improved; regenerate"}).strategy;
                differences = reasoner.diff(s_new, s_old);
                gate_diff_items(differences, s_new, s_old);
                restart = true;
            }
        }
        if (restart) continue;

        Strategy s_opt;
        std::vector<ValidationFinding> findings;
        bool integrated = false;
        try {
            s_opt = apply_diffs(s_old, to_strategy_diffs(accepted));
            findings = validate_strategy(s_opt, scenario);
            integrated = !has_errors(findings);
        } catch (const DiffError& e) {
            findings.push_back({CheckKind::task_interdependency, Severity::error, "", e.what()});
        }
        if (!integrated) {
            spend_budget("integration failed validation", findings);
            s_new = *plan_new({"integration failed: " + render_findings(findings)}).strategy;
            differences = reasoner.diff(s_new, s_old);
            gate_diff_items(differences, s_new, s_old);
            continue;
        }

        s_opt.round = s_old.round + 1;
        s_opt.provenance = Provenance::replanned;

        memory.record(planner_owner(), Tier::long_term, canonical_text(to_json(s_old)),
                      {"strategy", "archived", "strategy:round" + std::to_string(s_old.round)},
                      0.9, s_old.round);
        memory.record(planner_owner(), Tier::short_term, canonical_text(to_json(s_opt)),
                      {"strategy", "strategy:round" + std::to_string(s_opt.round)}, 0.9,
                      s_opt.round);

        ReplanResult result;
        result.strategy = std::move(s_opt);
        for (const auto& d : accepted) result.accepted_paths.push_back(d.path);
        result.regenerations = budget_used;
        return result;
    }
}

} // namespace roster
