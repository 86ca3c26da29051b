#include "roster/reasoner.hpp"

#include <algorithm>
#include <map>

namespace roster {

const char* to_string(PlanKind k) {
    switch (k) {
    case PlanKind::team: return "Team";
    case PlanKind::tasks: return "Tasks";
    case PlanKind::replan: return "Replan";
    }
    return "unknown";
}

const char* to_string(ReflectKind k) {
    switch (k) {
    case ReflectKind::team_review: return "TeamReview";
    case ReflectKind::task_review: return "TaskReview";
    case ReflectKind::difference_judgement: return "DifferenceJudgement";
    case ReflectKind::local_fix: return "LocalFix";
    }
    return "unknown";
}

const char* to_string(ReflectVerdict v) {
    switch (v) {
    case ReflectVerdict::pass: return "pass";
    case ReflectVerdict::fail: return "fail";
    case ReflectVerdict::improved: return "improved";
    case ReflectVerdict::not_improved: return "not_improved";
    case ReflectVerdict::fix: return "fix";
    }
    return "unknown";
}

void PlanRequest::check() const {
    if (kind != PlanKind::replan) return;
    if (!global_state || !recommendation || !old_strategy || scenario_prompt.empty())
        throw ValueError("replan request must carry global state, recommendation, old strategy "
                         "and scenario prompt");
}

void ReflectRequest::check() const {
    if (kind != ReflectKind::difference_judgement) return;
    if (!diff || !global_state || !recommendation)
        throw ValueError("difference judgement must carry one diff item, global state and "
                         "recommendation");
}

Json to_json(const DiffItem& d) {
    return Json{{"diff_id", d.diff_id},       {"path", d.path},
                {"change", to_string(d.change)}, {"old_value", d.old_value},
                {"new_value", d.new_value},   {"justification", d.justification}};
}

Json to_json(const FixPatch& p) {
    Json j{{"action", p.action}};
    if (!p.task_id.empty()) j["task"] = p.task_id;
    if (!p.param.empty()) j["param"] = p.param;
    if (p.binding) j["binding"] = to_json(*p.binding);
    return j;
}

FixPatch fix_patch_from_json(const Json& j) {
    FixPatch p;
    p.action = j.at("action").get<std::string>();
    if (p.action != "retry" && p.action != "rebind")
        throw ValueError("unknown fix action '" + p.action + "'");
    p.task_id = j.value("task", std::string{});
    p.param = j.value("param", std::string{});
    if (j.contains("binding")) p.binding = binding_from_json(j.at("binding"));
    if (p.action == "rebind" && (p.param.empty() || !p.binding))
        throw ValueError("rebind patch needs param and binding");
    return p;
}

Json to_json(const PlanRequest& r) {
    Json j{{"op", "plan"}, {"kind", to_string(r.kind)}, {"scenario", to_json(r.scenario)},
           {"context", r.context}};
    if (r.team) j["team"] = to_json(*r.team);
    if (r.global_state) j["global_state"] = *r.global_state;
    if (r.recommendation) j["recommendation"] = *r.recommendation;
    if (r.old_strategy) j["old_strategy"] = to_json(*r.old_strategy);
    if (!r.scenario_prompt.empty()) j["prompt"] = r.scenario_prompt;
    return j;
}

Json to_json(const ReflectRequest& r) {
    Json j{{"op", "reflect"}, {"kind", to_string(r.kind)}, {"subject", r.subject},
           {"evidence", r.evidence}};
    if (r.diff) j["diff"] = to_json(*r.diff);
    if (r.global_state) j["global_state"] = *r.global_state;
    if (r.recommendation) j["recommendation"] = *r.recommendation;
    return j;
}

void gate_diff_items(const std::vector<DiffItem>& items, const Strategy& s_new,
                     const Strategy& s_old) {
    std::map<std::string, ChangeKind> structural;
    for (const auto& d : diff_strategies(s_old, s_new)) structural[d.path] = d.change;
    std::set<std::string> covered;
    for (const auto& item : items) {
        auto it = structural.find(item.path);
        if (it == structural.end())
            throw DiffInconsistent("diff item path '" + item.path +
                                   "' is not a structural difference");
        if (it->second != item.change)
            throw DiffInconsistent("diff item at '" + item.path + "' labels " +
                                   to_string(item.change) + ", structural differ says " +
                                   to_string(it->second));
        covered.insert(item.path);
    }
    for (const auto& [path, change] : structural)
        if (covered.count(path) == 0)
            throw DiffInconsistent("structural difference at '" + path +
                                   "' is missing from the diff");
}

// ---------------------------------------------------------------------------
// Shared response parsing (script entries and remote bodies use one schema)
// ---------------------------------------------------------------------------

namespace detail {

PlanDraft parse_plan_response(PlanKind kind, const Json& body, const std::string& where) {
    PlanDraft draft;
    draft.kind = kind;
    draft.justification = body.value("justification", std::string{});
    try {
        switch (kind) {
        case PlanKind::team: draft.team = agent_tree_from_json(body.at("agents")); break;
        case PlanKind::tasks: draft.task_lists = task_lists_from_json(body.at("task_lists")); break;
        case PlanKind::replan: draft.strategy = strategy_from_json(body.at("strategy")); break;
        }
    } catch (const Json::exception& e) {
        throw ScriptError(where + ": malformed plan response: " + e.what());
    } catch (const ValueError& e) {
        throw ScriptError(where + ": malformed plan response: " + e.what());
    }
    return draft;
}

ReflectResponse parse_reflect_response(ReflectKind kind, const Json& body,
                                       const std::string& where) {
    ReflectResponse resp;
    std::string verdict;
    try {
        verdict = body.at("verdict").get<std::string>();
    } catch (const Json::exception& e) {
        throw ScriptError(where + ": malformed reflect response: " + e.what());
    }
    static const std::map<std::string, ReflectVerdict> verdicts = {
        {"pass", ReflectVerdict::pass},
        {"fail", ReflectVerdict::fail},
        {"improved", ReflectVerdict::improved},
        {"not_improved", ReflectVerdict::not_improved},
        {"fix", ReflectVerdict::fix}};
    auto it = verdicts.find(verdict);
    if (it == verdicts.end()) throw ScriptError(where + ": unknown verdict '" + verdict + "'");
    resp.verdict = it->second;
    resp.reason = body.value("reason", std::string{});

    auto allowed = [&](std::initializer_list<ReflectVerdict> ok) {
        if (std::find(ok.begin(), ok.end(), resp.verdict) == ok.end())
            throw ScriptError(where + ": verdict '" + verdict + "' is not valid for " +
                              to_string(kind));
    };
    switch (kind) {
    case ReflectKind::team_review:
    case ReflectKind::task_review:
        allowed({ReflectVerdict::pass, ReflectVerdict::fail});
        break;
    case ReflectKind::difference_judgement:
        allowed({ReflectVerdict::improved, ReflectVerdict::not_improved});
        break;
    case ReflectKind::local_fix:
        allowed({ReflectVerdict::fix, ReflectVerdict::fail});
        break;
    }
    if (resp.verdict == ReflectVerdict::fix) {
        if (!body.contains("patch")) throw ScriptError(where + ": fix verdict needs a patch");
        try {
            resp.patch = fix_patch_from_json(body.at("patch"));
        } catch (const Error& e) {
            throw ScriptError(where + ": " + e.what());
        } catch (const Json::exception& e) {
            throw ScriptError(where + ": malformed patch: " + e.what());
        }
    }
    return resp;
}

std::vector<DiffItem> parse_diff_response(const Json& body, const Strategy& s_new,
                                          const Strategy& s_old, const std::string& where) {
    std::map<std::string, StrategyDiff> structural;
    std::vector<std::string> order;
    for (auto& d : diff_strategies(s_old, s_new)) {
        order.push_back(d.path);
        structural[d.path] = std::move(d);
    }

    std::vector<DiffItem> items;
    auto make_item = [&](const StrategyDiff& d, std::string justification) {
        DiffItem item;
        item.diff_id = "d" + std::to_string(items.size() + 1);
        item.path = d.path;
        item.change = d.change;
        item.old_value = d.old_value;
        item.new_value = d.new_value;
        item.justification = std::move(justification);
        items.push_back(std::move(item));
    };

    if (body.value("mode", std::string{}) == "auto") {
        std::string justification = body.value("justification", std::string{});
        for (const auto& path : order) make_item(structural.at(path), justification);
    } else if (body.contains("items")) {
        for (const auto& raw : body.at("items")) {
            std::string path;
            try {
                path = raw.at("path").get<std::string>();
            } catch (const Json::exception& e) {
                throw ScriptError(where + ": malformed diff item: " + e.what());
            }
            auto it = structural.find(path);
            if (it == structural.end())
                throw DiffInconsistent("diff item path '" + path +
                                       "' is not a structural difference");
            make_item(it->second, raw.value("justification", std::string{}));
            if (raw.contains("change"))
                items.back().change = change_from_string(raw.at("change").get<std::string>());
        }
    } else {
        throw ScriptError(where + ": diff response needs mode:auto or items");
    }

    gate_diff_items(items, s_new, s_old);
    return items;
}

} // namespace detail

namespace {

Json diff_request_json(const Strategy& s_new, const Strategy& s_old) {
    return Json{{"op", "diff"}, {"s_new", to_json(s_new)}, {"s_old", to_json(s_old)}};
}

bool entry_matches(const Json& expect, const Json& request) {
    if (!expect.contains("op") || expect.at("op") != request.at("op")) return false;
    if (expect.contains("kind") &&
        (!request.contains("kind") || expect.at("kind") != request.at("kind")))
        return false;
    if (expect.contains("contains")) {
        const std::string needle = expect.at("contains").get<std::string>();
        if (line_text(request).find(needle) == std::string::npos) return false;
    }
    return true;
}

} // namespace

// ---------------------------------------------------------------------------
// Script parsing
// ---------------------------------------------------------------------------

std::vector<ScriptEntry> parse_script(const Json& array, const std::string& origin) {
    if (!array.is_array()) throw ScriptError(origin + ": script must be an array");
    std::vector<ScriptEntry> entries;
    std::size_t i = 0;
    for (const auto& e : array) {
        ++i;
        if (!e.is_object() || !e.contains("expect") || !e.contains("respond"))
            throw ScriptError(origin + ": entry " + std::to_string(i) +
                              " needs expect and respond");
        const Json& expect = e.at("expect");
        if (!expect.contains("op"))
            throw ScriptError(origin + ": entry " + std::to_string(i) + " expect needs an op");
        const std::string op = expect.at("op").get<std::string>();
        if (op != "plan" && op != "reflect" && op != "diff")
            throw ScriptError(origin + ": entry " + std::to_string(i) + " has unknown op '" +
                              op + "'");
        entries.push_back({expect, e.at("respond"), i});
    }
    return entries;
}

std::vector<ScriptEntry> parse_script_text(const std::string& text, const std::string& origin) {
    Json parsed;
    try {
        parsed = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScriptError(origin + ":" + std::to_string(line_of_offset(text, e.byte)) + ": " +
                          e.what());
    }
    return parse_script(parsed, origin);
}

std::unique_ptr<ScriptedReasoner> load_script(const std::string& source_text,
                                              const std::string& origin) {
    return std::make_unique<ScriptedReasoner>(parse_script_text(source_text, origin));
}

// ---------------------------------------------------------------------------
// ScriptedReasoner
// ---------------------------------------------------------------------------

ScriptedReasoner::ScriptedReasoner(std::vector<ScriptEntry> entries)
    : entries_(std::move(entries)) {}

std::size_t ScriptedReasoner::consumed() const {
    std::lock_guard lock(mu_);
    return cursor_;
}

std::size_t ScriptedReasoner::remaining() const {
    std::lock_guard lock(mu_);
    return entries_.size() - cursor_;
}

Json ScriptedReasoner::take(const Json& request) {
    std::lock_guard lock(mu_);
    if (cursor_ >= entries_.size())
        throw ScriptExhausted("script exhausted; unmatched request " +
                              request.value("op", std::string{}) + "/" +
                              request.value("kind", std::string{}));
    const ScriptEntry& entry = entries_[cursor_];
    if (!entry_matches(entry.expect, request))
        throw ScriptMismatch("script entry " + std::to_string(entry.line) + " expects " +
                             line_text(entry.expect) + ", got " +
                             request.value("op", std::string{}) + "/" +
                             request.value("kind", std::string{}));
    ++cursor_;
    return entry.respond;
}

PlanDraft ScriptedReasoner::plan(const PlanRequest& req) {
    req.check();
    Json body = take(to_json(req));
    return detail::parse_plan_response(req.kind, body, "script");
}

ReflectResponse ScriptedReasoner::reflect(const ReflectRequest& req) {
    req.check();
    Json body = take(to_json(req));
    return detail::parse_reflect_response(req.kind, body, "script");
}

std::vector<DiffItem> ScriptedReasoner::diff(const Strategy& s_new, const Strategy& s_old) {
    Json body = take(diff_request_json(s_new, s_old));
    return detail::parse_diff_response(body, s_new, s_old, "script");
}

} // namespace roster
