#include "roster/monitor.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "roster/text.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Error tree
// ---------------------------------------------------------------------------

void ErrorTree::check() const {
    if (root.children.size() != 2)
        throw ValueError("error tree needs exactly two top branches");
    std::set<std::string> labels;
    for (const auto& b : root.children) labels.insert(b.label);
    if (labels != std::set<std::string>{"pipeline", "logic"})
        throw ValueError("top branches must be labeled pipeline and logic");
    for (const auto& b : root.children)
        if (b.is_leaf()) throw ValueError("branch '" + b.label + "' has no leaves (depth < 2)");

    std::set<std::string> ids;
    std::function<void(const ErrorTreeNode&)> visit = [&](const ErrorTreeNode& n) {
        if (n.node_id.empty()) throw ValueError("error tree node without id");
        if (!ids.insert(n.node_id).second)
            throw ValueError("duplicate error tree node id '" + n.node_id + "'");
        for (const auto& c : n.children) visit(c);
    };
    visit(root);
}

const ErrorTreeNode* ErrorTree::find(const std::string& node_id) const {
    const ErrorTreeNode* found = nullptr;
    std::function<void(const ErrorTreeNode&)> visit = [&](const ErrorTreeNode& n) {
        if (found) return;
        if (n.node_id == node_id) {
            found = &n;
            return;
        }
        for (const auto& c : n.children) visit(c);
    };
    visit(root);
    return found;
}

const ErrorTreeNode* ErrorTree::branch(const std::string& label) const {
    for (const auto& b : root.children)
        if (b.label == label) return &b;
    return nullptr;
}

std::string ErrorTree::branch_of(const std::string& node_id) const {
    for (const auto& b : root.children) {
        std::function<bool(const ErrorTreeNode&)> contains = [&](const ErrorTreeNode& n) {
            if (n.node_id == node_id) return true;
            return std::any_of(n.children.begin(), n.children.end(), contains);
        };
        if (contains(b)) return b.label;
    }
    return {};
}

Json to_json(const ErrorTreeNode& n) {
    Json j{{"node_id", n.node_id}, {"label", n.label},
           {"keywords", std::vector<std::string>(n.keywords.begin(), n.keywords.end())}};
    if (n.is_leaf()) {
        j["remediation"] = n.remediation;
    } else {
        Json children = Json::array();
        for (const auto& c : n.children) children.push_back(to_json(c));
        j["children"] = children;
    }
    return j;
}

Json to_json(const ErrorTree& t) { return to_json(t.root); }

namespace {

ErrorTreeNode node_from_json(const Json& j) {
    ErrorTreeNode n;
    n.node_id = j.at("node_id").get<std::string>();
    n.label = j.value("label", n.node_id);
    if (j.contains("keywords"))
        for (const auto& k : j.at("keywords")) n.keywords.insert(k.get<std::string>());
    if (j.contains("children"))
        for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
    n.remediation = j.value("remediation", std::string{});
    return n;
}

} // namespace

ErrorTree error_tree_from_json(const Json& j) {
    ErrorTree t;
    t.root = node_from_json(j);
    t.check();
    return t;
}

ErrorTree default_error_tree() {
    static const char* kTree = R"JSON({
  "node_id": "root", "label": "error", "keywords": [],
  "children": [
    {"node_id": "logic", "label": "logic", "keywords": ["logic", "team", "design", "strategy"],
     "children": [
      {"node_id": "l_constraint_violation", "label": "constraint violation",
       "keywords": ["constraint", "violated", "violation", "limit", "exceeded"],
       "remediation": "revise the strategy to satisfy the scenario constraints"},
      {"node_id": "l_coupling_failure", "label": "coupling failure",
       "keywords": ["coupling", "redundant", "isolated", "orphan", "team"],
       "remediation": "add or remove agents so every team member is coupled to the workflow"},
      {"node_id": "l_missing_capability", "label": "missing capability",
       "keywords": ["capability", "missing", "unsupported", "lacking", "unable"],
       "remediation": "add an agent or tool that covers the missing capability"},
      {"node_id": "l_plan_incomplete", "label": "plan incomplete",
       "keywords": ["plan", "incomplete", "unassigned", "gap", "uncovered"],
       "remediation": "extend the task lists to cover the unmet goal"},
      {"node_id": "l_role_forbidden", "label": "role forbidden",
       "keywords": ["role", "forbidden", "disallowed", "agentset", "prohibited"],
       "remediation": "replace the forbidden role with one from the allowed agent set"},
      {"node_id": "l_task_goal_mismatch", "label": "task goal mismatch",
       "keywords": ["goal", "mismatch", "objective", "irrelevant", "wrong"],
       "remediation": "realign task outputs with the stated goal"},
      {"node_id": "l_toolkit_insufficient", "label": "toolkit insufficient",
       "keywords": ["toolkit", "insufficient", "unavailable", "unknown"],
       "remediation": "swap the unavailable tool for one in the toolkit"}
     ]},
    {"node_id": "pipeline", "label": "pipeline", "keywords": ["pipeline", "task", "step", "flow"],
     "children": [
      {"node_id": "p_binding", "label": "binding",
       "keywords": ["binding", "unresolved", "input", "missing", "upstream", "resolve"],
       "remediation": "rebind the failing input to an existing upstream output and retry"},
      {"node_id": "p_dependency_order", "label": "dependency order",
       "keywords": ["dependency", "order", "cycle", "sequence", "deadlock"],
       "remediation": "reorder task execution to honor declared dependencies"},
      {"node_id": "p_tool_failure", "label": "tool failure",
       "keywords": ["tool", "failure", "failed", "transient", "crash", "exception"],
       "remediation": "retry the failing task with the same bindings"},
      {"node_id": "p_tool_timeout", "label": "tool timeout",
       "keywords": ["timeout", "deadline", "slow", "delay", "stalled"],
       "remediation": "retry the task after the delay clears"},
      {"node_id": "p_type_mismatch", "label": "type mismatch",
       "keywords": ["type", "mismatch", "schema", "corrupted", "incompatible", "conform"],
       "remediation": "correct the output binding types before retrying"}
     ]}
  ]
})JSON";
    return error_tree_from_json(Json::parse(kTree));
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

void subtree_bag(const ErrorTreeNode& n, std::set<std::string>& bag) {
    bag.insert(n.keywords.begin(), n.keywords.end());
    for (const auto& c : n.children) subtree_bag(c, bag);
}

std::string descend(const ErrorTreeNode& from, const std::set<std::string>& keywords) {
    const ErrorTreeNode* node = &from;
    while (!node->is_leaf()) {
        const ErrorTreeNode* best = nullptr;
        double best_score = -1.0;
        for (const auto& child : node->children) {
            std::set<std::string> bag;
            subtree_bag(child, bag);
            double score = jaccard(bag, keywords);
            if (score > best_score ||
                (score == best_score && best && child.node_id < best->node_id)) {
                best = &child;
                best_score = score;
            }
        }
        node = best;
    }
    return node->node_id;
}

} // namespace

std::string classify(const std::set<std::string>& report_keywords, const ErrorTree& tree) {
    return descend(tree.root, report_keywords);
}

std::string classify_in_branch(const std::set<std::string>& report_keywords,
                               const ErrorTree& tree, const std::string& branch_label) {
    const ErrorTreeNode* b = tree.branch(branch_label);
    if (!b) throw ValueError("no branch labeled '" + branch_label + "'");
    return descend(*b, report_keywords);
}

// ---------------------------------------------------------------------------
// Global state
// ---------------------------------------------------------------------------

Json to_json(const GlobalState& s) {
    return Json{{"round", s.round},
                {"detailed_report", s.detailed_report},
                {"normal_reports", s.normal_reports},
                {"key_insights", s.key_insights},
                {"strategy", s.strategy_digest}};
}

Json to_json(const Verdict& v) {
    Json j{{"kind", v.kind == Verdict::Kind::instruction ? "Instruction" : "Recommendation"},
           {"classified_leaf", v.classified_leaf}};
    if (v.kind == Verdict::Kind::instruction) {
        j["target"] = v.target;
        Json steps = Json::array();
        for (const auto& p : v.steps) steps.push_back(to_json(p));
        j["steps"] = steps;
    } else {
        j["insights"] = v.insights;
        j["suggestions"] = v.suggestions;
    }
    return j;
}

namespace {

// Insight markers embedded in report text: task:<id>, agent:<id>,
// constraint:<token>.
void scan_markers(const std::string& text, std::vector<std::string>& out,
                  std::set<std::string>& seen) {
    static const std::vector<std::string> prefixes = {"task:", "agent:", "constraint:"};
    for (const auto& prefix : prefixes) {
        std::size_t pos = 0;
        while ((pos = text.find(prefix, pos)) != std::string::npos) {
            std::size_t start = pos + prefix.size();
            std::string token;
            while (start < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[start])) || text[start] == '_'))
                token.push_back(text[start++]);
            if (!token.empty()) {
                std::string insight = prefix + token;
                if (seen.insert(insight).second) out.push_back(insight);
            }
            pos = start;
        }
    }
}

} // namespace

Monitor::Monitor(ErrorTree tree, const ScenarioSpec& scenario, MessageBus& bus,
                 MemoryStore& memory, std::string monitor_id)
    : tree_(std::move(tree)), scenario_(scenario), bus_(bus), memory_(memory),
      monitor_id_(std::move(monitor_id)) {
    tree_.check();
}

void Monitor::on_round_advanced(int round) {
    current_round_ = round;
    pipeline_failures_.clear();
}

GlobalState Monitor::collect_state(const AlertContext& alert, const Strategy& strategy) {
    if (alert.detailed.worker.empty())
        throw ProtocolError("alert episode is missing the detailed report");

    GlobalState state;
    state.round = strategy.round;
    state.detailed_report = to_json(alert.detailed);
    for (const auto& peer : alert.peer_reports) state.normal_reports.push_back(to_json(peer));
    state.strategy_digest = strategy_digest(strategy);

    std::set<std::string> seen;
    auto push = [&](const std::string& insight) {
        if (seen.insert(insight).second) state.key_insights.push_back(insight);
    };
    push("class:" + alert.detailed.failure_class);
    push("task:" + alert.detailed.task_id);
    push("agent:" + alert.detailed.worker);
    scan_markers(alert.detailed.error_message, state.key_insights, seen);
    for (const auto& line : alert.detailed.logs) scan_markers(line, state.key_insights, seen);
    for (const auto& line : alert.detailed.history) scan_markers(line, state.key_insights, seen);
    for (const auto& peer : alert.peer_reports) {
        for (const auto& line : peer.results) scan_markers(line, state.key_insights, seen);
        for (const auto& line : peer.context) scan_markers(line, state.key_insights, seen);
    }

    memory_.record(monitor_owner(), Tier::short_term, canonical_text(to_json(state)),
                   {"global_state", "round:" + std::to_string(state.round)}, 0.8, state.round);
    return state;
}

std::string Monitor::classify_episode(const AlertContext& alert) const {
    return classify(alert.detailed.keywords, tree_);
}

Verdict Monitor::make_recommendation(const GlobalState& state, const std::string& logic_leaf) {
    const ErrorTreeNode* leaf = tree_.find(logic_leaf);
    Verdict v;
    v.kind = Verdict::Kind::recommendation;
    v.classified_leaf = logic_leaf;
    v.insights = state.key_insights;
    v.suggestions.push_back("s1: " + (leaf ? leaf->remediation : std::string{"replan"}));
    return v;
}

Verdict Monitor::adjudicate(const GlobalState& state, const std::string& leaf,
                            const Strategy& strategy, const AlertContext& alert,
                            Reasoner& reasoner) {
    const ErrorTreeNode* node = tree_.find(leaf);
    if (!node) throw ValueError("leaf '" + leaf + "' is not in the error tree");
    const std::string branch = tree_.branch_of(leaf);

    Verdict verdict;
    if (branch == "pipeline") {
        int& failures = pipeline_failures_[leaf];
        ++failures;
        bool escalate = failures > 1; // second failure of the same leaf this round

        if (!escalate) {
            auto findings =
                validate_tasks(strategy.task_lists, scenario_.toolkit, scenario_.constraints);
            // Upstream/downstream result audit: recorded outputs must conform
            // to their tool's schema.
            for (const auto& [task_id, outputs] : alert.round_results) {
                const TaskEntry* task = strategy.find_task(task_id);
                const ToolSpec* tool = task ? scenario_.find_tool(task->tool) : nullptr;
                if (!tool) continue;
                for (const auto& field : tool->outputs)
                    if (!outputs.contains(field.name) ||
                        !value_conforms(outputs.at(field.name), field.type))
                        findings.push_back(
                            {CheckKind::io_parameter_logic, Severity::error, task_id,
                             "recorded output '" + field.name + "' violates '" + field.type +
                                 "'"});
            }

            ReflectRequest req;
            req.kind = ReflectKind::local_fix;
            req.subject = Json{{"report", state.detailed_report},
                               {"findings", Json::array()},
                               {"leaf", leaf}};
            for (const auto& f : findings) req.subject["findings"].push_back(to_json(f));
            req.evidence = state.key_insights;
            ReflectResponse resp;
            try {
                resp = reasoner.reflect(req);
            } catch (const Error& e) {
                throw MonitorError(std::string("reasoner failed during adjudication: ") +
                                   e.what());
            }
            if (resp.verdict == ReflectVerdict::fix) {
                verdict.kind = Verdict::Kind::instruction;
                verdict.classified_leaf = leaf;
                verdict.target = alert.failing_agent;
                FixPatch patch = *resp.patch;
                if (patch.task_id.empty()) patch.task_id = alert.failing_task;
                verdict.steps.push_back(std::move(patch));
            } else {
                escalate = true; // reasoner sees no local fix
            }
        }
        if (escalate)
            verdict = make_recommendation(
                state, classify_in_branch(alert.detailed.keywords, tree_, "logic"));
    } else {
        verdict = make_recommendation(state, leaf);
    }

    memory_.record(monitor_owner(), Tier::short_term, canonical_text(to_json(verdict)),
                   {"verdict",
                    verdict.kind == Verdict::Kind::instruction ? "instruction" : "recommendation"},
                   0.7, state.round);

    if (verdict.kind == Verdict::Kind::instruction) {
        Message msg;
        msg.sender = monitor_id_;
        msg.kind = MsgKind::instruction;
        msg.round = state.round;
        msg.payload = to_json(verdict);
        bus_.broadcast(std::move(msg)); // resume signal for every paused worker
    } else {
        Message rec;
        rec.sender = monitor_id_;
        rec.recipients = Recipients::unicast("planner");
        rec.kind = MsgKind::recommendation;
        rec.round = state.round;
        rec.payload = to_json(verdict);
        bus_.send(std::move(rec));
        Message trigger;
        trigger.sender = monitor_id_;
        trigger.recipients = Recipients::unicast("planner");
        trigger.kind = MsgKind::replan_trigger;
        trigger.round = state.round;
        trigger.payload = Json{{"round", state.round}, {"leaf", verdict.classified_leaf}};
        bus_.send(std::move(trigger));
    }
    return verdict;
}

} // namespace roster
