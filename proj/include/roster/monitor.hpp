#pragma once
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roster/bus.hpp"
#include "roster/execution.hpp"
#include "roster/memory.hpp"
#include "roster/reasoner.hpp"

namespace roster {

// ---------------------------------------------------------------------------
// Error tree
// ---------------------------------------------------------------------------

struct ErrorTreeNode {
    std::string node_id;
    std::string label;
    std::set<std::string> keywords;
    std::vector<ErrorTreeNode> children;
    std::string remediation; // leaves only

    bool is_leaf() const { return children.empty(); }
};

struct ErrorTree {
    ErrorTreeNode root;

    /// Invariants: exactly two top branches labeled pipeline and logic, unique
    /// node ids, depth >= 2. Throws ValueError.
    void check() const;

    const ErrorTreeNode* find(const std::string& node_id) const;
    /// Top-branch label ("pipeline" | "logic") owning the node.
    std::string branch_of(const std::string& node_id) const;
    const ErrorTreeNode* branch(const std::string& label) const;
};

/// The built-in 12-leaf tree (pipeline/logic split); also shipped as an
/// editable data file.
ErrorTree default_error_tree();

ErrorTree error_tree_from_json(const Json& j);
Json to_json(const ErrorTree& t);
Json to_json(const ErrorTreeNode& n);

/// Root-to-leaf descent: at each node the child with the highest Jaccard
/// similarity between its subtree keyword bag and the report keywords wins,
/// ties broken by lexicographic node id. Always reaches a leaf.
std::string classify(const std::set<std::string>& report_keywords, const ErrorTree& tree);

/// Same descent restricted to one top branch (used for escalation).
std::string classify_in_branch(const std::set<std::string>& report_keywords,
                               const ErrorTree& tree, const std::string& branch_label);

// ---------------------------------------------------------------------------
// Global state and verdicts
// ---------------------------------------------------------------------------

struct GlobalState {
    int round = 0;
    Json detailed_report;
    std::vector<Json> normal_reports;
    std::vector<std::string> key_insights;
    std::string strategy_digest;
};

Json to_json(const GlobalState& s);

struct Verdict {
    enum class Kind { instruction, recommendation };
    Kind kind = Kind::instruction;
    std::string classified_leaf;
    // instruction
    std::string target;
    std::vector<FixPatch> steps;
    // recommendation
    std::vector<std::string> insights;
    std::vector<std::string> suggestions;
};

Json to_json(const Verdict& v);

// Monitoring engine for one run: collects global state from alert reports,
// classifies via the error tree, and adjudicates into an Instruction
// (pipeline branch, resolved in place) or a Recommendation + ReplanTrigger
// (logic branch). One alert episode is handled at a time.
class Monitor {
public:
    Monitor(ErrorTree tree, const ScenarioSpec& scenario, MessageBus& bus, MemoryStore& memory,
            std::string monitor_id = "monitor");

    /// Deduplicated key insights from the episode's reports; requires the
    /// detailed report (ProtocolError otherwise). Recorded in short-term
    /// memory.
    GlobalState collect_state(const AlertContext& alert, const Strategy& strategy);

    std::string classify_episode(const AlertContext& alert) const;

    /// Pipeline leaves re-validate the task lists and produce an Instruction
    /// via a LocalFix reflection; logic leaves consolidate the state into a
    /// Recommendation and emit a ReplanTrigger. A second pipeline failure of
    /// the same leaf within a round (or an unfixable pipeline error)
    /// escalates into the logic branch. Reasoner failures surface as
    /// MonitorError.
    Verdict adjudicate(const GlobalState& state, const std::string& leaf,
                       const Strategy& strategy, const AlertContext& alert, Reasoner& reasoner);

    const ErrorTree& tree() const { return tree_; }
    void on_round_advanced(int round);

private:
    Verdict make_recommendation(const GlobalState& state, const std::string& logic_leaf);

    ErrorTree tree_;
    const ScenarioSpec& scenario_;
    MessageBus& bus_;
    MemoryStore& memory_;
    std::string monitor_id_;
    int current_round_ = 0;
    std::map<std::string, int> pipeline_failures_; // leaf -> failures this round
};

/// Memory owner id used by the monitor's partition.
inline const char* monitor_owner() { return "monitor"; }

} // namespace roster
