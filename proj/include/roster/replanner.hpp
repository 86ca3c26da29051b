#pragma once
#include <string>
#include <vector>

#include "roster/domain.hpp"
#include "roster/memory.hpp"
#include "roster/monitor.hpp"
#include "roster/reasoner.hpp"

namespace roster {

// Gap-narrow rules: pure predicates over (diff item, global state,
// recommendation, base strategy). Built-in kinds:
//   justification_grounded  (R1) justification references an insight/suggestion
//   remove_implicated       (R2) removes may only target implicated subjects
//   single_subject          (R3) one item touches one agent or one task entry
//   no_new_errors           (R4) applying the item introduces no error finding
// plus the config-extensible kinds forbid_change {change} and
// path_prefix_forbidden {prefix}.
struct GapRule {
    std::string rule_id;
    std::string kind;
    std::string description;
    Json parameters;
};

std::vector<GapRule> default_gap_rules();
GapRule gap_rule_from_json(const Json& j);
Json to_json(const GapRule& r);

struct ReplanConfig {
    int max_replan_retries = 3; // regeneration budget per replan invocation
    std::vector<GapRule> rules = default_gap_rules();
    std::size_t context_budget = 6; // hybrid context records folded into the prompt
    bool gap_narrow = true;         // ablation: false skips rule checks
};

struct RuleCheck {
    bool pass = true;
    std::string rule_id; // violated rule when !pass
    std::string detail;
};

/// Evaluates rules in order against one diff item; the first violation wins.
/// `base` is the strategy the item would be applied to (the old strategy with
/// previously accepted items folded in), `scenario` backs the re-validation
/// rule.
RuleCheck check_rules(const DiffItem& item, const std::vector<GapRule>& rules,
                      const GlobalState& state, const Verdict& recommendation,
                      const Strategy& base, const ScenarioSpec& scenario,
                      const std::vector<DiffItem>& accepted_so_far);

struct ReplanResult {
    Strategy strategy; // S_opt
    std::vector<std::string> accepted_paths;
    int regenerations = 0;
};

struct ReplanExhausted : Error {
    ReplanExhausted(std::string msg, std::vector<ValidationFinding> f = {})
        : Error(std::move(msg)), findings(std::move(f)) {}
    std::vector<ValidationFinding> findings;
};

/// Re-planning phase: plan S_new from (G, recommendation, query, S_old,
/// prompt + hybrid context), diff against S_old (gated by the structural
/// differ), filter each difference through the gap rules and the improvement
/// judgement, regenerate within the retry budget, then integrate accepted
/// differences into S_opt (round + 1, replanned, revalidated). S_old is
/// archived to long-term memory and S_opt recorded in short-term memory.
/// Throws ReplanExhausted when the budget runs out before a valid S_opt.
ReplanResult replan(const GlobalState& state, const Verdict& recommendation,
                    const ScenarioSpec& scenario, const Strategy& s_old,
                    const std::string& scenario_prompt, Reasoner& reasoner, MemoryStore& memory,
                    const ReplanConfig& config = {});

} // namespace roster
