#pragma once
#include <string>
#include <vector>

#include "roster/domain.hpp"
#include "roster/memory.hpp"
#include "roster/reasoner.hpp"

namespace roster {

/// Default profile template; slots are {goal} {description} {constraints}
/// {agentset} {toolkit}.
extern const char* const kDefaultProfileTemplate;

struct InitConfig {
    int max_self_retries = 2; // extra attempts per stage after the first
    std::string profile_template = kDefaultProfileTemplate;
};

/// Renders the profile prompt. Unknown slots raise TemplateError; output is
/// deterministic for equal inputs.
std::string build_profile(const std::string& tmpl, const ScenarioSpec& scenario);

struct InitAttempt {
    std::string stage; // "team" | "tasks"
    int attempt = 0;   // 0 = first try
    std::vector<ValidationFinding> findings;
    std::string verdict; // "pass", "fail: <reason>", "validator" (reflect skipped)
};

struct InitResult {
    Strategy strategy;
    std::string profile;
    std::vector<InitAttempt> trace;
    int team_retries = 0;
    int task_retries = 0;
};

struct InitializationFailed : Error {
    InitializationFailed(std::string msg, std::vector<ValidationFinding> f)
        : Error(std::move(msg)), findings(std::move(f)) {}
    std::vector<ValidationFinding> findings;
};

/// Initialization phase: plan the team, validate + review it, plan the task
/// lists, validate + review them, retrying each stage up to
/// config.max_self_retries with findings folded back into the context. The
/// accepted strategy (round 0, initial) and the reflection trace land in the
/// planner's short-term memory. Throws InitializationFailed when a stage
/// exhausts its budget.
InitResult initialize(const ScenarioSpec& scenario, Reasoner& reasoner, MemoryStore& memory,
                      const InitConfig& config = {});

Json to_json(const InitAttempt& a);

/// Memory owner id used by the planner's partition.
inline const char* planner_owner() { return "planner"; }

} // namespace roster
