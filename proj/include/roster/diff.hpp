#pragma once
#include <string>
#include <vector>

#include "roster/domain.hpp"

namespace roster {

enum class ChangeKind { insert, remove, modify };

const char* to_string(ChangeKind c);
ChangeKind change_from_string(const std::string& s);

// One structural change. Paths name exactly one subject:
//   agent:<id>            agent node fields (or its existence)
//   agent:<id>@children   order of <id>'s child agents
//   agent:<id>/task:<tid> one task entry in <id>'s list
//   agent:<id>@tasks      order of <id>'s task list
// Fragments: agents are {"agent":…,"parent":…,"index":…}, tasks are
// {"task":…,"index":…}, order paths are id arrays.
struct StrategyDiff {
    std::string path;
    ChangeKind change = ChangeKind::modify;
    Json old_value;
    Json new_value;
};

/// Changes that turn `from` into `to`, in canonical order: depth-first over
/// `to`'s agent tree (then removed subtrees in `from` order), task paths after
/// their agent, task-list order last per agent.
std::vector<StrategyDiff> diff_strategies(const Strategy& from, const Strategy& to);

/// Path strings of diff_strategies(s1, s2). Empty ⟺ structurally identical
/// (round/provenance excluded); symmetric up to change-direction labels.
std::vector<std::string> strategy_diff_paths(const Strategy& s1, const Strategy& s2);

/// Applies diffs to a copy of `base`. Removes run before inserts at the same
/// parent; order paths run last. Throws DiffError on conflicts (unknown paths,
/// duplicate inserts).
Strategy apply_diffs(const Strategy& base, const std::vector<StrategyDiff>& diffs);

/// True when agents + task lists are structurally equal (round/provenance ignored).
bool same_structure(const Strategy& a, const Strategy& b);

Json to_json(const StrategyDiff& d);

struct PathInfo {
    enum class Kind { agent, children_order, task, task_order } kind = Kind::agent;
    std::string agent;
    std::string task; // set for Kind::task
};

/// Parses a diff path; throws DiffError when it does not name exactly one
/// subject.
PathInfo parse_diff_path(const std::string& path);

} // namespace roster
