#include "roster/diff.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace roster {

const char* to_string(ChangeKind c) {
    switch (c) {
    case ChangeKind::insert: return "insert";
    case ChangeKind::remove: return "remove";
    case ChangeKind::modify: return "modify";
    }
    return "unknown";
}

ChangeKind change_from_string(const std::string& s) {
    if (s == "insert") return ChangeKind::insert;
    if (s == "remove") return ChangeKind::remove;
    if (s == "modify") return ChangeKind::modify;
    throw ValueError("unknown change kind '" + s + "'");
}

namespace {

Json agent_spec_json(const AgentSpec& a) {
    return Json{{"agent_id", a.agent_id},
                {"role", to_string(a.role)},
                {"profile", a.profile},
                {"template_id", a.template_id}};
}

AgentSpec agent_spec_from_json(const Json& j) {
    AgentSpec a;
    a.agent_id = j.at("agent_id").get<std::string>();
    auto role = role_from_string(j.at("role").get<std::string>());
    if (!role) throw DiffError("fragment has unknown role");
    a.role = *role;
    a.profile = j.value("profile", std::string{});
    a.template_id = j.value("template_id", std::string{});
    return a;
}

struct AgentPos {
    const AgentNode* node = nullptr;
    std::string parent;
    int index = 0;
    int dfs = 0;
    int depth = 0;
};

std::map<std::string, AgentPos> index_agents(const Strategy& s) {
    std::map<std::string, AgentPos> out;
    int dfs = 0;
    std::function<void(const AgentNode&, const std::string&, int, int)> visit =
        [&](const AgentNode& n, const std::string& parent, int index, int depth) {
            out[n.spec.agent_id] = {&n, parent, index, dfs++, depth};
            for (std::size_t i = 0; i < n.children.size(); ++i)
                visit(n.children[i], n.spec.agent_id, static_cast<int>(i), depth + 1);
        };
    visit(s.root, "", 0, 0);
    return out;
}

std::vector<std::string> child_ids(const AgentNode& n) {
    std::vector<std::string> out;
    for (const auto& c : n.children) out.push_back(c.spec.agent_id);
    return out;
}

std::vector<std::string> task_ids(const std::vector<TaskEntry>& tasks) {
    std::vector<std::string> out;
    for (const auto& t : tasks) out.push_back(t.task_id);
    return out;
}

// Relative order of the elements common to both sequences.
std::vector<std::string> project_common(const std::vector<std::string>& seq,
                                        const std::vector<std::string>& other) {
    std::set<std::string> in_other(other.begin(), other.end());
    std::vector<std::string> out;
    for (const auto& x : seq)
        if (in_other.count(x)) out.push_back(x);
    return out;
}

Json agent_fragment(const AgentSpec& spec, const std::string& parent, int index) {
    return Json{{"agent", agent_spec_json(spec)}, {"parent", parent}, {"index", index}};
}

Json task_fragment(const TaskEntry& task, int index) {
    return Json{{"task", to_json(task)}, {"index", index}};
}

} // namespace

std::vector<StrategyDiff> diff_strategies(const Strategy& from, const Strategy& to) {
    auto from_agents = index_agents(from);
    auto to_agents = index_agents(to);
    std::vector<StrategyDiff> diffs;

    auto emit = [&](std::string path, ChangeKind ck, Json oldv, Json newv) {
        diffs.push_back({std::move(path), ck, std::move(oldv), std::move(newv)});
    };

    std::function<void(const AgentNode&)> walk = [&](const AgentNode& node) {
        const std::string& id = node.spec.agent_id;
        const AgentPos& pos = to_agents.at(id);
        auto from_it = from_agents.find(id);
        const bool is_new = from_it == from_agents.end();

        if (is_new) {
            emit("agent:" + id, ChangeKind::insert, Json{},
                 agent_fragment(node.spec, pos.parent, pos.index));
        } else {
            const AgentPos& old = from_it->second;
            if (agent_spec_json(old.node->spec) != agent_spec_json(node.spec) ||
                old.parent != pos.parent)
                emit("agent:" + id, ChangeKind::modify,
                     agent_fragment(old.node->spec, old.parent, old.index),
                     agent_fragment(node.spec, pos.parent, pos.index));
            auto old_children = child_ids(*old.node);
            auto new_children = child_ids(node);
            if (project_common(old_children, new_children) !=
                project_common(new_children, old_children))
                emit("agent:" + id + "@children", ChangeKind::modify, Json(old_children),
                     Json(new_children));
        }

        // Task list diffs.
        static const std::vector<TaskEntry> empty;
        const auto* to_tasks = to.tasks_for(id);
        const auto* from_tasks = is_new ? &empty : from.tasks_for(id);
        if (!to_tasks) to_tasks = &empty;
        if (!from_tasks) from_tasks = &empty;

        std::map<std::string, std::pair<const TaskEntry*, int>> from_by_id;
        for (std::size_t i = 0; i < from_tasks->size(); ++i)
            from_by_id[(*from_tasks)[i].task_id] = {&(*from_tasks)[i], static_cast<int>(i)};

        std::set<std::string> seen;
        for (std::size_t i = 0; i < to_tasks->size(); ++i) {
            const TaskEntry& t = (*to_tasks)[i];
            seen.insert(t.task_id);
            auto fit = from_by_id.find(t.task_id);
            if (fit == from_by_id.end())
                emit("agent:" + id + "/task:" + t.task_id, ChangeKind::insert, Json{},
                     task_fragment(t, static_cast<int>(i)));
            else if (to_json(*fit->second.first) != to_json(t))
                emit("agent:" + id + "/task:" + t.task_id, ChangeKind::modify,
                     task_fragment(*fit->second.first, fit->second.second),
                     task_fragment(t, static_cast<int>(i)));
        }
        for (std::size_t i = 0; i < from_tasks->size(); ++i) {
            const TaskEntry& t = (*from_tasks)[i];
            if (seen.count(t.task_id) == 0)
                emit("agent:" + id + "/task:" + t.task_id, ChangeKind::remove,
                     task_fragment(t, static_cast<int>(i)), Json{});
        }
        auto old_order = task_ids(*from_tasks);
        auto new_order = task_ids(*to_tasks);
        if (project_common(old_order, new_order) != project_common(new_order, old_order))
            emit("agent:" + id + "@tasks", ChangeKind::modify, Json(old_order), Json(new_order));

        for (const auto& c : node.children) walk(c);
    };
    walk(to.root);

    // Agents removed from the old tree, in old DFS order.
    std::vector<const AgentNode*> removed;
    for (const auto* a : flatten_tree(from.root))
        if (to_agents.find(a->spec.agent_id) == to_agents.end()) removed.push_back(a);
    for (const auto* a : removed) {
        const std::string& id = a->spec.agent_id;
        const AgentPos& old = from_agents.at(id);
        emit("agent:" + id, ChangeKind::remove, agent_fragment(a->spec, old.parent, old.index),
             Json{});
        if (const auto* tasks = from.tasks_for(id))
            for (std::size_t i = 0; i < tasks->size(); ++i)
                emit("agent:" + id + "/task:" + (*tasks)[i].task_id, ChangeKind::remove,
                     task_fragment((*tasks)[i], static_cast<int>(i)), Json{});
    }

    return diffs;
}

std::vector<std::string> strategy_diff_paths(const Strategy& s1, const Strategy& s2) {
    std::vector<std::string> paths;
    for (const auto& d : diff_strategies(s1, s2)) paths.push_back(d.path);
    return paths;
}

bool same_structure(const Strategy& a, const Strategy& b) {
    return to_json(a.root) == to_json(b.root) && to_json(a.task_lists) == to_json(b.task_lists);
}

Json to_json(const StrategyDiff& d) {
    return Json{{"path", d.path},
                {"change", to_string(d.change)},
                {"old_value", d.old_value},
                {"new_value", d.new_value}};
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

PathInfo parse_diff_path(const std::string& path) {
    if (path.rfind("agent:", 0) != 0) throw DiffError("malformed diff path '" + path + "'");
    std::string rest = path.substr(6);
    auto slash = rest.find("/task:");
    if (slash != std::string::npos) {
        std::string agent = rest.substr(0, slash);
        std::string task = rest.substr(slash + 6);
        if (agent.empty() || task.empty()) throw DiffError("malformed diff path '" + path + "'");
        return {PathInfo::Kind::task, agent, task};
    }
    auto at = rest.find('@');
    if (at != std::string::npos) {
        std::string attr = rest.substr(at + 1);
        if (attr == "children") return {PathInfo::Kind::children_order, rest.substr(0, at), ""};
        if (attr == "tasks") return {PathInfo::Kind::task_order, rest.substr(0, at), ""};
        throw DiffError("malformed diff path '" + path + "'");
    }
    if (rest.empty()) throw DiffError("malformed diff path '" + path + "'");
    return {PathInfo::Kind::agent, rest, ""};
}

namespace {

AgentNode* find_node(AgentNode& root, const std::string& id) {
    if (root.spec.agent_id == id) return &root;
    for (auto& c : root.children)
        if (auto* n = find_node(c, id)) return n;
    return nullptr;
}

AgentNode* find_parent_of(AgentNode& root, const std::string& id) {
    for (auto& c : root.children) {
        if (c.spec.agent_id == id) return &root;
        if (auto* p = find_parent_of(c, id)) return p;
    }
    return nullptr;
}

int node_depth(AgentNode& root, const std::string& id, int depth = 0) {
    if (root.spec.agent_id == id) return depth;
    for (auto& c : root.children) {
        int d = node_depth(c, id, depth + 1);
        if (d >= 0) return d;
    }
    return -1;
}

template <typename T>
void insert_clamped(std::vector<T>& vec, int index, T value) {
    auto pos = std::min<std::size_t>(std::max(index, 0), vec.size());
    vec.insert(vec.begin() + static_cast<std::ptrdiff_t>(pos), std::move(value));
}

} // namespace

Strategy apply_diffs(const Strategy& base, const std::vector<StrategyDiff>& diffs) {
    Strategy s = base;

    std::vector<const StrategyDiff*> task_removes, agent_removes, agent_inserts, agent_mods,
        task_inserts, task_mods, child_orders, task_orders;
    for (const auto& d : diffs) {
        PathInfo p = parse_diff_path(d.path);
        switch (p.kind) {
        case PathInfo::Kind::agent:
            (d.change == ChangeKind::remove   ? agent_removes
             : d.change == ChangeKind::insert ? agent_inserts
                                              : agent_mods)
                .push_back(&d);
            break;
        case PathInfo::Kind::task:
            (d.change == ChangeKind::remove   ? task_removes
             : d.change == ChangeKind::insert ? task_inserts
                                              : task_mods)
                .push_back(&d);
            break;
        case PathInfo::Kind::children_order: child_orders.push_back(&d); break;
        case PathInfo::Kind::task_order: task_orders.push_back(&d); break;
        }
    }

    for (const auto* d : task_removes) {
        PathInfo p = parse_diff_path(d->path);
        auto* tasks = s.tasks_for(p.agent);
        if (!tasks) throw DiffError("remove " + d->path + ": unknown agent");
        auto it = std::find_if(tasks->begin(), tasks->end(),
                               [&](const TaskEntry& t) { return t.task_id == p.task; });
        if (it == tasks->end()) throw DiffError("remove " + d->path + ": unknown task");
        tasks->erase(it);
    }

    // Deepest agents first so subtree removal never splices twice.
    std::sort(agent_removes.begin(), agent_removes.end(), [&](const auto* a, const auto* b) {
        return node_depth(s.root, parse_diff_path(a->path).agent) >
               node_depth(s.root, parse_diff_path(b->path).agent);
    });
    for (const auto* d : agent_removes) {
        PathInfo p = parse_diff_path(d->path);
        if (s.root.spec.agent_id == p.agent)
            throw DiffError("remove " + d->path + ": cannot remove the root agent");
        AgentNode* parent = find_parent_of(s.root, p.agent);
        if (!parent) throw DiffError("remove " + d->path + ": unknown agent");
        auto it = std::find_if(parent->children.begin(), parent->children.end(),
                               [&](const AgentNode& n) { return n.spec.agent_id == p.agent; });
        std::vector<AgentNode> orphans = std::move(it->children);
        auto pos = parent->children.erase(it);
        parent->children.insert(pos, std::make_move_iterator(orphans.begin()),
                                std::make_move_iterator(orphans.end()));
        s.task_lists.erase(std::remove_if(s.task_lists.begin(), s.task_lists.end(),
                                          [&](const auto& e) { return e.first == p.agent; }),
                           s.task_lists.end());
    }

    // Inserts whose parent is itself inserted resolve over multiple passes.
    std::sort(agent_inserts.begin(), agent_inserts.end(), [](const auto* a, const auto* b) {
        return a->new_value.value("index", 0) < b->new_value.value("index", 0);
    });
    std::vector<const StrategyDiff*> pending = agent_inserts;
    while (!pending.empty()) {
        std::vector<const StrategyDiff*> next;
        bool progress = false;
        for (const auto* d : pending) {
            PathInfo p = parse_diff_path(d->path);
            std::string parent_id = d->new_value.value("parent", std::string{});
            if (find_node(s.root, p.agent))
                throw DiffError("insert " + d->path + ": agent already exists");
            AgentNode* parent = parent_id.empty() ? nullptr : find_node(s.root, parent_id);
            if (!parent) {
                next.push_back(d);
                continue;
            }
            AgentNode node;
            node.spec = agent_spec_from_json(d->new_value.at("agent"));
            insert_clamped(parent->children, d->new_value.value("index", 0), std::move(node));
            s.task_lists.emplace_back(p.agent, std::vector<TaskEntry>{});
            progress = true;
        }
        if (!progress)
            throw DiffError("insert " + pending.front()->path + ": unknown parent agent");
        pending = std::move(next);
    }

    std::sort(agent_mods.begin(), agent_mods.end(), [](const auto* a, const auto* b) {
        return a->new_value.value("index", 0) < b->new_value.value("index", 0);
    });
    for (const auto* d : agent_mods) {
        PathInfo p = parse_diff_path(d->path);
        AgentNode* node = find_node(s.root, p.agent);
        if (!node) throw DiffError("modify " + d->path + ": unknown agent");
        std::string new_parent = d->new_value.value("parent", std::string{});
        AgentNode* old_parent = find_parent_of(s.root, p.agent);
        std::string old_parent_id = old_parent ? old_parent->spec.agent_id : std::string{};
        node->spec = agent_spec_from_json(d->new_value.at("agent"));
        if (new_parent != old_parent_id) {
            if (!old_parent) throw DiffError("modify " + d->path + ": cannot move the root");
            AgentNode* target = find_node(s.root, new_parent);
            if (!target) throw DiffError("modify " + d->path + ": unknown parent");
            auto it = std::find_if(old_parent->children.begin(), old_parent->children.end(),
                                   [&](const AgentNode& n) { return n.spec.agent_id == p.agent; });
            AgentNode moved = std::move(*it);
            old_parent->children.erase(it);
            // target may have moved in memory if it sat inside old_parent's vector
            target = find_node(s.root, new_parent);
            insert_clamped(target->children, d->new_value.value("index", 0), std::move(moved));
        }
    }

    std::sort(task_inserts.begin(), task_inserts.end(), [](const auto* a, const auto* b) {
        return a->new_value.value("index", 0) < b->new_value.value("index", 0);
    });
    for (const auto* d : task_inserts) {
        PathInfo p = parse_diff_path(d->path);
        auto* tasks = s.tasks_for(p.agent);
        if (!tasks) throw DiffError("insert " + d->path + ": unknown agent");
        insert_clamped(*tasks, d->new_value.value("index", 0),
                       task_from_json(d->new_value.at("task")));
    }

    for (const auto* d : task_mods) {
        PathInfo p = parse_diff_path(d->path);
        auto* tasks = s.tasks_for(p.agent);
        if (!tasks) throw DiffError("modify " + d->path + ": unknown agent");
        auto it = std::find_if(tasks->begin(), tasks->end(),
                               [&](const TaskEntry& t) { return t.task_id == p.task; });
        if (it == tasks->end()) throw DiffError("modify " + d->path + ": unknown task");
        *it = task_from_json(d->new_value.at("task"));
    }

    for (const auto* d : child_orders) {
        PathInfo p = parse_diff_path(d->path);
        AgentNode* node = find_node(s.root, p.agent);
        if (!node) throw DiffError("reorder " + d->path + ": unknown agent");
        std::vector<AgentNode> reordered;
        for (const auto& id : d->new_value) {
            auto it = std::find_if(node->children.begin(), node->children.end(), [&](const AgentNode& n) {
                return n.spec.agent_id == id.get<std::string>();
            });
            if (it != node->children.end()) {
                reordered.push_back(std::move(*it));
                node->children.erase(it);
            }
        }
        for (auto& leftover : node->children) reordered.push_back(std::move(leftover));
        node->children = std::move(reordered);
    }

    for (const auto* d : task_orders) {
        PathInfo p = parse_diff_path(d->path);
        auto* tasks = s.tasks_for(p.agent);
        if (!tasks) throw DiffError("reorder " + d->path + ": unknown agent");
        std::vector<TaskEntry> reordered;
        for (const auto& id : d->new_value) {
            auto it = std::find_if(tasks->begin(), tasks->end(), [&](const TaskEntry& t) {
                return t.task_id == id.get<std::string>();
            });
            if (it != tasks->end()) {
                reordered.push_back(std::move(*it));
                tasks->erase(it);
            }
        }
        for (auto& leftover : *tasks) reordered.push_back(std::move(leftover));
        *tasks = std::move(reordered);
    }

    s.normalize();
    return s;
}

} // namespace roster
