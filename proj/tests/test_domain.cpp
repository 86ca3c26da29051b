#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "roster/domain.hpp"
#include "support/builders.hpp"
#include "support/generators.hpp"

using namespace roster;
using namespace roster::testing;

TEST_CASE("scenario invariants") {
    ScenarioSpec s = fixture_scenario();
    CHECK_NOTHROW(s.check());

    SUBCASE("empty goal") {
        s.goal.clear();
        CHECK_THROWS_AS(s.check(), ValueError);
    }
    SUBCASE("duplicate tool names") {
        s.toolkit.push_back(s.toolkit.front());
        CHECK_THROWS_AS(s.check(), ValueError);
    }
    SUBCASE("duplicate schema params") {
        s.toolkit[0].inputs.push_back(s.toolkit[0].inputs.front());
        CHECK_THROWS_AS(s.check(), ValueError);
    }
}

TEST_CASE("constraint grammar") {
    CHECK(parse_constraint("max_agents 5").kind == Constraint::Kind::max_agents);
    CHECK(parse_constraint("max_agents 5").limit == 5);
    CHECK(parse_constraint("require_role extractor").role == Role::extractor);
    CHECK(parse_constraint("forbid_role painter").kind == Constraint::Kind::forbid_role);
    CHECK(parse_constraint("require_tool aggregate").tool == "aggregate");
    // anything else is free text for the reasoner
    CHECK(parse_constraint("prefer cheap plans").kind == Constraint::Kind::free_text);
    CHECK(parse_constraint("max_agents five").kind == Constraint::Kind::free_text);
    CHECK(parse_constraint("require_role alchemist").kind == Constraint::Kind::free_text);
    CHECK(parse_constraint("max_agents 5 strictly").kind == Constraint::Kind::free_text);
}

TEST_CASE("validate_team: permitted roles produce no findings") {
    ScenarioSpec scenario = fixture_scenario();
    CHECK(validate_team(fixture_team(), scenario).empty());
}

TEST_CASE("validate_team: role outside the agentset") {
    ScenarioSpec scenario = fixture_scenario(); // no painter allowed
    AgentNode team = fixture_team(true);        // includes pnt1
    auto findings = validate_team(team, scenario);
    REQUIRE_FALSE(findings.empty());
    bool flagged = false;
    for (const auto& f : findings)
        if (f.check == CheckKind::compliance && f.severity == Severity::error &&
            f.subject == "pnt1")
            flagged = true;
    CHECK(flagged);
}

TEST_CASE("validate_team: duplicate role + profile is a redundancy warning") {
    ScenarioSpec scenario = fixture_scenario();
    AgentNode team = fixture_team();
    AgentNode dup = agent("ext2", Role::extractor, "loads table:sales"); // same profile as ext1
    team.children.insert(team.children.begin() + 1, dup);

    // Oracle: enumerate (role, profile) pairs, expect one duplicate.
    std::map<std::pair<std::string, std::string>, int> multiset;
    for (const auto* a : flatten_tree(team))
        multiset[{to_string(a->spec.role), a->spec.profile}]++;
    int expected_dups = 0;
    for (const auto& [key, n] : multiset) expected_dups += n - 1;
    REQUIRE(expected_dups == 1);

    auto findings = validate_team(team, scenario);
    int warnings = 0;
    for (const auto& f : findings)
        if (f.check == CheckKind::system_individual_coupling && f.severity == Severity::warning)
            ++warnings;
    CHECK(warnings == expected_dups);
    CHECK_FALSE(has_errors(findings));
}

TEST_CASE("validate_team: structure and coupling rules") {
    ScenarioSpec scenario = fixture_scenario(true);

    SUBCASE("duplicate agent ids are a structure error") {
        AgentNode team = fixture_team();
        team.children.push_back(agent("ext1", Role::extractor, "clone"));
        CHECK_THROWS_AS(validate_team(team, scenario), StructureError);
    }
    SUBCASE("non-tasker root") {
        AgentNode team = agent("solo", Role::extractor, "rogue extractor");
        auto findings = validate_team(team, scenario);
        REQUIRE(!findings.empty());
        CHECK(findings.front().check == CheckKind::system_individual_coupling);
        CHECK(has_errors(findings));
    }
    SUBCASE("retriever ordered before extractor") {
        AgentNode team = agent("boss", Role::tasker, "coordinates");
        team.children.push_back(agent("ret1", Role::retriever, "early retriever"));
        team.children.push_back(agent("ext1", Role::extractor, "late extractor"));
        auto findings = validate_team(team, scenario);
        bool order_error = false;
        for (const auto& f : findings)
            if (f.check == CheckKind::system_individual_coupling && f.subject == "ext1")
                order_error = true;
        CHECK(order_error);
    }
    SUBCASE("painter with no producers is isolated") {
        AgentNode team = agent("boss", Role::tasker, "coordinates");
        team.children.push_back(agent("pnt1", Role::painter, "charts"));
        auto findings = validate_team(team, scenario);
        bool isolated = false;
        for (const auto& f : findings)
            if (f.subject == "pnt1" && f.check == CheckKind::system_individual_coupling &&
                f.severity == Severity::error)
                isolated = true;
        CHECK(isolated);
    }
    SUBCASE("profile references an unknown data source") {
        AgentNode team = fixture_team();
        team.children[0].spec.profile = "loads table:payroll";
        auto findings = validate_team(team, scenario);
        bool flagged = false;
        for (const auto& f : findings)
            if (f.check == CheckKind::scenario_compatibility && f.subject == "ext1")
                flagged = true;
        CHECK(flagged);
    }
    SUBCASE("max_agents and require_role") {
        ScenarioSpec tight = fixture_scenario();
        tight.constraints = {"max_agents 2", "require_role retriever"};
        AgentNode team = fixture_team(); // 3 agents, has retriever
        auto findings = validate_team(team, tight);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].check == CheckKind::compliance);

        tight.constraints = {"forbid_role retriever"};
        findings = validate_team(team, tight);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].subject == "ret1");
    }
}

TEST_CASE("validate_tasks: empty list is vacuous") {
    CHECK(validate_tasks({}, builtin_tool_specs()).empty());
}

TEST_CASE("validate_tasks: clean fixture passes") {
    Strategy s = fixture_strategy();
    CHECK(validate_tasks(s.task_lists, builtin_tool_specs()).empty());
}

TEST_CASE("validate_tasks: unresolved output field") {
    Strategy s = fixture_strategy();
    // b reads a field table_load does not produce
    (*s.tasks_for("ret1"))[0].inputs[0].second = Binding::make_output_ref("t_load.rows");
    auto findings = validate_tasks(s.task_lists, builtin_tool_specs());
    REQUIRE_FALSE(findings.empty());
    bool unresolved = false;
    for (const auto& f : findings)
        if (f.check == CheckKind::io_parameter_logic && f.subject == "t_sum" &&
            f.severity == Severity::error)
            unresolved = true;
    CHECK(unresolved);
}

TEST_CASE("validate_tasks: dependency cycle a<->b") {
    TaskLists tl;
    TaskEntry a = load_task("a");
    a.depends_on = {"b"};
    TaskEntry b = load_task("b");
    b.depends_on = {"a"};
    tl.emplace_back("ext1", std::vector<TaskEntry>{a, b});
    auto findings = validate_tasks(tl, builtin_tool_specs());
    bool cycle = false;
    for (const auto& f : findings)
        if (f.check == CheckKind::task_interdependency &&
            f.detail.find("cycle") != std::string::npos &&
            f.detail.find("a, b") != std::string::npos)
            cycle = true;
    CHECK(cycle);
}

TEST_CASE("validate_tasks: assorted findings") {
    SUBCASE("unknown tool") {
        TaskLists tl;
        TaskEntry t = load_task("t1");
        t.tool = "sql_execute";
        tl.emplace_back("ext1", std::vector<TaskEntry>{t});
        auto findings = validate_tasks(tl, builtin_tool_specs());
        REQUIRE_FALSE(findings.empty());
        CHECK(findings[0].check == CheckKind::io_parameter_logic);
    }
    SUBCASE("type mismatch across a binding edge") {
        Strategy s = fixture_strategy();
        // aggregate's numeric output feeding a table param
        TaskEntry bad = sum_task("t_bad", "t_load");
        bad.inputs[0].second = Binding::make_output_ref("t_sum.value"); // number -> table
        bad.depends_on = {"t_sum"};
        s.tasks_for("ret1")->push_back(bad);
        auto findings = validate_tasks(s.task_lists, builtin_tool_specs());
        bool mismatch = false;
        for (const auto& f : findings)
            if (f.subject == "t_bad" && f.detail.find("type mismatch") != std::string::npos)
                mismatch = true;
        CHECK(mismatch);
    }
    SUBCASE("output reference without declared dependency") {
        Strategy s = fixture_strategy();
        (*s.tasks_for("ret1"))[0].depends_on.clear();
        auto findings = validate_tasks(s.task_lists, builtin_tool_specs());
        bool undeclared = false;
        for (const auto& f : findings)
            if (f.check == CheckKind::task_interdependency && f.subject == "t_sum")
                undeclared = true;
        CHECK(undeclared);
    }
    SUBCASE("missing binding for a declared param") {
        Strategy s = fixture_strategy();
        (*s.tasks_for("ret1"))[0].inputs.pop_back(); // drop `op`
        auto findings = validate_tasks(s.task_lists, builtin_tool_specs());
        bool missing = false;
        for (const auto& f : findings)
            if (f.subject == "t_sum" && f.detail.find("no binding") != std::string::npos)
                missing = true;
        CHECK(missing);
    }
    SUBCASE("require_tool constraint") {
        Strategy s = fixture_strategy();
        auto findings =
            validate_tasks(s.task_lists, builtin_tool_specs(), {"require_tool chart_spec"});
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].check == CheckKind::compliance);
        CHECK(has_errors(findings));
        // satisfied when the tool is used
        findings = validate_tasks(s.task_lists, builtin_tool_specs(), {"require_tool aggregate"});
        CHECK(findings.empty());
    }
    SUBCASE("scenario reference rules") {
        TaskLists tl;
        TaskEntry t{"t1", "text_extract", {}, "snips", {}};
        t.inputs.emplace_back("text", Binding::make_scenario_ref("user_query"));
        t.inputs.emplace_back("pattern", Binding::make_literal("revenue"));
        tl.emplace_back("ext1", std::vector<TaskEntry>{t});
        CHECK(validate_tasks(tl, builtin_tool_specs()).empty());

        tl[0].second[0].inputs[0].second = Binding::make_scenario_ref("budget");
        auto findings = validate_tasks(tl, builtin_tool_specs());
        REQUIRE_FALSE(findings.empty());
        CHECK(findings[0].check == CheckKind::io_parameter_logic);
    }
}

TEST_CASE("validators are pure: identical inputs give identical findings") {
    Rng rng(1234);
    for (int i = 0; i < 20; ++i) {
        Strategy s = random_valid_strategy(rng);
        ScenarioSpec scenario = fixture_scenario(true);
        auto a = validate_team(s.root, scenario);
        auto b = validate_team(s.root, scenario);
        REQUIRE(a.size() == b.size());
        auto ta = validate_tasks(s.task_lists, scenario.toolkit);
        auto tb = validate_tasks(s.task_lists, scenario.toolkit);
        Json ja = Json::array(), jb = Json::array();
        for (const auto& f : ta) ja.push_back(to_json(f));
        for (const auto& f : tb) jb.push_back(to_json(f));
        REQUIRE(ja == jb);
    }
}

TEST_CASE("validator-clean strategies have fully resolvable bindings in topo order") {
    Rng rng(99);
    for (int i = 0; i < 50; ++i) {
        Strategy s = random_valid_strategy(rng);
        ScenarioSpec scenario = fixture_scenario(true);
        REQUIRE_FALSE(has_errors(validate_team(s.root, scenario)));
        REQUIRE_FALSE(has_errors(validate_tasks(s.task_lists, scenario.toolkit)));

        // Simulate a topological execution: a task runs once its depends_on
        // are all done; every output_ref must resolve to a produced field.
        std::map<std::string, const TaskEntry*> all;
        for (const auto& [agent, tasks] : s.task_lists)
            for (const auto& t : tasks) all[t.task_id] = &t;
        std::set<std::string> done;
        bool progress = true;
        while (done.size() < all.size() && progress) {
            progress = false;
            for (const auto& [id, task] : all) {
                if (done.count(id)) continue;
                bool ready = true;
                for (const auto& dep : task->depends_on)
                    if (!done.count(dep)) ready = false;
                if (!ready) continue;
                for (const auto& [param, binding] : task->inputs)
                    if (binding.kind == Binding::Kind::output_ref) {
                        auto [up, field] = binding.ref_parts();
                        REQUIRE(done.count(up) == 1);
                        const ToolSpec* up_tool = scenario.find_tool(all.at(up)->tool);
                        REQUIRE(up_tool != nullptr);
                        REQUIRE(up_tool->find_output(field) != nullptr);
                    }
                done.insert(id);
                progress = true;
            }
        }
        REQUIRE(done.size() == all.size());
    }
}

TEST_CASE("serialization round-trips byte-stably") {
    Rng rng(7);
    for (int i = 0; i < 30; ++i) {
        Strategy s = random_valid_strategy(rng);
        Json j = to_json(s);
        Strategy back = strategy_from_json(j);
        CHECK(canonical_text(to_json(back)) == canonical_text(j));
    }
    ScenarioSpec sc = fixture_scenario(true);
    CHECK(canonical_text(to_json(scenario_from_json(to_json(sc)))) ==
          canonical_text(to_json(sc)));
}
