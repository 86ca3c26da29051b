#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "roster/planner.hpp"
#include "roster/replanner.hpp"
#include "support/builders.hpp"

using namespace roster;
using namespace roster::testing;

namespace {

GlobalState state_fixture(const Strategy& s) {
    GlobalState state;
    state.round = s.round;
    state.detailed_report = Json{{"worker", "ret1"}};
    state.key_insights = {"class:persistent", "task:t_sum", "agent:ret1"};
    state.strategy_digest = strategy_digest(s);
    return state;
}

Verdict recommendation_fixture() {
    Verdict v;
    v.kind = Verdict::Kind::recommendation;
    v.classified_leaf = "l_missing_capability";
    v.insights = {"class:persistent", "task:t_sum", "agent:ret1"};
    v.suggestions = {"s1: add an agent or tool that covers the missing capability"};
    return v;
}

DiffItem item_at(const Strategy& s_old, const Strategy& s_new, const std::string& path,
                 std::string justification) {
    for (const auto& d : diff_strategies(s_old, s_new))
        if (d.path == path)
            return {"dX", d.path, d.change, d.old_value, d.new_value, std::move(justification)};
    FAIL(("no structural difference at " + path).c_str());
    return {};
}

} // namespace

TEST_CASE("check_rules: grounded single-subject insert passes") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ret1")->push_back(filter_task("t9"));
    DiffItem d = item_at(s_old, s_new, "agent:ret1/task:t9", "narrow results for task:t_sum");

    auto rc = check_rules(d, default_gap_rules(), state_fixture(s_old), recommendation_fixture(),
                          s_old, fixture_scenario(), {});
    CHECK(rc.pass);
}

TEST_CASE("check_rules: suggestion id token also grounds a justification") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ret1")->push_back(filter_task("t9"));
    DiffItem d = item_at(s_old, s_new, "agent:ret1/task:t9", "apply s1 to the retriever");
    auto rc = check_rules(d, default_gap_rules(), state_fixture(s_old), recommendation_fixture(),
                          s_old, fixture_scenario(), {});
    CHECK(rc.pass);
}

TEST_CASE("check_rules: ungrounded justification violates R1") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ret1")->push_back(filter_task("t9"));
    DiffItem d = item_at(s_old, s_new, "agent:ret1/task:t9", "felt like it");
    auto rc = check_rules(d, default_gap_rules(), state_fixture(s_old), recommendation_fixture(),
                          s_old, fixture_scenario(), {});
    CHECK_FALSE(rc.pass);
    CHECK(rc.rule_id == "R1");
}

TEST_CASE("check_rules: removing an unimplicated subject violates R2") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ext1")->clear(); // removes t_load, which is not implicated
    DiffItem d = item_at(s_old, s_new, "agent:ext1/task:t_load", "tidy up per task:t_sum");
    auto rc = check_rules(d, default_gap_rules(), state_fixture(s_old), recommendation_fixture(),
                          s_old, fixture_scenario(), {});
    CHECK_FALSE(rc.pass);
    CHECK(rc.rule_id == "R2");

    // removing the implicated task passes R2 (and the rest)
    Strategy s_new2 = s_old;
    s_new2.tasks_for("ret1")->clear();
    DiffItem ok = item_at(s_old, s_new2, "agent:ret1/task:t_sum", "drop failing task:t_sum");
    auto rc2 = check_rules(ok, default_gap_rules(), state_fixture(s_old),
                           recommendation_fixture(), s_old, fixture_scenario(), {});
    CHECK(rc2.pass);
}

TEST_CASE("check_rules: removing an unimplicated agent violates R2") {
    Strategy s_old = fixture_strategy({.with_painter = true});
    Strategy s_new = s_old;
    s_new.root.children.pop_back(); // drop pnt1, which nobody implicated
    s_new.task_lists.erase(std::remove_if(s_new.task_lists.begin(), s_new.task_lists.end(),
                                          [](const auto& p) { return p.first == "pnt1"; }),
                           s_new.task_lists.end());
    s_new.normalize();
    DiffItem d = item_at(s_old, s_new, "agent:pnt1", "slim the team per task:t_sum");
    auto rc = check_rules(d, default_gap_rules(), state_fixture(s_old), recommendation_fixture(),
                          s_old, fixture_scenario(true), {});
    CHECK_FALSE(rc.pass);
    CHECK(rc.rule_id == "R2");
}

TEST_CASE("check_rules: malformed paths violate R3") {
    DiffItem d{"d1", "agents:everything", ChangeKind::modify, Json{}, Json{},
               "grounded by task:t_sum"};
    auto rc = check_rules(d, default_gap_rules(), state_fixture(fixture_strategy()),
                          recommendation_fixture(), fixture_strategy(), fixture_scenario(), {});
    CHECK_FALSE(rc.pass);
    CHECK(rc.rule_id == "R3");
}

TEST_CASE("check_rules: a change that breaks validation violates R4") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    // rebind t_sum to a nonexistent output field
    (*s_new.tasks_for("ret1"))[0].inputs[0].second = Binding::make_output_ref("t_load.rows");
    DiffItem d = item_at(s_old, s_new, "agent:ret1/task:t_sum", "adjust task:t_sum");
    auto rc = check_rules(d, default_gap_rules(), state_fixture(s_old), recommendation_fixture(),
                          s_old, fixture_scenario(), {});
    CHECK_FALSE(rc.pass);
    CHECK(rc.rule_id == "R4");
}

TEST_CASE("check_rules: configurable rule kinds") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ret1")->push_back(filter_task("t9"));
    DiffItem d = item_at(s_old, s_new, "agent:ret1/task:t9", "grounded by task:t_sum");

    std::vector<GapRule> rules = {{"C1", "forbid_change", "", Json{{"change", "insert"}}}};
    auto rc = check_rules(d, rules, state_fixture(s_old), recommendation_fixture(), s_old,
                          fixture_scenario(), {});
    CHECK_FALSE(rc.pass);
    CHECK(rc.rule_id == "C1");

    rules = {{"C2", "path_prefix_forbidden", "", Json{{"prefix", "agent:ret1"}}}};
    rc = check_rules(d, rules, state_fixture(s_old), recommendation_fixture(), s_old,
                     fixture_scenario(), {});
    CHECK_FALSE(rc.pass);

    CHECK_THROWS_AS(gap_rule_from_json(Json{{"rule_id", "X"}, {"kind", "telepathy"}}),
                    ValueError);
}

TEST_CASE("check_rules: randomized batch equals the independent predicate oracle") {
    Strategy s_old = fixture_strategy();
    GlobalState state = state_fixture(s_old);
    Verdict rec = recommendation_fixture();
    ScenarioSpec scenario = fixture_scenario();

    // candidate edits to draw from
    Strategy with_insert = s_old;
    with_insert.tasks_for("ret1")->push_back(filter_task("t9"));
    Strategy with_remove = s_old;
    with_remove.tasks_for("ret1")->clear();
    Strategy with_bad_remove = s_old;
    with_bad_remove.tasks_for("ext1")->clear();
    Strategy with_bad_modify = s_old;
    (*with_bad_modify.tasks_for("ret1"))[0].inputs[0].second =
        Binding::make_output_ref("t_load.rows");

    std::vector<DiffItem> pool = {
        item_at(s_old, with_insert, "agent:ret1/task:t9", ""),
        item_at(s_old, with_remove, "agent:ret1/task:t_sum", ""),
        item_at(s_old, with_bad_remove, "agent:ext1/task:t_load", ""),
        item_at(s_old, with_bad_modify, "agent:ret1/task:t_sum", ""),
        {"dm", "not-a-path", ChangeKind::modify, Json{}, Json{}, ""},
    };
    std::vector<std::string> justifications = {"", "felt like it", "handles task:t_sum",
                                               "apply s1 here", "see agent:ret1"};

    std::mt19937 rng(77);
    for (int i = 0; i < 20; ++i) {
        DiffItem d = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        d.justification = justifications[std::uniform_int_distribution<std::size_t>(
            0, justifications.size() - 1)(rng)];

        // independent predicates
        auto grounded = [&] {
            if (d.justification.empty()) return false;
            for (const auto& ins : state.key_insights)
                if (d.justification.find(ins) != std::string::npos) return true;
            for (const auto& sug : rec.suggestions)
                if (d.justification.find(sug) != std::string::npos) return true;
            return d.justification.find("s1") != std::string::npos; // id token
        };
        auto single = [&] {
            return d.path.rfind("agent:", 0) == 0 && d.path != "agent:" &&
                   d.path.find("not-a-path") == std::string::npos;
        };
        auto remove_ok = [&] {
            if (d.change != ChangeKind::remove) return true;
            std::string subject;
            auto t = d.path.find("/task:");
            if (t != std::string::npos)
                subject = "task:" + d.path.substr(t + 6);
            else
                subject = "agent:" + d.path.substr(6);
            for (const auto& ins : state.key_insights)
                if (ins == subject) return true;
            return false;
        };
        auto no_new_errors = [&] {
            try {
                Strategy patched =
                    apply_diffs(s_old, {{d.path, d.change, d.old_value, d.new_value}});
                return !has_errors(validate_strategy(patched, scenario));
            } catch (...) {
                return false;
            }
        };

        std::string expected;
        if (!grounded())
            expected = "R1";
        else if (!remove_ok())
            expected = "R2";
        else if (!single())
            expected = "R3";
        else if (!no_new_errors())
            expected = "R4";

        auto rc = check_rules(d, default_gap_rules(), state, rec, s_old, scenario, {});
        if (expected.empty())
            CHECK(rc.pass);
        else {
            CHECK_FALSE(rc.pass);
            CHECK(rc.rule_id == expected);
        }
    }
}

TEST_CASE("replan: unchanged strategy short-circuits to round+1") {
    Strategy s_old = fixture_strategy();
    MemoryStore memory;
    ScriptedReasoner reasoner(script_from({
        plan_entry("Replan", Json{{"strategy", to_json(s_old)}}),
        diff_auto_entry("n/a"),
    }));
    auto result = replan(state_fixture(s_old), recommendation_fixture(), fixture_scenario(),
                         s_old, "prompt", reasoner, memory);
    CHECK(result.accepted_paths.empty());
    CHECK(result.regenerations == 0);
    CHECK(result.strategy.round == s_old.round + 1);
    CHECK(result.strategy.provenance == Provenance::replanned);
    CHECK(same_structure(result.strategy, s_old));
    CHECK(reasoner.consumed() == 2); // zero rule evaluations, zero judgements
}

TEST_CASE("replan: one accepted diff lands exactly, nothing else changes") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ret1")->push_back(filter_task("t9"));

    MemoryStore memory;
    ScriptedReasoner reasoner(script_from({
        plan_entry("Replan", Json{{"strategy", to_json(s_new)}}),
        diff_auto_entry("narrow results for task:t_sum"),
        reflect_entry("DifferenceJudgement", Json{{"verdict", "improved"}}),
    }));
    auto result = replan(state_fixture(s_old), recommendation_fixture(), fixture_scenario(),
                         s_old, "prompt", reasoner, memory);
    CHECK(result.accepted_paths == std::vector<std::string>{"agent:ret1/task:t9"});
    CHECK(same_structure(result.strategy, s_new));
    // gap-narrow minimality: recovered paths equal the accepted set exactly
    auto recovered = strategy_diff_paths(result.strategy, s_old);
    CHECK(std::set<std::string>(recovered.begin(), recovered.end()) ==
          std::set<std::string>{"agent:ret1/task:t9"});
    // validity preservation: the integrated strategy is validator-clean
    CHECK_FALSE(has_errors(validate_strategy(result.strategy, fixture_scenario())));
    // memory bookkeeping: the old strategy is archived, the new one is current
    CHECK(memory.size(planner_owner(), Tier::long_term) == 1);
    CHECK(memory.size(planner_owner(), Tier::short_term) == 1);
}

TEST_CASE("replan: rule-violating diffs burn the budget and raise ReplanExhausted") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ext1")->clear(); // un-implicated removal: violates R2 forever

    std::vector<Json> script = {
        plan_entry("Replan", Json{{"strategy", to_json(s_new)}}),
        diff_auto_entry("grounded by task:t_sum"),
    };
    for (int i = 0; i < 3; ++i)
        script.push_back(plan_entry("Replan", Json{{"strategy", to_json(s_new)}}));

    MemoryStore memory;
    ScriptedReasoner reasoner(script_from(script));
    try {
        replan(state_fixture(s_old), recommendation_fixture(), fixture_scenario(), s_old,
               "prompt", reasoner, memory);
        FAIL("expected ReplanExhausted");
    } catch (const ReplanExhausted& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    CHECK(reasoner.consumed() == 5); // initial plan + diff + 3 scoped regenerations
}

TEST_CASE("replan: not_improved regenerates the whole difference set once") {
    Strategy s_old = fixture_strategy();
    Strategy first = s_old;
    first.tasks_for("ret1")->push_back(filter_task("t9"));
    Strategy second = s_old;
    second.tasks_for("ret1")->push_back(filter_task("t10"));

    MemoryStore memory;
    ScriptedReasoner reasoner(script_from({
        plan_entry("Replan", Json{{"strategy", to_json(first)}}),
        diff_auto_entry("narrow results for task:t_sum"),
        reflect_entry("DifferenceJudgement", Json{{"verdict", "not_improved"}}),
        plan_entry("Replan", Json{{"strategy", to_json(second)}}),
        diff_auto_entry("narrow results for task:t_sum"),
        reflect_entry("DifferenceJudgement", Json{{"verdict", "improved"}}),
    }));
    auto result = replan(state_fixture(s_old), recommendation_fixture(), fixture_scenario(),
                         s_old, "prompt", reasoner, memory);
    CHECK(result.regenerations == 1);
    CHECK(result.accepted_paths == std::vector<std::string>{"agent:ret1/task:t10"});
    CHECK(same_structure(result.strategy, second));
}

TEST_CASE("replan: scoped regeneration replaces one difference and proceeds") {
    Strategy s_old = fixture_strategy();
    Strategy bad = s_old;
    bad.tasks_for("ext1")->clear(); // R2 violation
    Strategy good = s_old;
    good.tasks_for("ret1")->push_back(filter_task("t9"));

    MemoryStore memory;
    ScriptedReasoner reasoner(script_from({
        plan_entry("Replan", Json{{"strategy", to_json(bad)}}),
        diff_auto_entry("grounded by task:t_sum"),
        // scoped regeneration: the new plan has no change at the violating
        // path, so the difference is dropped; the remaining set is empty.
        plan_entry("Replan", Json{{"strategy", to_json(s_old)}}),
    }));
    auto result = replan(state_fixture(s_old), recommendation_fixture(), fixture_scenario(),
                         s_old, "prompt", reasoner, memory);
    CHECK(result.regenerations == 1);
    CHECK(result.accepted_paths.empty());
    CHECK(same_structure(result.strategy, s_old));
    (void)good;
}

TEST_CASE("replan: gap narrow disabled skips rule checks") {
    Strategy s_old = fixture_strategy();
    Strategy s_new = s_old;
    s_new.tasks_for("ret1")->push_back(filter_task("t9"));

    ReplanConfig config;
    config.gap_narrow = false;
    MemoryStore memory;
    // the justification references nothing: R1 would reject it
    ScriptedReasoner reasoner(script_from({
        plan_entry("Replan", Json{{"strategy", to_json(s_new)}}),
        diff_auto_entry("whatever"),
        reflect_entry("DifferenceJudgement", Json{{"verdict", "improved"}}),
    }));
    auto result = replan(state_fixture(s_old), recommendation_fixture(), fixture_scenario(),
                         s_old, "prompt", reasoner, memory, config);
    CHECK(result.accepted_paths == std::vector<std::string>{"agent:ret1/task:t9"});
    CHECK(same_structure(result.strategy, s_new));
}

TEST_CASE("replan requires a recommendation verdict") {
    Strategy s_old = fixture_strategy();
    Verdict instruction;
    instruction.kind = Verdict::Kind::instruction;
    MemoryStore memory;
    ScriptedReasoner reasoner({});
    CHECK_THROWS_AS(replan(state_fixture(s_old), instruction, fixture_scenario(), s_old, "p",
                           reasoner, memory),
                    ValueError);
}
