#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "roster/monitor.hpp"
#include "roster/text.hpp"
#include "support/builders.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace roster;
using namespace roster::testing;

namespace {

struct MonitorRig {
    ScenarioSpec scenario = fixture_scenario();
    MessageBus bus;
    MemoryStore memory;
    Monitor monitor{default_error_tree(), scenario, bus, memory};

    MonitorRig() {
        bus.register_agent("planner", AgentClass::planner);
        bus.register_agent("monitor", AgentClass::monitor);
        bus.register_agent("ext1", AgentClass::worker);
        bus.register_agent("ret1", AgentClass::worker);
    }
};

AlertContext alert_fixture(const std::string& failure_class, const std::string& message) {
    AlertContext alert;
    alert.detailed.worker = "ret1";
    alert.detailed.task_id = "t_sum";
    alert.detailed.failure_class = failure_class;
    alert.detailed.error_message = message;
    alert.detailed.keywords = report_keywords(message, failure_class);
    alert.failing_agent = "ret1";
    alert.failing_task = "t_sum";
    alert.error = TaskError{"aggregate", "", failure_class, message};
    return alert;
}

} // namespace

TEST_CASE("default tree satisfies its invariants and ships as the data file") {
    ErrorTree tree = default_error_tree();
    CHECK_NOTHROW(tree.check());
    CHECK(tree.branch_of("p_binding") == "pipeline");
    CHECK(tree.branch_of("l_role_forbidden") == "logic");
    REQUIRE(tree.find("p_tool_timeout") != nullptr);
    CHECK_FALSE(tree.find("p_tool_timeout")->remediation.empty());

    std::ifstream in(std::string(ROSTER_SOURCE_DIR) + "/data/error_tree.json");
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == canonical_text(to_json(tree)) + "\n");
    // and the file parses back into a valid tree
    CHECK_NOTHROW(error_tree_from_json(Json::parse(buf.str())));
}

TEST_CASE("malformed trees are rejected") {
    ErrorTree tree = default_error_tree();
    SUBCASE("one branch only") {
        tree.root.children.pop_back();
        CHECK_THROWS_AS(tree.check(), ValueError);
    }
    SUBCASE("duplicate ids") {
        tree.root.children[0].children[0].node_id =
            tree.root.children[1].children[0].node_id;
        CHECK_THROWS_AS(tree.check(), ValueError);
    }
    SUBCASE("childless branch") {
        tree.root.children[0].children.clear();
        CHECK_THROWS_AS(tree.check(), ValueError);
    }
}

TEST_CASE("classify: exact keyword match descends to the matching leaf") {
    ErrorTree tree = default_error_tree();
    std::set<std::string> kw = {"timeout", "deadline", "slow", "delay", "stalled"};
    CHECK(classify(kw, tree) == "p_tool_timeout");

    // all-leaf scoring oracle: the reached leaf maximizes leaf-bag similarity
    double best = -1;
    std::string best_leaf;
    std::function<void(const ErrorTreeNode&)> scan = [&](const ErrorTreeNode& n) {
        if (n.is_leaf()) {
            double s = jaccard(n.keywords, kw);
            if (s > best || (s == best && n.node_id < best_leaf)) {
                best = s;
                best_leaf = n.node_id;
            }
        }
        for (const auto& c : n.children) scan(c);
    };
    scan(tree.root);
    CHECK(best_leaf == "p_tool_timeout");
}

TEST_CASE("classify: empty keywords land on the lexicographically-first leaf of the "
          "lexicographically-first branch") {
    ErrorTree tree = default_error_tree();
    CHECK(classify({}, tree) == "l_constraint_violation"); // "logic" < "pipeline"
}

TEST_CASE("classify: team-flavored keywords land under the logic branch") {
    ErrorTree tree = default_error_tree();
    std::set<std::string> kw = {"constraint", "team", "role"};
    std::string leaf = classify(kw, tree);
    CHECK(tree.branch_of(leaf) == "logic");
    CHECK(leaf == classify_oracle(kw, tree.root));
}

TEST_CASE("classify equals the brute-force descent on randomized instances") {
    std::mt19937 rng(12345);
    std::vector<std::string> vocab;
    for (char c = 'a'; c <= 't'; ++c) vocab.push_back(std::string("kw_") + c);
    for (int trial = 0; trial < 300; ++trial) {
        Rng rng2(rng());
        ErrorTree tree = random_error_tree(
            rng2, std::uniform_int_distribution<>(2, 50)(rng), vocab);
        std::set<std::string> kw;
        int n = std::uniform_int_distribution<>(0, 12)(rng);
        for (int i = 0; i < n; ++i)
            kw.insert(vocab[static_cast<std::size_t>(
                std::uniform_int_distribution<>(0, static_cast<int>(vocab.size()) - 1)(rng))]);
        REQUIRE(classify(kw, tree) == classify_oracle(kw, tree.root));
    }
}

TEST_CASE("collect_state: detailed report only") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "transient tool failure");
    GlobalState state = rig.monitor.collect_state(alert, s);
    std::set<std::string> insights(state.key_insights.begin(), state.key_insights.end());
    CHECK(insights == std::set<std::string>{"class:transient", "task:t_sum", "agent:ret1"});
    CHECK(state.strategy_digest == strategy_digest(s));
    // stored in the monitor's short-term memory
    CHECK(rig.memory.size(monitor_owner(), Tier::short_term) == 1);
}

TEST_CASE("collect_state: duplicate markers deduplicate across reports") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "failure on task:t_sum");
    StatusReportNormal peer;
    peer.worker = "ext1";
    peer.results = {"saw task:t_sum stall", "watch agent:ext1"};
    alert.peer_reports.push_back(peer);

    GlobalState state = rig.monitor.collect_state(alert, s);
    CHECK(std::count(state.key_insights.begin(), state.key_insights.end(), "task:t_sum") == 1);
    std::set<std::string> insights(state.key_insights.begin(), state.key_insights.end());
    CHECK(insights.count("agent:ext1") == 1);
}

TEST_CASE("collect_state: hand-assembled union oracle over one detailed + three normals") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("persistent", "crash near constraint:max_agents");
    alert.detailed.logs = {"task t_sum failed"};
    for (int i = 1; i <= 3; ++i) {
        StatusReportNormal peer;
        peer.worker = "w" + std::to_string(i);
        peer.context = {"observed task:t_aux" + std::to_string(i)};
        alert.peer_reports.push_back(peer);
    }
    GlobalState state = rig.monitor.collect_state(alert, s);
    std::set<std::string> got(state.key_insights.begin(), state.key_insights.end());
    std::set<std::string> expected = {"class:persistent", "task:t_sum",  "agent:ret1",
                                      "constraint:max_agents", "task:t_aux1", "task:t_aux2",
                                      "task:t_aux3"};
    CHECK(got == expected);
}

TEST_CASE("collect_state without a detailed report is a protocol error") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext empty;
    CHECK_THROWS_AS(rig.monitor.collect_state(empty, s), ProtocolError);
}

TEST_CASE("adjudicate: pipeline leaf produces an instruction and no replan trigger") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "transient tool failure: aggregate failed");
    GlobalState state = rig.monitor.collect_state(alert, s);
    std::string leaf = rig.monitor.classify_episode(alert);
    CHECK(default_error_tree().branch_of(leaf) == "pipeline");

    ScriptedReasoner reasoner(script_from({fix_entry(Json{{"action", "retry"}})}));
    Verdict verdict = rig.monitor.adjudicate(state, leaf, s, alert, reasoner);
    CHECK(verdict.kind == Verdict::Kind::instruction);
    CHECK(verdict.target == "ret1");
    REQUIRE(verdict.steps.size() == 1);
    CHECK(verdict.steps[0].action == "retry");
    CHECK(verdict.steps[0].task_id == "t_sum"); // default target filled in

    int triggers = 0, instructions = 0;
    std::set<std::uint64_t> seen;
    for (const auto& e : rig.bus.log()) {
        if (e.kind == "ReplanTrigger") ++triggers;
        if (e.kind == "Instruction" && seen.insert(e.msg_id).second) ++instructions;
    }
    CHECK(triggers == 0);
    CHECK(instructions == 1);
}

TEST_CASE("adjudicate: logic leaf produces a recommendation plus exactly one replan trigger") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture(
        "persistent", "missing capability: aggregate unsupported for goal task:t_sum agent:ret1");
    GlobalState state = rig.monitor.collect_state(alert, s);
    std::string leaf = rig.monitor.classify_episode(alert);
    CHECK(default_error_tree().branch_of(leaf) == "logic");

    ScriptedReasoner reasoner({}); // consolidation is deterministic, no reasoner call
    Verdict verdict = rig.monitor.adjudicate(state, leaf, s, alert, reasoner);
    CHECK(verdict.kind == Verdict::Kind::recommendation);
    CHECK(verdict.insights == state.key_insights);
    REQUIRE(verdict.suggestions.size() == 1);
    CHECK(verdict.suggestions[0].rfind("s1: ", 0) == 0);

    int triggers = 0, recommendations = 0;
    for (const auto& e : rig.bus.log()) {
        if (e.kind == "ReplanTrigger") ++triggers;
        if (e.kind == "Recommendation") ++recommendations;
    }
    CHECK(triggers == 1);
    CHECK(recommendations == 1);
}

TEST_CASE("adjudicate: unfixable pipeline error escalates into the logic branch") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "transient tool failure: aggregate failed");
    GlobalState state = rig.monitor.collect_state(alert, s);
    std::string leaf = rig.monitor.classify_episode(alert);

    ScriptedReasoner reasoner(script_from({fail_fix_entry()}));
    Verdict verdict = rig.monitor.adjudicate(state, leaf, s, alert, reasoner);
    CHECK(verdict.kind == Verdict::Kind::recommendation);
    CHECK(default_error_tree().branch_of(verdict.classified_leaf) == "logic");
}

TEST_CASE("adjudicate: second pipeline failure of the same leaf in a round escalates") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "transient tool failure: aggregate failed");
    GlobalState state = rig.monitor.collect_state(alert, s);
    std::string leaf = rig.monitor.classify_episode(alert);

    ScriptedReasoner reasoner(script_from({fix_entry(Json{{"action", "retry"}})}));
    Verdict first = rig.monitor.adjudicate(state, leaf, s, alert, reasoner);
    CHECK(first.kind == Verdict::Kind::instruction);
    Verdict second = rig.monitor.adjudicate(state, leaf, s, alert, reasoner);
    CHECK(second.kind == Verdict::Kind::recommendation);

    // a new round resets the failure ledger
    rig.monitor.on_round_advanced(1);
    GlobalState state2 = rig.monitor.collect_state(alert, s);
    ScriptedReasoner again(script_from({fix_entry(Json{{"action", "retry"}})}));
    CHECK(rig.monitor.adjudicate(state2, leaf, s, alert, again).kind ==
          Verdict::Kind::instruction);
}

TEST_CASE("adjudicate: reasoner failure surfaces as MonitorError") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "transient tool failure");
    GlobalState state = rig.monitor.collect_state(alert, s);
    ScriptedReasoner empty({});
    CHECK_THROWS_AS(rig.monitor.adjudicate(state, rig.monitor.classify_episode(alert), s, alert,
                                           empty),
                    MonitorError);
}

TEST_CASE("adjudicate: verdicts land in the monitor's short-term memory") {
    MonitorRig rig;
    Strategy s = fixture_strategy();
    AlertContext alert = alert_fixture("transient", "transient tool failure: aggregate failed");
    GlobalState state = rig.monitor.collect_state(alert, s);
    ScriptedReasoner reasoner(script_from({fix_entry(Json{{"action", "retry"}})}));
    rig.monitor.adjudicate(state, rig.monitor.classify_episode(alert), s, alert, reasoner);
    auto verdicts = rig.memory.retrieve(monitor_owner(), {"verdict"}, Tier::short_term, 10, 0);
    bool found = false;
    for (const auto& r : verdicts) found |= r.tags.count("verdict") > 0;
    CHECK(found);
}
