#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <thread>

#include "roster/bus.hpp"
#include "roster/errors.hpp"

using namespace roster;

namespace {

// MessageBus owns mutexes and is not movable; tests hold it in a fixture.
struct BusFixture {
    MessageBus bus;
    explicit BusFixture(int workers = 3) {
        bus.register_agent("monitor", AgentClass::monitor);
        bus.register_agent("planner", AgentClass::planner);
        for (int i = 1; i <= workers; ++i)
            bus.register_agent("w" + std::to_string(i), AgentClass::worker);
    }
};

Message draft(const std::string& sender, const std::string& to, MsgKind kind,
              Json payload = Json::object()) {
    Message m;
    m.sender = sender;
    m.recipients = Recipients::unicast(to);
    m.kind = kind;
    m.payload = std::move(payload);
    return m;
}

} // namespace

TEST_CASE("unicast delivery reaches the recipient") {
    BusFixture fx;
    MessageBus& bus = fx.bus;
    bus.send(draft("w1", "monitor", MsgKind::result, Json{{"task", "t1"}}));
    auto m = bus.next("monitor");
    REQUIRE(m.has_value());
    CHECK(m->sender == "w1");
    CHECK(m->payload.at("task") == "t1");
    CHECK_FALSE(bus.next("monitor").has_value());
}

TEST_CASE("per-pair FIFO order") {
    BusFixture fx;
    MessageBus& bus = fx.bus;
    bus.send(draft("w1", "monitor", MsgKind::result, Json{{"n", 1}}));
    bus.send(draft("w1", "monitor", MsgKind::result, Json{{"n", 2}}));
    CHECK(bus.next("monitor")->payload.at("n") == 1);
    CHECK(bus.next("monitor")->payload.at("n") == 2);
    CHECK_FALSE(bus.next("monitor").has_value());
}

TEST_CASE("unknown recipients raise RoutingError") {
    BusFixture fx;
    MessageBus& bus = fx.bus;
    CHECK_THROWS_AS(bus.send(draft("w1", "ghost", MsgKind::result)), RoutingError);
    CHECK_THROWS_AS(bus.next("ghost"), RoutingError);
}

TEST_CASE("ErrorAlert must be broadcast") {
    BusFixture fx;
    MessageBus& bus = fx.bus;
    CHECK_THROWS_AS(bus.send(draft("w1", "monitor", MsgKind::error_alert)), ProtocolError);
    Message alert;
    alert.sender = "w1";
    alert.kind = MsgKind::error_alert;
    CHECK_NOTHROW(bus.broadcast(alert));
    Message result;
    result.sender = "w1";
    result.kind = MsgKind::result;
    CHECK_THROWS_AS(bus.broadcast(result), ProtocolError);
}

TEST_CASE("broadcast fans out to all workers plus the monitor") {
    BusFixture fx(3);
    MessageBus& bus = fx.bus;
    Message alert;
    alert.sender = "w2";
    alert.kind = MsgKind::error_alert;
    bus.broadcast(alert);
    CHECK(bus.log().size() == 4); // 3 workers + monitor, planner excluded
    CHECK(bus.pending("w1") == 1);
    CHECK(bus.pending("w2") == 1); // the sender receives its own broadcast
    CHECK(bus.pending("monitor") == 1);
    CHECK(bus.pending("planner") == 0);
}

TEST_CASE("broadcast with no workers still reaches the monitor") {
    MessageBus bus;
    bus.register_agent("monitor", AgentClass::monitor);
    Message alert;
    alert.sender = "monitor";
    alert.kind = MsgKind::error_alert;
    bus.broadcast(alert);
    CHECK(bus.log().size() == 1);
    CHECK(bus.pending("monitor") == 1);
}

TEST_CASE("recipients see a broadcast before later unicasts from the same sender") {
    BusFixture fx(2);
    MessageBus& bus = fx.bus;
    Message alert;
    alert.sender = "w1";
    alert.kind = MsgKind::error_alert;
    bus.broadcast(alert);
    bus.send(draft("w1", "w2", MsgKind::result));
    auto first = bus.next("w2");
    REQUIRE(first.has_value());
    CHECK(first->kind == MsgKind::error_alert);
    CHECK(bus.next("w2")->kind == MsgKind::result);
}

TEST_CASE("drain order equals the per-recipient merge of per-sender FIFO streams") {
    BusFixture fx(3);
    MessageBus& bus = fx.bus;
    // interleaved multi-sender log
    struct Send {
        std::string from;
        int n;
    };
    std::vector<Send> sends = {{"w1", 1}, {"w2", 1}, {"w1", 2}, {"w3", 1},
                               {"w2", 2}, {"w1", 3}, {"w3", 2}};
    for (const auto& s : sends)
        bus.send(draft(s.from, "monitor", MsgKind::result, Json{{"from", s.from}, {"n", s.n}}));

    // oracle: replay the global send log
    std::vector<std::pair<std::string, int>> expected;
    for (const auto& s : sends) expected.emplace_back(s.from, s.n);

    std::vector<std::pair<std::string, int>> got;
    while (auto m = bus.next("monitor"))
        got.emplace_back(m->payload.at("from").get<std::string>(), m->payload.at("n").get<int>());
    CHECK(got == expected);
}

TEST_CASE("no loss, no duplication: delivered multiset equals sent copies") {
    BusFixture fx(4);
    MessageBus& bus = fx.bus;
    // hammer the bus from several threads
    std::vector<std::thread> threads;
    for (int t = 1; t <= 4; ++t)
        threads.emplace_back([&bus, t] {
            for (int i = 0; i < 50; ++i) {
                Message m;
                m.sender = "w" + std::to_string(t);
                m.recipients = Recipients::unicast("monitor");
                m.kind = MsgKind::result;
                m.payload = Json{{"i", i}};
                bus.send(m);
            }
        });
    for (auto& th : threads) th.join();

    auto log = bus.log();
    CHECK(log.size() == 200);
    std::map<std::string, int> delivered;
    while (auto m = bus.next("monitor")) delivered[m->sender]++;
    for (int t = 1; t <= 4; ++t) CHECK(delivered["w" + std::to_string(t)] == 50);

    // per-sender seq strictly increasing in the log
    std::map<std::string, std::uint64_t> last_seq;
    for (const auto& e : log) {
        CHECK(e.seq > last_seq[e.sender]);
        last_seq[e.sender] = e.seq;
    }
}

TEST_CASE("log export is line-delimited and digest-stable") {
    BusFixture fx(1);
    MessageBus& bus = fx.bus;
    bus.send(draft("w1", "monitor", MsgKind::result, Json{{"t", 1}}));
    std::string jsonl = bus.export_log_jsonl();
    CHECK(jsonl.find('\n') == jsonl.size() - 1);
    Json line = Json::parse(jsonl.substr(0, jsonl.size() - 1));
    CHECK(line.at("recipient") == "monitor");
    CHECK(bus.log_digest() == digest(jsonl));
}
