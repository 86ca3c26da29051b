#pragma once
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "roster/serialize.hpp"

namespace roster {

enum class MsgKind {
    status_report,
    error_alert,
    pause_ack,
    instruction,
    recommendation,
    result,
    replan_trigger,
};

const char* to_string(MsgKind k);

enum class AgentClass { worker, monitor, planner };

struct Recipients {
    bool broadcast = false;
    std::string agent; // unicast target when !broadcast

    static Recipients unicast(std::string agent) { return {false, std::move(agent)}; }
    static Recipients all() { return {true, ""}; }
};

struct Message {
    std::uint64_t msg_id = 0; // assigned by the bus, global total order
    std::string sender;
    Recipients recipients;
    MsgKind kind = MsgKind::status_report;
    Json payload;
    int round = 0;
    std::uint64_t seq = 0; // assigned by the bus, per-sender
};

/// One delivered copy; the log keeps every copy in global send order.
struct LogEntry {
    std::uint64_t msg_id = 0;
    std::string sender;
    std::string recipient;
    std::string kind;
    int round = 0;
    std::uint64_t seq = 0;
    Json payload;
};

// In-memory transport: FIFO per (sender, recipient) pair via a global total
// order assigned at send time. Broadcast fans out to every registered worker
// plus the monitor. send/broadcast/next are safe to call concurrently; each
// agent is the single consumer of its own inbox.
class MessageBus {
public:
    void register_agent(const std::string& agent_id, AgentClass cls);
    bool known(const std::string& agent_id) const;

    /// Enqueues exactly one copy per recipient. Throws RoutingError for an
    /// unknown recipient; ProtocolError when a unicast carries an ErrorAlert
    /// (alerts are broadcast by contract).
    std::uint64_t send(Message draft);

    /// ErrorAlert / Instruction fan-out to all workers + monitor.
    std::uint64_t broadcast(Message draft);

    /// Oldest pending message for `recipient`, or nullopt. Throws RoutingError
    /// for unknown recipients.
    std::optional<Message> next(const std::string& recipient);

    std::size_t pending(const std::string& recipient) const;

    std::vector<LogEntry> log() const;
    /// Line-delimited records, one per delivered copy, global send order.
    std::string export_log_jsonl() const;
    std::string log_digest() const;

private:
    std::uint64_t enqueue_locked(Message&& m, const std::vector<std::string>& targets);

    mutable std::mutex mu_;
    std::vector<std::pair<std::string, AgentClass>> agents_; // registration order
    std::map<std::string, std::deque<Message>> inboxes_;
    std::map<std::string, std::uint64_t> sender_seq_;
    std::uint64_t next_id_ = 1;
    std::vector<LogEntry> log_;
};

Json to_json(const LogEntry& e);

} // namespace roster
