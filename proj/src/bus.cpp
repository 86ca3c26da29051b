#include "roster/bus.hpp"

#include <algorithm>

#include "roster/errors.hpp"

namespace roster {

const char* to_string(MsgKind k) {
    switch (k) {
    case MsgKind::status_report: return "StatusReport";
    case MsgKind::error_alert: return "ErrorAlert";
    case MsgKind::pause_ack: return "PauseAck";
    case MsgKind::instruction: return "Instruction";
    case MsgKind::recommendation: return "Recommendation";
    case MsgKind::result: return "Result";
    case MsgKind::replan_trigger: return "ReplanTrigger";
    }
    return "unknown";
}

void MessageBus::register_agent(const std::string& agent_id, AgentClass cls) {
    std::lock_guard lock(mu_);
    for (const auto& [id, c] : agents_)
        if (id == agent_id) throw RoutingError("agent '" + agent_id + "' already registered");
    agents_.emplace_back(agent_id, cls);
    inboxes_[agent_id];
}

bool MessageBus::known(const std::string& agent_id) const {
    std::lock_guard lock(mu_);
    return std::any_of(agents_.begin(), agents_.end(),
                       [&](const auto& a) { return a.first == agent_id; });
}

std::uint64_t MessageBus::enqueue_locked(Message&& m, const std::vector<std::string>& targets) {
    m.msg_id = next_id_++;
    m.seq = ++sender_seq_[m.sender];
    for (const auto& t : targets) {
        inboxes_[t].push_back(m);
        log_.push_back({m.msg_id, m.sender, t, to_string(m.kind), m.round, m.seq, m.payload});
    }
    return m.msg_id;
}

std::uint64_t MessageBus::send(Message draft) {
    std::lock_guard lock(mu_);
    if (draft.recipients.broadcast) {
        throw RoutingError("send() is unicast; use broadcast()");
    }
    if (draft.kind == MsgKind::error_alert)
        throw ProtocolError("ErrorAlert must be broadcast");
    const std::string& to = draft.recipients.agent;
    if (inboxes_.find(to) == inboxes_.end())
        throw RoutingError("unknown recipient '" + to + "'");
    return enqueue_locked(std::move(draft), {to});
}

std::uint64_t MessageBus::broadcast(Message draft) {
    std::lock_guard lock(mu_);
    if (draft.kind != MsgKind::error_alert && draft.kind != MsgKind::instruction)
        throw ProtocolError(std::string("broadcast is reserved for ErrorAlert and resume "
                                        "Instructions, got ") +
                            to_string(draft.kind));
    draft.recipients = Recipients::all();
    std::vector<std::string> targets;
    for (const auto& [id, cls] : agents_)
        if (cls == AgentClass::worker || cls == AgentClass::monitor) targets.push_back(id);
    return enqueue_locked(std::move(draft), targets);
}

std::optional<Message> MessageBus::next(const std::string& recipient) {
    std::lock_guard lock(mu_);
    auto it = inboxes_.find(recipient);
    if (it == inboxes_.end()) throw RoutingError("unknown recipient '" + recipient + "'");
    if (it->second.empty()) return std::nullopt;
    Message m = std::move(it->second.front());
    it->second.pop_front();
    return m;
}

std::size_t MessageBus::pending(const std::string& recipient) const {
    std::lock_guard lock(mu_);
    auto it = inboxes_.find(recipient);
    if (it == inboxes_.end()) throw RoutingError("unknown recipient '" + recipient + "'");
    return it->second.size();
}

std::vector<LogEntry> MessageBus::log() const {
    std::lock_guard lock(mu_);
    return log_;
}

Json to_json(const LogEntry& e) {
    return Json{{"msg_id", e.msg_id}, {"sender", e.sender},   {"recipient", e.recipient},
                {"kind", e.kind},     {"round", e.round},     {"seq", e.seq},
                {"payload", e.payload}};
}

std::string MessageBus::export_log_jsonl() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& e : log_) {
        out += line_text(to_json(e));
        out += '\n';
    }
    return out;
}

std::string MessageBus::log_digest() const { return digest(export_log_jsonl()); }

} // namespace roster
