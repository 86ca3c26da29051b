#include "roster/reasoner.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS 0
#include <httplib.h>

namespace roster {

namespace {

void split_endpoint(const std::string& endpoint, std::string& host, int& port,
                    std::string& path) {
    std::string rest = endpoint;
    auto scheme = rest.find("://");
    if (scheme != std::string::npos) {
        if (rest.substr(0, scheme) != "http")
            throw BackendError("unsupported scheme in endpoint '" + endpoint + "'");
        rest = rest.substr(scheme + 3);
    }
    auto slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    path = slash == std::string::npos ? "/complete" : rest.substr(slash);
    auto colon = authority.find(':');
    if (colon == std::string::npos) {
        host = authority;
        port = 80;
    } else {
        host = authority.substr(0, colon);
        try {
            port = std::stoi(authority.substr(colon + 1));
        } catch (...) {
            throw BackendError("bad port in endpoint '" + endpoint + "'");
        }
    }
    if (host.empty()) throw BackendError("endpoint '" + endpoint + "' has no host");
}

} // namespace

RemoteReasoner::RemoteReasoner(std::string endpoint, std::string api_token)
    : token_(std::move(api_token)) {
    split_endpoint(endpoint, host_, port_, path_);
}

Json RemoteReasoner::complete(const Json& request) {
    std::lock_guard lock(mu_); // one request at a time
    Json envelope{{"action", "complete"}, {"temperature", 0}, {"request", request}};
    httplib::Client client(host_, port_);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Post(path_, headers, line_text(envelope), "application/json");
    if (!res) throw BackendError("transport failure contacting " + host_ + ":" +
                                 std::to_string(port_));
    if (res->status != 200)
        throw BackendError("backend returned status " + std::to_string(res->status));
    Json body;
    try {
        body = Json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw BackendError(std::string("backend returned malformed body: ") + e.what());
    }
    if (!body.contains("response")) throw BackendError("backend body lacks 'response'");
    return body.at("response");
}

PlanDraft RemoteReasoner::plan(const PlanRequest& req) {
    req.check();
    Json body = complete(to_json(req));
    try {
        return detail::parse_plan_response(req.kind, body, "backend");
    } catch (const ScriptError& e) {
        throw BackendError(e.what());
    }
}

ReflectResponse RemoteReasoner::reflect(const ReflectRequest& req) {
    req.check();
    Json body = complete(to_json(req));
    try {
        return detail::parse_reflect_response(req.kind, body, "backend");
    } catch (const ScriptError& e) {
        throw BackendError(e.what());
    }
}

std::vector<DiffItem> RemoteReasoner::diff(const Strategy& s_new, const Strategy& s_old) {
    Json body = complete(Json{{"op", "diff"}, {"s_new", to_json(s_new)}, {"s_old", to_json(s_old)}});
    try {
        return detail::parse_diff_response(body, s_new, s_old, "backend");
    } catch (const ScriptError& e) {
        throw BackendError(e.what());
    }
}

} // namespace roster
