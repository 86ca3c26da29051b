#include "roster/memory.hpp"

#include <algorithm>
#include <cmath>

#include "roster/errors.hpp"
#include "roster/text.hpp"

namespace roster {

const char* to_string(Tier t) {
    switch (t) {
    case Tier::sensory: return "sensory";
    case Tier::short_term: return "short";
    case Tier::long_term: return "long";
    }
    return "unknown";
}

std::optional<Tier> tier_from_string(const std::string& s) {
    if (s == "sensory") return Tier::sensory;
    if (s == "short") return Tier::short_term;
    if (s == "long") return Tier::long_term;
    return std::nullopt;
}

MemoryStore::MemoryStore(MemoryConfig config) : config_(config) {}

std::size_t MemoryStore::capacity(Tier tier) const {
    switch (tier) {
    case Tier::sensory: return config_.cap_sensory;
    case Tier::short_term: return config_.cap_short;
    case Tier::long_term: return config_.cap_long;
    }
    return 0;
}

double MemoryStore::score(const MemoryRecord& rec, const std::set<std::string>& query_tags,
                          int now_round) const {
    const double age = static_cast<double>(now_round - rec.last_access_round);
    return config_.w_recency * std::pow(config_.recency_decay, age) +
           config_.w_importance * rec.importance +
           config_.w_relevance * jaccard(rec.tags, query_tags);
}

namespace {

// Ranking order: higher score first, then newer created_round, then rec_id.
bool ranks_before(const MemoryRecord& a, double score_a, const MemoryRecord& b, double score_b) {
    if (score_a != score_b) return score_a > score_b;
    if (a.created_round != b.created_round) return a.created_round > b.created_round;
    return a.rec_id < b.rec_id;
}

} // namespace

void MemoryStore::evict_over_capacity(const std::string& owner, Tier tier, int now_round) {
    const std::size_t cap = capacity(tier);
    while (true) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < records_.size(); ++i)
            if (records_[i].owner == owner && records_[i].tier == tier) members.push_back(i);
        if (members.size() <= cap) return;
        // Evict the record that ranks last under the empty-query score.
        static const std::set<std::string> no_query;
        std::size_t worst = members.front();
        double worst_score = score(records_[worst], no_query, now_round);
        for (std::size_t idx : members) {
            double s = score(records_[idx], no_query, now_round);
            if (ranks_before(records_[worst], worst_score, records_[idx], s)) {
                worst = idx;
                worst_score = s;
            }
        }
        records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(worst));
    }
}

std::string MemoryStore::record(const std::string& owner, Tier tier, std::string content,
                                std::set<std::string> tags, double importance, int round) {
    if (importance < 0.0 || importance > 1.0)
        throw ValueError("importance " + std::to_string(importance) + " outside [0,1]");
    if (round < 0) throw ValueError("round must be non-negative");
    std::lock_guard lock(mu_);
    char buf[16];
    std::snprintf(buf, sizeof buf, "m%06llu", static_cast<unsigned long long>(next_id_++));
    std::string id = buf;
    if (!config_.enabled) return id;
    MemoryRecord rec{id, tier, owner, std::move(content), std::move(tags),
                     importance, round, round, round};
    records_.push_back(std::move(rec));
    evict_over_capacity(owner, tier, round);
    return id;
}

std::vector<Promotion> MemoryStore::promote(int now_round) {
    std::lock_guard lock(mu_);
    std::vector<Promotion> moves;
    if (!config_.enabled) return moves;

    // short -> long first, so a record freshly promoted to short below cannot
    // hop two tiers in one call.
    std::vector<std::string> to_long;
    for (const auto& r : records_)
        if (r.tier == Tier::short_term && r.importance >= config_.promote_long_threshold &&
            now_round - r.tier_entry_round >= config_.promote_long_age)
            to_long.push_back(r.rec_id);
    for (const auto& id : to_long) {
        auto it = std::find_if(records_.begin(), records_.end(),
                               [&](const MemoryRecord& r) { return r.rec_id == id; });
        if (it == records_.end()) continue; // evicted meanwhile
        it->tier = Tier::long_term;
        it->tier_entry_round = now_round;
        moves.push_back({id, Tier::short_term, Tier::long_term});
        evict_over_capacity(it->owner, Tier::long_term, now_round);
    }

    std::vector<std::string> to_short, to_discard;
    for (const auto& r : records_) {
        if (r.tier != Tier::sensory || now_round - r.tier_entry_round < 1) continue;
        (r.importance >= config_.promote_short_threshold ? to_short : to_discard)
            .push_back(r.rec_id);
    }
    for (const auto& id : to_discard)
        records_.erase(std::remove_if(records_.begin(), records_.end(),
                                      [&](const MemoryRecord& r) { return r.rec_id == id; }),
                       records_.end());
    for (const auto& id : to_short) {
        auto it = std::find_if(records_.begin(), records_.end(),
                               [&](const MemoryRecord& r) { return r.rec_id == id; });
        if (it == records_.end()) continue;
        it->tier = Tier::short_term;
        it->tier_entry_round = now_round;
        moves.push_back({id, Tier::sensory, Tier::short_term});
        evict_over_capacity(it->owner, Tier::short_term, now_round);
    }
    return moves;
}

std::vector<MemoryRecord> MemoryStore::retrieve(const std::string& owner,
                                                const std::set<std::string>& query_tags,
                                                std::optional<Tier> tier_filter, std::size_t k,
                                                int now_round) {
    std::lock_guard lock(mu_);
    std::vector<MemoryRecord> out;
    if (k == 0 || !config_.enabled) return out;

    std::vector<std::pair<std::size_t, double>> scored;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.owner != owner) continue;
        if (tier_filter && r.tier != *tier_filter) continue;
        scored.emplace_back(i, score(r, query_tags, now_round));
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        return ranks_before(records_[a.first], a.second, records_[b.first], b.second);
    });
    if (scored.size() > k) scored.resize(k);
    for (const auto& [idx, sc] : scored) {
        records_[idx].last_access_round = std::max(records_[idx].last_access_round, now_round);
        out.push_back(records_[idx]);
    }
    return out;
}

std::vector<MemoryRecord> MemoryStore::hybrid_context(const std::string& owner,
                                                      const std::set<std::string>& query_tags,
                                                      std::size_t budget, int now_round) {
    const std::size_t long_k = (budget + 1) / 2;
    const std::size_t short_k = budget / 2;
    auto bundle = retrieve(owner, query_tags, Tier::long_term, long_k, now_round);
    auto shorts = retrieve(owner, query_tags, Tier::short_term, short_k, now_round);
    std::set<std::string> seen;
    for (const auto& r : bundle) seen.insert(r.rec_id);
    for (auto& r : shorts)
        if (seen.insert(r.rec_id).second) bundle.push_back(std::move(r));
    return bundle;
}

std::size_t MemoryStore::size(const std::string& owner, Tier tier) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const MemoryRecord& r) {
            return r.owner == owner && r.tier == tier;
        }));
}

std::size_t MemoryStore::total_size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::optional<MemoryRecord> MemoryStore::find(const std::string& rec_id) const {
    std::lock_guard lock(mu_);
    for (const auto& r : records_)
        if (r.rec_id == rec_id) return r;
    return std::nullopt;
}

Json to_json(const MemoryRecord& r) {
    return Json{{"rec_id", r.rec_id},
                {"tier", to_string(r.tier)},
                {"owner", r.owner},
                {"content", r.content},
                {"tags", std::vector<std::string>(r.tags.begin(), r.tags.end())},
                {"importance", r.importance},
                {"created_round", r.created_round},
                {"last_access_round", r.last_access_round},
                {"tier_entry_round", r.tier_entry_round}};
}

MemoryRecord memory_record_from_json(const Json& j) {
    MemoryRecord r;
    r.rec_id = j.at("rec_id").get<std::string>();
    auto tier = tier_from_string(j.at("tier").get<std::string>());
    if (!tier) throw ValueError("unknown tier '" + j.at("tier").get<std::string>() + "'");
    r.tier = *tier;
    r.owner = j.at("owner").get<std::string>();
    r.content = j.value("content", std::string{});
    if (j.contains("tags"))
        for (const auto& t : j.at("tags")) r.tags.insert(t.get<std::string>());
    r.importance = j.at("importance").get<double>();
    r.created_round = j.value("created_round", 0);
    r.last_access_round = j.value("last_access_round", r.created_round);
    r.tier_entry_round = j.value("tier_entry_round", r.created_round);
    return r;
}

Json MemoryStore::export_snapshot() const {
    std::lock_guard lock(mu_);
    Json records = Json::array();
    for (const auto& r : records_) records.push_back(to_json(r));
    return Json{{"next_id", next_id_}, {"records", records}};
}

void MemoryStore::import_snapshot(const Json& snapshot) {
    std::lock_guard lock(mu_);
    records_.clear();
    next_id_ = snapshot.value("next_id", std::uint64_t{1});
    for (const auto& r : snapshot.at("records"))
        records_.push_back(memory_record_from_json(r));
}

} // namespace roster
