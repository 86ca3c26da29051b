#pragma once
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roster/serialize.hpp"

namespace roster {

enum class Tier { sensory, short_term, long_term };

const char* to_string(Tier t);
std::optional<Tier> tier_from_string(const std::string& s);

struct MemoryRecord {
    std::string rec_id;
    Tier tier = Tier::sensory;
    std::string owner;
    std::string content;
    std::set<std::string> tags;
    double importance = 0.0;
    int created_round = 0;
    int last_access_round = 0;
    // Round the record entered its current tier; promotion ages are measured
    // from here so promote() is idempotent within a round.
    int tier_entry_round = 0;
};

struct MemoryConfig {
    double promote_short_threshold = 0.5; // sensory -> short importance gate
    double promote_long_threshold = 0.7;  // short -> long importance gate
    int promote_long_age = 2;             // rounds in short tier before long
    std::size_t cap_sensory = 64;
    std::size_t cap_short = 128;
    std::size_t cap_long = 512;
    double w_recency = 1.0;
    double w_importance = 1.0;
    double w_relevance = 1.0;
    double recency_decay = 0.99; // gamma
    bool enabled = true;         // ablation toggle: disabled stores record nothing
};

struct Promotion {
    std::string rec_id;
    Tier from = Tier::sensory;
    Tier to = Tier::short_term;
};

// Tiered per-owner store with recency/importance/relevance retrieval.
// Mutation for one owner is serialized; reads across owners are safe.
class MemoryStore {
public:
    explicit MemoryStore(MemoryConfig config = {});

    /// Stores a record; evicts the lowest-scoring record of the (owner, tier)
    /// partition when its capacity would be exceeded. Throws ValueError for
    /// importance outside [0,1] or round < 0.
    std::string record(const std::string& owner, Tier tier, std::string content,
                       std::set<std::string> tags, double importance, int round);

    /// Applies the tier promotion rules once: short->long first, then
    /// sensory->short; aged low-importance sensory records are discarded.
    std::vector<Promotion> promote(int now_round);

    /// Top-k records for `owner` by
    ///   w_r * gamma^(now - last_access) + w_i * importance + w_v * jaccard(tags, query)
    /// with ties broken by newer created_round then rec_id. Updates
    /// last_access_round of the returned records.
    std::vector<MemoryRecord> retrieve(const std::string& owner,
                                       const std::set<std::string>& query_tags,
                                       std::optional<Tier> tier_filter, std::size_t k,
                                       int now_round);

    /// Top-ceil(budget/2) long-tier + top-floor(budget/2) short-tier records,
    /// long first, deduplicated by rec_id.
    std::vector<MemoryRecord> hybrid_context(const std::string& owner,
                                             const std::set<std::string>& query_tags,
                                             std::size_t budget, int now_round);

    double score(const MemoryRecord& rec, const std::set<std::string>& query_tags,
                 int now_round) const;

    std::size_t size(const std::string& owner, Tier tier) const;
    std::size_t total_size() const;
    std::optional<MemoryRecord> find(const std::string& rec_id) const;

    Json export_snapshot() const;
    void import_snapshot(const Json& snapshot);

    const MemoryConfig& config() const { return config_; }

private:
    void evict_over_capacity(const std::string& owner, Tier tier, int now_round);
    std::size_t capacity(Tier tier) const;

    MemoryConfig config_;
    mutable std::mutex mu_;
    std::vector<MemoryRecord> records_;
    std::uint64_t next_id_ = 1;
};

Json to_json(const MemoryRecord& r);
MemoryRecord memory_record_from_json(const Json& j);

} // namespace roster
