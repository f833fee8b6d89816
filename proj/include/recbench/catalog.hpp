// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "recbench/common.hpp"

namespace recbench::catalog {

struct Interaction {
    int item = 0;
    std::int64_t ts = 0;
};

// Per-user chronological interaction lists with dense user/item indices.
// Keys preserve external identity across filters that re-densify indices.
struct InteractionLog {
    std::vector<std::string> user_keys;               // dense user index -> key
    std::vector<std::string> item_keys;               // dense item index -> key
    std::vector<std::vector<Interaction>> users;      // sorted by (ts, load order)

    int num_users() const { return static_cast<int>(users.size()); }
    int num_items() const { return static_cast<int>(item_keys.size()); }
    std::size_t total_interactions() const;
    std::vector<long> item_counts() const;  // occurrences per item index
    std::uint64_t content_hash() const;     // identity for report compatibility
};

// Item identity plus its modality payload.
struct ItemRecord {
    int item_index = 0;
    std::vector<int> tokens;       // [CLS, ...]; valid when has_tokens
    std::vector<real_t> features;  // fixed dense vector; valid when has_features
    bool has_tokens = false;
    bool has_features = false;
};

// Raw row of an item file, before indexing/tokenization.
struct RawItem {
    std::string key;
    std::string title;
    std::vector<real_t> features;
    bool has_title = false;
    bool has_features = false;
};

struct DatasetSplit {
    std::vector<std::vector<int>> train;  // per user
    std::vector<int> valid;               // one held-out item per user
    std::vector<int> test;                // one held-out item per user
    int num_items = 0;

    int num_users() const { return static_cast<int>(train.size()); }
    std::vector<long> train_item_counts() const;
};

// Reserved token ids for the word-level vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kMaskId = 3;
inline constexpr int kReservedTokens = 4;

class Vocabulary {
public:
    // Builds from corpus titles: words ordered by frequency desc, then
    // lexicographic, ids starting at kReservedTokens.
    static Vocabulary build(const std::vector<std::string>& titles, std::size_t max_words = 0);

    int id_of(const std::string& word) const;  // kUnkId when absent
    int size() const { return static_cast<int>(words_.size()) + kReservedTokens; }
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
};

// Lowercased, whitespace-and-punctuation tokenization into vocabulary ids,
// truncated to max_len tokens with CLS prepended.
std::vector<int> tokenize(const std::string& title, const Vocabulary& vocab, int max_len = 30);
std::vector<std::string> split_words(const std::string& title);

// --- file IO ------------------------------------------------------------

// Tab-separated `user<TAB>item<TAB>timestamp` rows, '#' comments.
// Keys densely re-indexed in first-appearance order, per-user lists sorted
// by timestamp (stable on ties), exact duplicate rows dropped.
InteractionLog load_interactions(const std::string& path);
void save_interactions(const InteractionLog& log, const std::string& path);

// Tab-separated `item<TAB>title<TAB>features` rows; title/features optional.
std::vector<RawItem> load_items(const std::string& path);
void save_items(const std::vector<RawItem>& items, const std::string& path);

// Binds raw items to a log's item index space (unknown log keys are an error),
// tokenizing titles with a vocabulary built from the bound corpus.
struct BoundItems {
    std::vector<ItemRecord> records;  // aligned with log item indices
    Vocabulary vocab;
};
BoundItems bind_items(const InteractionLog& log, const std::vector<RawItem>& raw,
                      int max_title_tokens = 30);

// --- filters and splits ---------------------------------------------------

// Removes users with fewer than k interactions; re-densifies both index spaces.
InteractionLog filter_min_interactions(const InteractionLog& log, int k = 5);

// Keeps each user's most recent max_len interactions (max_len >= 3).
InteractionLog truncate_user_sequences(const InteractionLog& log, int max_len);

// Removes items with fewer than k occurrences counted against the input log,
// then re-applies the minimum-interaction user filter.
InteractionLog warm_k_filter(const InteractionLog& log, int k, int user_min = 5);

// Last interaction -> test, second-to-last -> valid, rest -> train.
DatasetSplit leave_one_out_split(const InteractionLog& log);

// Groups of evaluated users keyed by their test target's training count:
// new = 0 occurrences, cold = 1..9, other = 10+.
struct ColdNewPartition {
    std::vector<int> new_users;
    std::vector<int> cold_users;
    std::vector<int> other_users;
};
ColdNewPartition cold_new_partition(const DatasetSplit& split);

// Users whose test target has at least k training occurrences.
std::vector<int> warm_target_users(const DatasetSplit& split, int k);
// Same with an explicit count base (e.g. occurrences in the original log,
// the Warm-K convention).
std::vector<int> warm_target_users(const DatasetSplit& split, const std::vector<long>& counts,
                                   int k);

// Exact per-item interaction counts sorted by count desc, index asc.
std::vector<std::pair<int, long>> popularity_histogram(const std::vector<std::vector<int>>& train);
void save_histogram(const std::vector<std::pair<int, long>>& hist, const std::string& path);

}  // namespace recbench::catalog
