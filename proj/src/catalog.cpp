// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace recbench::catalog {

std::size_t InteractionLog::total_interactions() const {
    std::size_t n = 0;
    for (const auto& u : users) n += u.size();
    return n;
}

std::vector<long> InteractionLog::item_counts() const {
    std::vector<long> counts(item_keys.size(), 0);
    for (const auto& u : users) {
        for (const auto& it : u) ++counts[it.item];
    }
    return counts;
}

std::uint64_t InteractionLog::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (int u = 0; u < num_users(); ++u) {
        h = fnv1a(user_keys[u], h);
        for (const auto& it : users[u]) {
            h = fnv1a(item_keys[it.item], h);
            h = fnv1a(&it.ts, sizeof(it.ts), h);
        }
    }
    return h;
}

std::vector<long> DatasetSplit::train_item_counts() const {
    std::vector<long> counts(num_items, 0);
    for (const auto& seq : train) {
        for (int it : seq) ++counts[it];
    }
    return counts;
}

// --- tokenizer --------------------------------------------------------------

std::vector<std::string> split_words(const std::string& title) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char ch : title) {
        const bool word_char = std::isalnum(ch) || ch >= 0x80;
        if (word_char) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& titles, std::size_t max_words) {
    std::unordered_map<std::string, long> freq;
    for (const auto& t : titles) {
        for (auto& w : split_words(t)) ++freq[w];
    }
    std::vector<std::pair<std::string, long>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (max_words > 0 && entries.size() > max_words) entries.resize(max_words);
    Vocabulary v;
    v.words_.reserve(entries.size());
    for (auto& e : entries) {
        v.index_.emplace(e.first, static_cast<int>(v.words_.size()) + kReservedTokens);
        v.words_.push_back(std::move(e.first));
    }
    return v;
}

int Vocabulary::id_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
}

std::vector<int> tokenize(const std::string& title, const Vocabulary& vocab, int max_len) {
    std::vector<int> out{kClsId};
    const auto words = split_words(title);
    const std::size_t n = std::min<std::size_t>(words.size(), static_cast<std::size_t>(max_len));
    out.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(vocab.id_of(words[i]));
    return out;
}

// --- file IO ----------------------------------------------------------------

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool skip_line(const std::string& line) {
    return line.empty() || line[0] == '#';
}

}  // namespace

InteractionLog load_interactions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_interactions: cannot open '" + path + "'");

    InteractionLog log;
    std::unordered_map<std::string, int> user_index, item_index;
    std::set<std::tuple<int, int, std::int64_t>> seen;

    std::string line;
    long line_no = 0;
    long rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skip_line(line)) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
            throw ParseError("load_interactions: line " + std::to_string(line_no) +
                             ": expected user<TAB>item<TAB>timestamp");
        }
        std::int64_t ts = 0;
        try {
            std::size_t used = 0;
            ts = std::stoll(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("load_interactions: line " + std::to_string(line_no) +
                             ": bad timestamp '" + fields[2] + "'");
        }
        auto [uit, unew] = user_index.emplace(fields[0], static_cast<int>(log.user_keys.size()));
        if (unew) {
            log.user_keys.push_back(fields[0]);
            log.users.emplace_back();
        }
        auto [iit, inew] = item_index.emplace(fields[1], static_cast<int>(log.item_keys.size()));
        if (inew) log.item_keys.push_back(fields[1]);
        if (!seen.emplace(uit->second, iit->second, ts).second) continue;  // exact duplicate
        log.users[uit->second].push_back({iit->second, ts});
        ++rows;
    }
    if (rows == 0) throw ParseError("load_interactions: '" + path + "' has no interactions");
    for (auto& u : log.users) {
        std::stable_sort(u.begin(), u.end(),
                         [](const Interaction& a, const Interaction& b) { return a.ts < b.ts; });
    }
    return log;
}

void save_interactions(const InteractionLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_interactions: cannot write '" + path + "'");
    for (int u = 0; u < log.num_users(); ++u) {
        for (const auto& it : log.users[u]) {
            out << log.user_keys[u] << '\t' << log.item_keys[it.item] << '\t' << it.ts << '\n';
        }
    }
}

std::vector<RawItem> load_items(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_items: cannot open '" + path + "'");
    std::vector<RawItem> items;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skip_line(line)) continue;
        const auto fields = split_tabs(line);
        if (fields.empty() || fields[0].empty() || fields.size() > 3) {
            throw ParseError("load_items: line " + std::to_string(line_no) +
                             ": expected item<TAB>title<TAB>features");
        }
        RawItem item;
        item.key = fields[0];
        if (fields.size() >= 2 && !fields[1].empty()) {
            item.title = fields[1];
            item.has_title = true;
        }
        if (fields.size() >= 3 && !fields[2].empty()) {
            std::stringstream ss(fields[2]);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                try {
                    item.features.push_back(static_cast<real_t>(std::stod(tok)));
                } catch (const std::exception&) {
                    throw ParseError("load_items: line " + std::to_string(line_no) +
                                     ": bad feature value '" + tok + "'");
                }
            }
            item.has_features = true;
        }
        items.push_back(std::move(item));
    }
    return items;
}

void save_items(const std::vector<RawItem>& items, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_items: cannot write '" + path + "'");
    out.precision(9);
    for (const auto& item : items) {
        out << item.key << '\t';
        if (item.has_title) out << item.title;
        out << '\t';
        if (item.has_features) {
            for (std::size_t i = 0; i < item.features.size(); ++i) {
                if (i) out << ',';
                out << item.features[i];
            }
        }
        out << '\n';
    }
}

BoundItems bind_items(const InteractionLog& log, const std::vector<RawItem>& raw,
                      int max_title_tokens) {
    std::unordered_map<std::string, const RawItem*> by_key;
    for (const auto& r : raw) by_key[r.key] = &r;

    std::vector<std::string> corpus;
    for (int i = 0; i < log.num_items(); ++i) {
        auto it = by_key.find(log.item_keys[i]);
        if (it != by_key.end() && it->second->has_title) corpus.push_back(it->second->title);
    }

    BoundItems bound;
    bound.vocab = Vocabulary::build(corpus);
    bound.records.resize(log.num_items());
    for (int i = 0; i < log.num_items(); ++i) {
        auto& rec = bound.records[i];
        rec.item_index = i;
        auto it = by_key.find(log.item_keys[i]);
        if (it == by_key.end()) {
            throw ParseError("bind_items: item key '" + log.item_keys[i] +
                             "' missing from the item file");
        }
        if (it->second->has_title) {
            rec.tokens = tokenize(it->second->title, bound.vocab, max_title_tokens);
            rec.has_tokens = true;
        }
        if (it->second->has_features) {
            rec.features = it->second->features;
            rec.has_features = true;
        }
    }
    return bound;
}

// --- filters and splits -------------------------------------------------------

namespace {

// Rebuilds a log keeping the given users (by old index) and only interactions
// whose item passes keep_item; both index spaces come out dense.
InteractionLog rebuild(const InteractionLog& log, const std::vector<int>& kept_users,
                       const std::vector<char>& keep_item) {
    InteractionLog out;
    std::vector<int> item_map(log.item_keys.size(), -1);
    for (int old_u : kept_users) {
        std::vector<Interaction> seq;
        seq.reserve(log.users[old_u].size());
        for (const auto& it : log.users[old_u]) {
            if (!keep_item[it.item]) continue;
            if (item_map[it.item] < 0) {
                item_map[it.item] = static_cast<int>(out.item_keys.size());
                out.item_keys.push_back(log.item_keys[it.item]);
            }
            seq.push_back({item_map[it.item], it.ts});
        }
        if (!seq.empty()) {
            out.user_keys.push_back(log.user_keys[old_u]);
            out.users.push_back(std::move(seq));
        }
    }
    return out;
}

}  // namespace

InteractionLog filter_min_interactions(const InteractionLog& log, int k) {
    if (k < 1) throw ContractError("filter_min_interactions: k must be >= 1");
    std::vector<int> kept;
    for (int u = 0; u < log.num_users(); ++u) {
        if (static_cast<int>(log.users[u].size()) >= k) kept.push_back(u);
    }
    return rebuild(log, kept, std::vector<char>(log.item_keys.size(), 1));
}

InteractionLog truncate_user_sequences(const InteractionLog& log, int max_len) {
    if (max_len < 3) throw ContractError("truncate_user_sequences: max_len must be >= 3");
    InteractionLog out;
    out.user_keys = log.user_keys;
    out.item_keys = log.item_keys;
    out.users.resize(log.users.size());
    for (int u = 0; u < log.num_users(); ++u) {
        const auto& seq = log.users[u];
        const std::size_t keep = std::min<std::size_t>(seq.size(), max_len);
        out.users[u].assign(seq.end() - keep, seq.end());
    }
    return out;
}

InteractionLog warm_k_filter(const InteractionLog& log, int k, int user_min) {
    if (k < 0) throw ContractError("warm_k_filter: k must be >= 0");
    const auto counts = log.item_counts();
    std::vector<char> keep_item(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) keep_item[i] = counts[i] >= k;
    std::vector<int> all_users(log.num_users());
    for (int u = 0; u < log.num_users(); ++u) all_users[u] = u;
    InteractionLog filtered = rebuild(log, all_users, keep_item);
    return filter_min_interactions(filtered, user_min);
}

DatasetSplit leave_one_out_split(const InteractionLog& log) {
    DatasetSplit split;
    split.num_items = log.num_items();
    split.train.resize(log.num_users());
    split.valid.resize(log.num_users());
    split.test.resize(log.num_users());
    for (int u = 0; u < log.num_users(); ++u) {
        const auto& seq = log.users[u];
        if (seq.size() < 3) {
            throw ContractError("leave_one_out_split: user '" + log.user_keys[u] + "' has " +
                                std::to_string(seq.size()) + " interactions (< 3); filter first");
        }
        const std::size_t n = seq.size();
        split.train[u].reserve(n - 2);
        for (std::size_t i = 0; i + 2 < n; ++i) split.train[u].push_back(seq[i].item);
        split.valid[u] = seq[n - 2].item;
        split.test[u] = seq[n - 1].item;
    }
    return split;
}

ColdNewPartition cold_new_partition(const DatasetSplit& split) {
    const auto counts = split.train_item_counts();
    ColdNewPartition part;
    for (int u = 0; u < split.num_users(); ++u) {
        const long c = counts[split.test[u]];
        if (c == 0) {
            part.new_users.push_back(u);
        } else if (c < 10) {
            part.cold_users.push_back(u);
        } else {
            part.other_users.push_back(u);
        }
    }
    return part;
}

std::vector<int> warm_target_users(const DatasetSplit& split, int k) {
    return warm_target_users(split, split.train_item_counts(), k);
}

std::vector<int> warm_target_users(const DatasetSplit& split, const std::vector<long>& counts,
                                   int k) {
    if (counts.size() != static_cast<std::size_t>(split.num_items)) {
        throw ShapeError("warm_target_users: counts length != item count");
    }
    std::vector<int> users;
    for (int u = 0; u < split.num_users(); ++u) {
        if (counts[split.test[u]] >= k) users.push_back(u);
    }
    return users;
}

std::vector<std::pair<int, long>> popularity_histogram(
    const std::vector<std::vector<int>>& train) {
    std::map<int, long> counts;
    for (const auto& seq : train) {
        for (int it : seq) ++counts[it];
    }
    std::vector<std::pair<int, long>> hist(counts.begin(), counts.end());
    std::sort(hist.begin(), hist.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return hist;
}

void save_histogram(const std::vector<std::pair<int, long>>& hist, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_histogram: cannot write '" + path + "'");
    for (const auto& [item, count] : hist) out << item << '\t' << count << '\n';
}

}  // namespace recbench::catalog
