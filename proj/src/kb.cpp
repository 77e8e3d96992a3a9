#include "kbc/kb.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace kbc {

namespace {

int64_t pack_pair(int64_t a, int64_t b) {
    return (a << 32) | b;
}

}  // namespace

std::vector<RawTriple> load_split(const std::string& path) {
    std::ifstream ifs(path);
    if (!ifs) throw std::runtime_error(path + ": cannot open file");

    std::vector<RawTriple> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(ifs, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        size_t t1 = line.find('\t');
        size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
        size_t t3 = (t2 == std::string::npos) ? std::string::npos : line.find('\t', t2 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": expected 3 tab-separated fields");
        }
        out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
    }
    if (out.empty()) throw std::runtime_error(path + ": empty file");
    return out;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

const std::vector<Triple>& KnowledgeBase::split(Split s) const {
    switch (s) {
        case Split::Train: return train();
        case Split::Valid: return valid();
        case Split::Test: return test();
    }
    return train();
}

KnowledgeBase build_kb(const std::vector<RawTriple>& train,
                       const std::vector<RawTriple>& valid,
                       const std::vector<RawTriple>& test) {
    KnowledgeBase kb;

    auto intern = [](std::unordered_map<std::string, int64_t>& ids,
                     std::vector<std::string>& names, const std::string& v) {
        auto it = ids.find(v);
        if (it != ids.end()) return it->second;
        int64_t id = static_cast<int64_t>(names.size());
        ids.emplace(v, id);
        names.push_back(v);
        return id;
    };

    auto encode = [&](const std::vector<RawTriple>& raw, std::vector<Triple>& out) {
        out.reserve(raw.size());
        for (const RawTriple& t : raw) {
            Triple enc;
            enc.s = intern(kb.entity_ids_, kb.entity_names_, t[0]);
            enc.r = intern(kb.relation_ids_, kb.relation_names_, t[1]);
            enc.o = intern(kb.entity_ids_, kb.entity_names_, t[2]);
            out.push_back(enc);
        }
    };

    encode(train, kb.train_);
    encode(valid, kb.valid_);
    encode(test, kb.test_);
    return kb;
}

KnowledgeBase load_dataset(const std::string& dir) {
    return build_kb(load_split(dir + "/train.txt"),
                    load_split(dir + "/valid.txt"),
                    load_split(dir + "/test.txt"));
}

FilterIndex::FilterIndex(const KnowledgeBase& kb, bool include_test)
    : num_relations_(kb.num_relations()), num_entities_(kb.num_entities()) {
    auto add = [&](const std::vector<Triple>& triples) {
        for (const Triple& t : triples) {
            tail_true_[pack_pair(t.s, t.r)].push_back(t.o);
            head_true_[pack_pair(t.r, t.o)].push_back(t.s);
        }
    };
    add(kb.train());
    add(kb.valid());
    if (include_test) add(kb.test());

    auto dedup = [](std::unordered_map<int64_t, std::vector<int64_t>>& m) {
        for (auto& [k, v] : m) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    };
    dedup(tail_true_);
    dedup(head_true_);
}

const std::vector<int64_t>* FilterIndex::tail_true(int64_t s, int64_t r) const {
    auto it = tail_true_.find(pack_pair(s, r));
    return it == tail_true_.end() ? nullptr : &it->second;
}

const std::vector<int64_t>* FilterIndex::head_true(int64_t r, int64_t o) const {
    auto it = head_true_.find(pack_pair(r, o));
    return it == head_true_.end() ? nullptr : &it->second;
}

FilterIndex build_filter_index(const KnowledgeBase& kb, bool include_test) {
    return FilterIndex(kb, include_test);
}

}  // namespace kbc
