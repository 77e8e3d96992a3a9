#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace kbc {

struct Triple {
    int64_t s = 0;
    int64_t r = 0;
    int64_t o = 0;
    bool operator==(const Triple&) const = default;
};

using RawTriple = std::array<std::string, 3>;

/// Reads one split file: one triple per line, subject<TAB>relation<TAB>object.
/// Empty lines are skipped; a line with any other field count is an error
/// naming the 1-based line number. An empty file is an error.
std::vector<RawTriple> load_split(const std::string& path);

enum class Split { Train, Valid, Test };

const char* split_name(Split s);

/// Integer-encoded triple store. Vocabulary ids are dense and assigned by
/// first appearance scanning train, then valid, then test (subject before
/// object within a triple). Splits keep source file row order.
class KnowledgeBase {
public:
    KnowledgeBase() = default;

    const std::vector<std::string>& entity_names() const { return entity_names_; }
    const std::vector<std::string>& relation_names() const { return relation_names_; }
    int64_t num_entities() const { return static_cast<int64_t>(entity_names_.size()); }
    int64_t num_relations() const { return static_cast<int64_t>(relation_names_.size()); }

    const std::vector<Triple>& train() const { return train_; }
    const std::vector<Triple>& valid() const { return valid_; }
    // Counts accesses so experiments can prove the test fold stays untouched
    // until model selection is done.
    const std::vector<Triple>& test() const {
        ++test_reads_;
        return test_;
    }
    const std::vector<Triple>& split(Split s) const;

    uint64_t test_reads() const { return test_reads_; }

    friend KnowledgeBase build_kb(const std::vector<RawTriple>& train,
                                  const std::vector<RawTriple>& valid,
                                  const std::vector<RawTriple>& test);

private:
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, int64_t> entity_ids_;
    std::unordered_map<std::string, int64_t> relation_ids_;
    std::vector<Triple> train_, valid_, test_;
    mutable uint64_t test_reads_ = 0;
};

KnowledgeBase build_kb(const std::vector<RawTriple>& train,
                       const std::vector<RawTriple>& valid,
                       const std::vector<RawTriple>& test);

/// Loads train.txt/valid.txt/test.txt from a dataset directory.
KnowledgeBase load_dataset(const std::string& dir);

/// For every (s,r) the set of objects known true in the covered splits, and
/// for every (r,o) the set of subjects. Sets are sorted, duplicate-free id
/// vectors. With include_test = false the index covers train+valid only, so
/// dev-fold evaluation during model selection never reads the test split.
class FilterIndex {
public:
    FilterIndex() = default;
    explicit FilterIndex(const KnowledgeBase& kb, bool include_test = true);

    // Never null for (s,r)/(r,o) pairs that occur in some split; null otherwise.
    const std::vector<int64_t>* tail_true(int64_t s, int64_t r) const;
    const std::vector<int64_t>* head_true(int64_t r, int64_t o) const;

    size_t num_sr_keys() const { return tail_true_.size(); }
    size_t num_ro_keys() const { return head_true_.size(); }

private:
    int64_t num_relations_ = 0;
    int64_t num_entities_ = 0;
    std::unordered_map<int64_t, std::vector<int64_t>> tail_true_;
    std::unordered_map<int64_t, std::vector<int64_t>> head_true_;
};

FilterIndex build_filter_index(const KnowledgeBase& kb, bool include_test = true);

}  // namespace kbc
