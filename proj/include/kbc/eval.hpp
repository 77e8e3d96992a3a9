#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "kbc/kb.hpp"
#include "kbc/model.hpp"

namespace kbc {

struct DirReport {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
    int64_t query_count = 0;
};

struct EvalReport {
    std::string split;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
    DirReport head;
    DirReport tail;
    int64_t query_count = 0;

    std::string to_json() const;  // {split, mrr, hits1, hits10, head.*, tail.*, query_count}
};

/// Expected filtered rank of gold under random tie-breaking. filter_set is a
/// sorted, duplicate-free list of known-true candidate ids for this query
/// (gold included); candidates are all entities except the filtered ones, but
/// gold itself is always ranked. rank = 1 + #{score > gold} + #{ties}/2.
double filtered_rank(std::span<const double> scores, int64_t gold,
                     std::span<const int64_t> filter_set);

/// Filtered link-prediction metrics over both query directions of a split.
/// Tail queries (s, r, ?) filter with tail_true(s, r); head queries (?, r, o)
/// filter with head_true(r, o). Scores come from score_1n_* in batches of
/// query_batch rows.
EvalReport evaluate(const ModelParams& params, const KnowledgeBase& kb,
                    const FilterIndex& filter, Split split, int64_t query_batch = 512,
                    int64_t chunk = kDefaultCandidateChunk);

/// MRR over the first `sample` queries in deterministic order (per triple:
/// tail query, then head query; triples in split order). Without a cap this
/// equals evaluate(...).mrr. sample = 0 is an error ("empty evaluation");
/// sample > query count is an error.
double mrr_only(const ModelParams& params, const KnowledgeBase& kb, const FilterIndex& filter,
                Split split, std::optional<int64_t> sample = std::nullopt,
                int64_t query_batch = 512, int64_t chunk = kDefaultCandidateChunk);

}  // namespace kbc
