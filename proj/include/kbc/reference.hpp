#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kbc/eval.hpp"
#include "kbc/kb.hpp"
#include "kbc/model.hpp"

// Serial reference implementations: one score_one call per (query, candidate)
// pair, sort-based ranks, no threading. Slow but independently simple; the
// fast kernels are tested against these.
namespace kbc::ref {

/// scores[b][c] = score_one(queries[b].first, queries[b].second, c).
void score_1n_tail(const ModelParams& params,
                   std::span<const std::pair<int64_t, int64_t>> queries, ScoreMatrix& out);

/// Head queries (rel, object). With reciprocal relations this scores the tail
/// query (object, inverse-rel); otherwise scores[b][c] = score_one(c, rel, object).
void score_1n_head(const ModelParams& params,
                   std::span<const std::pair<int64_t, int64_t>> queries, ScoreMatrix& out);

/// Expected filtered rank computed by sorting the unfiltered candidate scores.
double filtered_rank(std::span<const double> scores, int64_t gold,
                     std::span<const int64_t> filter_set);

/// Same contract as kbc::evaluate, computed serially from the pieces above.
EvalReport evaluate(const ModelParams& params, const KnowledgeBase& kb,
                    const FilterIndex& filter, Split split);

}  // namespace kbc::ref
