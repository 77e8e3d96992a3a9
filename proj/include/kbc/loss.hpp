#pragma once

#include <cstdint>
#include <span>

namespace kbc {

/// Multiclass cross-entropy over one score row:
/// loss = -scores[gold] + logsumexp(scores), computed with max subtraction;
/// dscores = softmax(scores) - onehot(gold). dscores may alias scores.
/// Throws std::out_of_range if gold is not a valid index.
double loss_full_softmax(std::span<const double> scores, int64_t gold,
                         std::span<double> dscores);

/// Sampled approximation: scores[0] is the positive, the rest are negatives.
/// Identical contract to loss_full_softmax with gold = 0.
double loss_sampled(std::span<const double> scores_pos_first, std::span<double> dscores);

}  // namespace kbc
