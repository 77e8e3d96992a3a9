#include "kbc/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kbc {

double loss_full_softmax(std::span<const double> scores, int64_t gold,
                         std::span<double> dscores) {
    const int64_t n = static_cast<int64_t>(scores.size());
    if (gold < 0 || gold >= n)
        throw std::out_of_range("gold index out of range: " + std::to_string(gold) + " of " +
                                std::to_string(n));
    if (dscores.size() != scores.size())
        throw std::invalid_argument("dscores size mismatch");
    // dscores may alias scores, so read everything needed before writing.
    const double gold_score = scores[gold];
    double mx = scores[0];
    for (int64_t i = 1; i < n; ++i) mx = std::max(mx, scores[i]);
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double e = std::exp(scores[i] - mx);
        dscores[i] = e;
        sum += e;
    }
    const double inv = 1.0 / sum;
    for (int64_t i = 0; i < n; ++i) dscores[i] *= inv;
    dscores[gold] -= 1.0;
    return mx + std::log(sum) - gold_score;
}

double loss_sampled(std::span<const double> scores_pos_first, std::span<double> dscores) {
    if (scores_pos_first.empty()) throw std::invalid_argument("empty sampled-score row");
    return loss_full_softmax(scores_pos_first, 0, dscores);
}

}  // namespace kbc
