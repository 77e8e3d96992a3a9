#include "kbc/reference.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace kbc::ref {

void score_1n_tail(const ModelParams& p, std::span<const std::pair<int64_t, int64_t>> queries,
                   ScoreMatrix& out) {
    const int64_t ne = p.n_entities;
    out.resize(static_cast<int64_t>(queries.size()), ne);
    for (size_t b = 0; b < queries.size(); ++b) {
        double* row = out.row(static_cast<int64_t>(b));
        for (int64_t c = 0; c < ne; ++c)
            row[c] = score_one(p, queries[b].first, queries[b].second, c);
    }
}

void score_1n_head(const ModelParams& p, std::span<const std::pair<int64_t, int64_t>> queries,
                   ScoreMatrix& out) {
    const int64_t ne = p.n_entities;
    out.resize(static_cast<int64_t>(queries.size()), ne);
    for (size_t b = 0; b < queries.size(); ++b) {
        const int64_t rel = queries[b].first;
        const int64_t obj = queries[b].second;
        double* row = out.row(static_cast<int64_t>(b));
        if (p.reciprocal) {
            const int64_t inv = rel < p.n_relations ? rel + p.n_relations : rel - p.n_relations;
            for (int64_t c = 0; c < ne; ++c) row[c] = score_one(p, obj, inv, c);
        } else {
            for (int64_t c = 0; c < ne; ++c) row[c] = score_one(p, c, rel, obj);
        }
    }
}

double filtered_rank(std::span<const double> scores, int64_t gold,
                     std::span<const int64_t> filter_set) {
    const int64_t n = static_cast<int64_t>(scores.size());
    if (gold < 0 || gold >= n)
        throw std::out_of_range("gold id out of range: " + std::to_string(gold));
    std::unordered_set<int64_t> drop(filter_set.begin(), filter_set.end());
    const double g = scores[gold];
    std::vector<double> kept;
    kept.reserve(scores.size());
    kept.push_back(g);
    for (int64_t c = 0; c < n; ++c) {
        if (c == gold || drop.count(c)) continue;
        kept.push_back(scores[c]);
    }
    std::sort(kept.begin(), kept.end(), std::greater<double>());
    const auto lo = std::lower_bound(kept.begin(), kept.end(), g, std::greater<double>());
    const auto hi = std::upper_bound(kept.begin(), kept.end(), g, std::greater<double>());
    const double greater = static_cast<double>(lo - kept.begin());
    const double eq_others = static_cast<double>(hi - lo) - 1.0;  // excluding gold itself
    return 1.0 + greater + eq_others / 2.0;
}

EvalReport evaluate(const ModelParams& p, const KnowledgeBase& kb, const FilterIndex& filter,
                    Split split) {
    const auto& triples = kb.split(split);

    EvalReport rep;
    rep.split = split_name(split);
    double rr_sum = 0.0;
    std::vector<std::pair<int64_t, int64_t>> q(1);
    ScoreMatrix scores;
    auto take = [&](DirReport& dir, double rank) {
        const double rr = 1.0 / rank;
        rr_sum += rr;
        dir.mrr += rr;
        dir.hits1 += rank <= 1.0 ? 1.0 : 0.0;
        dir.hits10 += rank <= 10.0 ? 1.0 : 0.0;
        ++dir.query_count;
        rep.hits1 += rank <= 1.0 ? 1.0 : 0.0;
        rep.hits10 += rank <= 10.0 ? 1.0 : 0.0;
        ++rep.query_count;
    };
    const std::vector<int64_t> empty;
    for (const Triple& t : triples) {
        q[0] = {t.s, t.r};
        ref::score_1n_tail(p, q, scores);
        const std::vector<int64_t>* ft = filter.tail_true(t.s, t.r);
        take(rep.tail, filtered_rank({scores.row(0), static_cast<size_t>(scores.cols)}, t.o,
                                     ft ? *ft : empty));

        q[0] = {t.r, t.o};
        ref::score_1n_head(p, q, scores);
        const std::vector<int64_t>* fh = filter.head_true(t.r, t.o);
        take(rep.head, filtered_rank({scores.row(0), static_cast<size_t>(scores.cols)}, t.s,
                                     fh ? *fh : empty));
    }
    auto finish = [](DirReport& d) {
        if (d.query_count == 0) return;
        d.mrr /= static_cast<double>(d.query_count);
        d.hits1 /= static_cast<double>(d.query_count);
        d.hits10 /= static_cast<double>(d.query_count);
    };
    finish(rep.tail);
    finish(rep.head);
    if (rep.query_count > 0) {
        rep.mrr = rr_sum / static_cast<double>(rep.query_count);
        rep.hits1 /= static_cast<double>(rep.query_count);
        rep.hits10 /= static_cast<double>(rep.query_count);
    }
    return rep;
}

}  // namespace kbc::ref
