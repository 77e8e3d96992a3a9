#include "kbc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace kbc {

double filtered_rank(std::span<const double> scores, int64_t gold,
                     std::span<const int64_t> filter_set) {
    const int64_t n = static_cast<int64_t>(scores.size());
    if (gold < 0 || gold >= n)
        throw std::out_of_range("gold id out of range: " + std::to_string(gold));
    const double g = scores[gold];
    int64_t greater = 0, ties = 0;
    for (int64_t c = 0; c < n; ++c) {
        if (c == gold) continue;
        if (std::binary_search(filter_set.begin(), filter_set.end(), c)) continue;
        if (scores[c] > g)
            ++greater;
        else if (scores[c] == g)
            ++ties;
    }
    return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

namespace {

// Reciprocal ranks and expected ranks in canonical query order: triple 0 tail,
// triple 0 head, triple 1 tail, ... capped at max_queries when given.
void eval_queries(const ModelParams& p, const KnowledgeBase& kb, const FilterIndex& filter,
                  Split split, std::optional<int64_t> max_queries, int64_t query_batch,
                  int64_t chunk, std::vector<double>& ranks) {
    const auto& triples = kb.split(split);
    const int64_t nt = static_cast<int64_t>(triples.size());
    const int64_t total = 2 * nt;
    const int64_t want = max_queries.value_or(total);
    if (query_batch < 1) query_batch = 1;

    ranks.clear();
    ranks.reserve(want);

    std::vector<std::pair<int64_t, int64_t>> tail_q, head_q;
    std::vector<double> tail_rank, head_rank;
    ScoreMatrix st, sh;

    int64_t produced = 0;
    for (int64_t t0 = 0; t0 < nt && produced < want; t0 += query_batch) {
        const int64_t remaining = want - produced;
        int64_t t1 = std::min(nt, t0 + query_batch);
        const int64_t q_take = std::min(2 * (t1 - t0), remaining);
        const int64_t n_tail = (q_take + 1) / 2;
        const int64_t n_head = q_take / 2;
        t1 = t0 + n_tail;

        tail_q.clear();
        head_q.clear();
        for (int64_t i = 0; i < n_tail; ++i) {
            const Triple& t = triples[t0 + i];
            tail_q.push_back({t.s, t.r});
        }
        for (int64_t i = 0; i < n_head; ++i) {
            const Triple& t = triples[t0 + i];
            head_q.push_back({t.r, t.o});
        }
        score_1n_tail(p, tail_q, st, chunk);
        score_1n_head(p, head_q, sh, chunk);

        tail_rank.assign(n_tail, 0.0);
        head_rank.assign(n_head, 0.0);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n_tail; ++i) {
            const Triple& t = triples[t0 + i];
            const std::vector<int64_t>* f = filter.tail_true(t.s, t.r);
            const int64_t self[1] = {t.o};
            std::span<const int64_t> fs =
                f ? std::span<const int64_t>(*f) : std::span<const int64_t>(self, 1);
            tail_rank[i] = filtered_rank(
                std::span<const double>(st.row(i), static_cast<size_t>(st.cols)), t.o, fs);
        }
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n_head; ++i) {
            const Triple& t = triples[t0 + i];
            const std::vector<int64_t>* f = filter.head_true(t.r, t.o);
            const int64_t self[1] = {t.s};
            std::span<const int64_t> fs =
                f ? std::span<const int64_t>(*f) : std::span<const int64_t>(self, 1);
            head_rank[i] = filtered_rank(
                std::span<const double>(sh.row(i), static_cast<size_t>(sh.cols)), t.s, fs);
        }

        for (int64_t i = 0; i < n_tail; ++i) {
            ranks.push_back(tail_rank[i]);
            if (i < n_head) ranks.push_back(head_rank[i]);
        }
        produced += q_take;
    }
}

}  // namespace

EvalReport evaluate(const ModelParams& p, const KnowledgeBase& kb, const FilterIndex& filter,
                    Split split, int64_t query_batch, int64_t chunk) {
    std::vector<double> ranks;
    eval_queries(p, kb, filter, split, std::nullopt, query_batch, chunk, ranks);

    EvalReport rep;
    rep.split = split_name(split);
    rep.query_count = static_cast<int64_t>(ranks.size());
    double rr_sum = 0.0;
    for (size_t i = 0; i < ranks.size(); ++i) {
        const double rank = ranks[i];
        const double rr = 1.0 / rank;
        rr_sum += rr;
        DirReport& dir = (i % 2 == 0) ? rep.tail : rep.head;
        dir.mrr += rr;  // sums for now
        dir.hits1 += rank <= 1.0 ? 1.0 : 0.0;
        dir.hits10 += rank <= 10.0 ? 1.0 : 0.0;
        ++dir.query_count;
        rep.hits1 += rank <= 1.0 ? 1.0 : 0.0;
        rep.hits10 += rank <= 10.0 ? 1.0 : 0.0;
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

double mrr_only(const ModelParams& p, const KnowledgeBase& kb, const FilterIndex& filter,
                Split split, std::optional<int64_t> sample, int64_t query_batch, int64_t chunk) {
    if (sample && *sample == 0) throw std::runtime_error("empty evaluation");
    if (sample) {
        const int64_t total = 2 * static_cast<int64_t>(kb.split(split).size());
        if (*sample < 0 || *sample > total)
            throw std::invalid_argument("sample " + std::to_string(*sample) +
                                        " exceeds query count " + std::to_string(total));
    }
    std::vector<double> ranks;
    eval_queries(p, kb, filter, split, sample, query_batch, chunk, ranks);
    if (ranks.empty()) throw std::runtime_error("empty evaluation");
    double rr_sum = 0.0;
    for (double rank : ranks) rr_sum += 1.0 / rank;
    return rr_sum / static_cast<double>(ranks.size());
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["split"] = split;
    j["mrr"] = mrr;
    j["hits1"] = hits1;
    j["hits10"] = hits10;
    auto dir = [](const DirReport& d) {
        nlohmann::ordered_json o;
        o["mrr"] = d.mrr;
        o["hits1"] = d.hits1;
        o["hits10"] = d.hits10;
        o["query_count"] = d.query_count;
        return o;
    };
    j["head"] = dir(head);
    j["tail"] = dir(tail);
    j["query_count"] = query_count;
    return j.dump();
}

}  // namespace kbc
