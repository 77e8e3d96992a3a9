#include <stdexcept>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "kbc/eval.hpp"
#include "kbc/kb.hpp"
#include "kbc/model.hpp"
#include "kbc/reference.hpp"
#include "support.hpp"

using namespace kbc;

namespace {

uint64_t params_checksum(const ModelParams& p) {
    uint64_t h = 1469598103934665603ull;
    for (ParamTable t : p.tables())
        for (double x : p.table(t)) {
            uint64_t bits;
            std::memcpy(&bits, &x, 8);
            h = (h ^ bits) * 1099511628211ull;
        }
    return h;
}

}  // namespace

TEST_CASE("rank pinning") {
    SUBCASE("gold strictly highest") {
        std::vector<double> s = {0.1, 0.9, 0.3};
        std::vector<int64_t> filter = {1};
        CHECK(filtered_rank(s, 1, filter) == 1.0);
    }
    SUBCASE("three-way tie gives expected rank 2") {
        std::vector<double> s = {0.5, 0.5, 0.5};
        std::vector<int64_t> filter = {0};
        CHECK(filtered_rank(s, 0, filter) == 2.0);
    }
    SUBCASE("filtered candidates do not count") {
        std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
        std::vector<int64_t> filter = {0, 3};  // drop the top scorer; 3 is gold
        CHECK(filtered_rank(s, 3, filter) == 3.0);
        std::vector<int64_t> filter2 = {0, 1, 2, 3};
        CHECK(filtered_rank(s, 3, filter2) == 1.0);
    }
    SUBCASE("gold id out of range") {
        std::vector<double> s = {0.0};
        std::vector<int64_t> none;
        CHECK_THROWS_AS(filtered_rank(s, 1, none), std::out_of_range);
        CHECK_THROWS_AS(filtered_rank(s, -1, none), std::out_of_range);
    }
}

TEST_CASE("rank agrees with the sort-based oracle on 1000 draws") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int64_t> pick(0, 9);
    std::uniform_int_distribution<int> coarse(0, 3);  // force ties
    for (int draw = 0; draw < 1000; ++draw) {
        std::vector<double> scores(10);
        for (double& s : scores)
            s = (draw % 2) ? gauss(rng) : static_cast<double>(coarse(rng));
        const int64_t gold = pick(rng);
        std::vector<int64_t> filter;
        for (int64_t c = 0; c < 10; ++c)
            if (c == gold || coarse(rng) == 0) filter.push_back(c);
        CHECK(filtered_rank(scores, gold, filter) ==
              doctest::Approx(ref::filtered_rank(scores, gold, filter)).epsilon(1e-12));
    }
}

TEST_CASE("rank is invariant under strictly monotone transforms") {
    std::mt19937_64 rng(32);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<double> scores(8);
        for (double& s : scores) s = gauss(rng);
        std::vector<double> warped(8);
        for (int i = 0; i < 8; ++i) warped[i] = std::atan(3.0 * scores[i]) * 2.0 + 1.0;
        std::vector<int64_t> filter = {2, 5};
        for (int64_t gold : {0L, 2L, 7L})
            CHECK(filtered_rank(scores, gold, filter) == filtered_rank(warped, gold, filter));
    }
}

TEST_CASE("growing the filter never worsens the rank") {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int draw = 0; draw < 200; ++draw) {
        std::vector<double> scores(12);
        for (double& s : scores) s = gauss(rng);
        const int64_t gold = draw % 12;
        std::vector<int64_t> filter = {gold};
        std::sort(filter.begin(), filter.end());
        double prev = filtered_rank(scores, gold, filter);
        std::uniform_int_distribution<int64_t> pick(0, 11);
        for (int grow = 0; grow < 6; ++grow) {
            const int64_t add = pick(rng);
            if (!std::binary_search(filter.begin(), filter.end(), add)) {
                filter.insert(std::upper_bound(filter.begin(), filter.end(), add), add);
            }
            const double cur = filtered_rank(scores, gold, filter);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("full evaluation matches the serial brute-force path") {
    for (ModelKind kind : {ModelKind::TransE, ModelKind::RotatE, ModelKind::ComplEx,
                           ModelKind::SimplE}) {
        for (bool recip : {false, true}) {
            CAPTURE(static_cast<int>(kind));
            CAPTURE(recip);
            KnowledgeBase kb = testsup::random_kb(60 + static_cast<int>(kind), 9, 3, 30, 8, 8);
            ModelParams p = testsup::random_params(kind, 6, kb.num_entities(),
                                                   kb.num_relations(), recip, 17);
            const FilterIndex filter(kb);
            const EvalReport fast = evaluate(p, kb, filter, Split::Test, /*query_batch=*/3,
                                             /*chunk=*/4);
            const EvalReport slow = ref::evaluate(p, kb, filter, Split::Test);
            CHECK(fast.mrr == doctest::Approx(slow.mrr).epsilon(1e-12));
            CHECK(fast.hits1 == doctest::Approx(slow.hits1).epsilon(1e-12));
            CHECK(fast.hits10 == doctest::Approx(slow.hits10).epsilon(1e-12));
            CHECK(fast.head.mrr == doctest::Approx(slow.head.mrr).epsilon(1e-12));
            CHECK(fast.tail.mrr == doctest::Approx(slow.tail.mrr).epsilon(1e-12));
            CHECK(fast.query_count == slow.query_count);
            CHECK(fast.head.query_count == slow.head.query_count);
        }
    }
}

TEST_CASE("metric sanity bounds") {
    KnowledgeBase kb = testsup::random_kb(61, 10, 2, 30, 6, 6);
    ModelParams p = testsup::random_params(ModelKind::ComplEx, 4, 10, 2, false, 19);
    const FilterIndex filter(kb);
    const EvalReport rep = evaluate(p, kb, filter, Split::Valid);
    CHECK(rep.hits1 <= rep.hits10);
    CHECK(rep.hits10 <= 1.0);
    CHECK(rep.mrr >= rep.hits1);
    CHECK(rep.mrr <= 1.0);
    CHECK(rep.query_count == 2 * static_cast<int64_t>(kb.valid().size()));
    CHECK(rep.head.query_count + rep.tail.query_count == rep.query_count);
}

TEST_CASE("evaluation does not mutate parameters") {
    KnowledgeBase kb = testsup::random_kb(62, 8, 2, 20, 5, 5);
    ModelParams p = testsup::random_params(ModelKind::SimplE, 4, 8, 2, true, 23);
    const uint64_t before = params_checksum(p);
    const FilterIndex filter(kb);
    (void)evaluate(p, kb, filter, Split::Test);
    CHECK(params_checksum(p) == before);
}

TEST_CASE("report serialization shape") {
    KnowledgeBase kb = testsup::random_kb(63, 6, 2, 15, 3, 3);
    ModelParams p = testsup::random_params(ModelKind::TransE, 4, 6, 2, false, 29);
    const FilterIndex filter(kb);
    const std::string j = evaluate(p, kb, filter, Split::Test).to_json();
    CHECK(j.find("\"split\":\"test\"") != std::string::npos);
    for (const char* key : {"\"mrr\"", "\"hits1\"", "\"hits10\"", "\"head\"", "\"tail\"",
                            "\"query_count\""})
        CHECK(j.find(key) != std::string::npos);
    CHECK(j.rfind("\"split\"", 20) != std::string::npos);  // split leads the record
}

TEST_CASE("capped dev metric walks the deterministic prefix") {
    KnowledgeBase kb = testsup::random_kb(64, 9, 2, 24, 10, 5);
    ModelParams p = testsup::random_params(ModelKind::ComplEx, 4, 9, 2, false, 37);
    const FilterIndex filter(kb);

    SUBCASE("uncapped equals the full evaluation") {
        CHECK(mrr_only(p, kb, filter, Split::Valid) ==
              doctest::Approx(evaluate(p, kb, filter, Split::Valid).mrr).epsilon(1e-15));
    }
    SUBCASE("half cap equals a hand-rolled prefix") {
        const int64_t cap = 10;  // 5 triples, both directions
        ScoreMatrix m;
        double rr = 0.0;
        std::vector<std::pair<int64_t, int64_t>> q(1);
        for (int64_t i = 0; i < 5; ++i) {
            const Triple& t = kb.valid()[i];
            q[0] = {t.s, t.r};
            ref::score_1n_tail(p, q, m);
            rr += 1.0 / ref::filtered_rank({m.row(0), static_cast<size_t>(m.cols)}, t.o,
                                           *filter.tail_true(t.s, t.r));
            q[0] = {t.r, t.o};
            ref::score_1n_head(p, q, m);
            rr += 1.0 / ref::filtered_rank({m.row(0), static_cast<size_t>(m.cols)}, t.s,
                                           *filter.head_true(t.r, t.o));
        }
        CHECK(mrr_only(p, kb, filter, Split::Valid, cap) ==
              doctest::Approx(rr / cap).epsilon(1e-12));
    }
    SUBCASE("odd cap ends on a tail query") {
        CHECK_NOTHROW(mrr_only(p, kb, filter, Split::Valid, 7));
    }
    SUBCASE("zero cap is the empty evaluation") {
        CHECK_THROWS_WITH_AS(mrr_only(p, kb, filter, Split::Valid, 0), "empty evaluation",
                             std::runtime_error);
    }
    SUBCASE("cap beyond the query count is rejected") {
        CHECK_THROWS_AS(mrr_only(p, kb, filter, Split::Valid, 10000), std::invalid_argument);
    }
}

TEST_CASE("query batching does not change the report") {
    KnowledgeBase kb = testsup::random_kb(65, 8, 2, 20, 6, 6);
    ModelParams p = testsup::random_params(ModelKind::RotatE, 4, 8, 2, false, 41);
    const FilterIndex filter(kb);
    const EvalReport a = evaluate(p, kb, filter, Split::Test, 512, 1024);
    const EvalReport b = evaluate(p, kb, filter, Split::Test, 1, 2);
    CHECK(a.mrr == b.mrr);
    CHECK(a.hits1 == b.hits1);
    CHECK(a.hits10 == b.hits10);
}
