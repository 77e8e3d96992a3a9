#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace testsup {

using kbc::ModelKind;
using kbc::ModelParams;
using kbc::ParamTable;
using kbc::RawTriple;

namespace {

using cd = std::complex<double>;

std::vector<cd> as_complex(const double* row, int dim) {
    std::vector<cd> v(dim / 2);
    for (int j = 0; j < dim / 2; ++j) v[j] = cd(row[2 * j], row[2 * j + 1]);
    return v;
}

}  // namespace

double oracle_score(const ModelParams& p, int64_t s, int64_t rel_row, int64_t o) {
    const double* es = p.entity_row(s);
    const double* eo = p.entity_row(o);
    const double* r = p.relation_row(rel_row);
    const int dim = p.dim;

    switch (p.kind) {
        case ModelKind::TransE: {
            double sq = 0.0;
            for (int j = 0; j < dim; ++j) {
                const double d = es[j] + r[j] - eo[j];
                sq += d * d;
            }
            return -std::sqrt(sq);
        }
        case ModelKind::RotatE: {
            const auto vs = as_complex(es, dim);
            const auto vo = as_complex(eo, dim);
            double sq = 0.0;
            for (int j = 0; j < dim / 2; ++j) {
                const cd rot = std::polar(1.0, r[j]);
                const cd d = vs[j] * rot - vo[j];
                sq += std::norm(d);
            }
            return -std::sqrt(sq);
        }
        case ModelKind::ComplEx: {
            const auto vs = as_complex(es, dim);
            const auto vo = as_complex(eo, dim);
            const auto vr = as_complex(r, dim);
            cd acc = 0.0;
            for (int j = 0; j < dim / 2; ++j) acc += vs[j] * vr[j] * std::conj(vo[j]);
            return acc.real();
        }
        case ModelKind::SimplE: {
            const auto h_s = as_complex(es, dim);
            const auto t_s = as_complex(p.entity_tail_row(s), dim);
            const auto h_o = as_complex(eo, dim);
            const auto t_o = as_complex(p.entity_tail_row(o), dim);
            const auto vr = as_complex(r, dim);
            const auto vri = as_complex(p.relation_inv_row(rel_row), dim);
            cd acc = 0.0;
            for (int j = 0; j < dim / 2; ++j) {
                acc += 0.5 * h_s[j] * vr[j] * t_o[j];
                acc += 0.5 * (p.simple_original ? h_o[j] * vri[j] * t_s[j]
                                                : t_o[j] * vri[j] * h_s[j]);
            }
            return acc.real();
        }
    }
    throw std::logic_error("unknown kind");
}

double fd_score_coord(ModelParams p, int64_t s, int64_t rel_row, int64_t o, ParamTable table,
                      int64_t row, int64_t j, double h) {
    auto& tab = p.table(table);
    const int64_t w = p.table_width(table);
    const int64_t idx = row * w + j;
    const double orig = tab[idx];
    tab[idx] = orig + h;
    const double up = kbc::score_one(p, s, rel_row, o);
    tab[idx] = orig - h;
    const double dn = kbc::score_one(p, s, rel_row, o);
    tab[idx] = orig;
    return (up - dn) / (2.0 * h);
}

ModelParams random_params(ModelKind kind, int dim, int64_t n_entities, int64_t n_relations,
                          bool reciprocal, uint64_t seed, bool simple_original, double scale) {
    ModelParams p = kbc::make_params(kind, dim, n_entities, n_relations, reciprocal,
                                     simple_original);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
    for (ParamTable t : p.tables()) {
        auto& v = p.table(t);
        const bool is_phase = kind == ModelKind::RotatE &&
                              (t == ParamTable::Relation || t == ParamTable::RelationInv);
        for (double& x : v) x = is_phase ? phase(rng) : gauss(rng);
    }
    return p;
}

namespace {

RawTriple name_triple(int64_t s, int64_t r, int64_t o) {
    return {"e" + std::to_string(s), "r" + std::to_string(r), "e" + std::to_string(o)};
}

}  // namespace

RawSplits random_kb_raw(uint64_t seed, int64_t n_entities, int64_t n_relations, int64_t n_train,
                        int64_t n_valid, int64_t n_test) {
    if (n_train < n_entities || n_train < n_relations)
        throw std::invalid_argument("train split too small to cover the vocabulary");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> ent(0, n_entities - 1);
    std::uniform_int_distribution<int64_t> rel(0, n_relations - 1);

    RawSplits out;
    // Leading triples pin down the vocabulary: every entity as subject, every
    // relation in round-robin, objects scattered.
    for (int64_t e = 0; e < n_entities; ++e)
        out.train.push_back(name_triple(e, e % n_relations, (e * 7 + 3) % n_entities));
    while (static_cast<int64_t>(out.train.size()) < n_train)
        out.train.push_back(name_triple(ent(rng), rel(rng), ent(rng)));
    for (int64_t i = 0; i < n_valid; ++i)
        out.valid.push_back(name_triple(ent(rng), rel(rng), ent(rng)));
    for (int64_t i = 0; i < n_test; ++i)
        out.test.push_back(name_triple(ent(rng), rel(rng), ent(rng)));
    return out;
}

kbc::KnowledgeBase random_kb(uint64_t seed, int64_t n_entities, int64_t n_relations,
                             int64_t n_train, int64_t n_valid, int64_t n_test) {
    const RawSplits raw = random_kb_raw(seed, n_entities, n_relations, n_train, n_valid, n_test);
    return kbc::build_kb(raw.train, raw.valid, raw.test);
}

void write_kb_dir(const std::string& dir, const RawSplits& splits) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::vector<RawTriple>& rows) {
        std::ofstream os(std::filesystem::path(dir) / name);
        if (!os) throw std::runtime_error("cannot open file: " + dir + "/" + name);
        for (const RawTriple& t : rows) os << t[0] << '\t' << t[1] << '\t' << t[2] << '\n';
    };
    write("train.txt", splits.train);
    write("valid.txt", splits.valid);
    write("test.txt", splits.test);
}

RawSplits planted_kb_raw(const SynthSpec& spec) {
    const int64_t ne = spec.n_entities;
    const int64_t nr = spec.n_relations;
    const int half = spec.plant_dim / 2;
    if (half < 1) throw std::invalid_argument("plant_dim must be an even number >= 2");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, spec.plant_std);

    // Planted ground truth: complex entity and relation embeddings.
    std::vector<cd> ent(static_cast<size_t>(ne) * half), rel(static_cast<size_t>(nr) * half);
    for (cd& z : ent) z = cd(gauss(rng), gauss(rng));
    for (cd& z : rel) z = cd(gauss(rng), gauss(rng));

    auto row_scores = [&](int64_t s, int64_t r, std::vector<double>& scores) {
        for (int64_t o = 0; o < ne; ++o) {
            cd acc = 0.0;
            for (int j = 0; j < half; ++j)
                acc += ent[s * half + j] * rel[r * half + j] * std::conj(ent[o * half + j]);
            scores[o] = acc.real() / spec.temperature;
        }
    };

    std::uniform_int_distribution<int64_t> pick_s(0, ne - 1);
    std::uniform_int_distribution<int64_t> pick_r(0, nr - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> scores(ne), probs(ne);

    auto sample_object = [&](int64_t s, int64_t r) {
        row_scores(s, r, scores);
        const double mx = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (int64_t o = 0; o < ne; ++o) {
            probs[o] = std::exp(scores[o] - mx);
            z += probs[o];
        }
        double u = unit(rng) * z;
        for (int64_t o = 0; o < ne; ++o) {
            u -= probs[o];
            if (u <= 0.0) return o;
        }
        return ne - 1;
    };

    std::unordered_set<uint64_t> seen;
    std::vector<kbc::Triple> triples;
    auto try_add = [&](int64_t s, int64_t r, int64_t o) {
        const uint64_t key =
            (static_cast<uint64_t>(s) * static_cast<uint64_t>(nr) + static_cast<uint64_t>(r)) *
                static_cast<uint64_t>(ne) +
            static_cast<uint64_t>(o);
        if (!seen.insert(key).second) return false;
        triples.push_back({s, r, o});
        return true;
    };

    const int64_t max_attempts = spec.n_triples * 50;
    for (int64_t attempts = 0;
         static_cast<int64_t>(triples.size()) < spec.n_triples && attempts < max_attempts;
         ++attempts) {
        const int64_t s = pick_s(rng);
        const int64_t r = pick_r(rng);
        try_add(s, r, sample_object(s, r));
    }
    if (static_cast<int64_t>(triples.size()) < spec.n_triples)
        throw std::runtime_error("planted sampler saturated before reaching n_triples");

    // Guarantee coverage: any entity never seen gets one extra natural triple
    // with itself as subject.
    std::vector<char> used(ne, 0);
    for (const kbc::Triple& t : triples) used[t.s] = used[t.o] = 1;
    for (int64_t e = 0; e < ne; ++e) {
        if (used[e]) continue;
        for (int tries = 0; tries < 1000; ++tries) {
            const int64_t r = pick_r(rng);
            if (try_add(e, r, sample_object(e, r))) break;
        }
        used[e] = 1;
    }

    std::shuffle(triples.begin(), triples.end(), rng);
    const int64_t n = static_cast<int64_t>(triples.size());
    const int64_t n_train = n * 8 / 10;
    const int64_t n_valid = n / 10;

    RawSplits out;
    for (int64_t i = 0; i < n; ++i) {
        const kbc::Triple& t = triples[i];
        auto raw = name_triple(t.s, t.r, t.o);
        if (i < n_train)
            out.train.push_back(raw);
        else if (i < n_train + n_valid)
            out.valid.push_back(raw);
        else
            out.test.push_back(raw);
    }

    // Valid/test entities must exist in the training vocabulary; with dense
    // coverage triples moved by the shuffle that is not guaranteed, so swap
    // offenders into train.
    std::unordered_set<std::string> train_ents, train_rels;
    for (const RawTriple& t : out.train) {
        train_ents.insert(t[0]);
        train_ents.insert(t[2]);
        train_rels.insert(t[1]);
    }
    auto fix_split = [&](std::vector<RawTriple>& split) {
        for (size_t i = 0; i < split.size();) {
            const RawTriple& t = split[i];
            if (train_ents.count(t[0]) && train_ents.count(t[2]) && train_rels.count(t[1])) {
                ++i;
                continue;
            }
            train_ents.insert(t[0]);
            train_ents.insert(t[2]);
            train_rels.insert(t[1]);
            out.train.push_back(t);
            split.erase(split.begin() + static_cast<int64_t>(i));
        }
    };
    fix_split(out.valid);
    fix_split(out.test);
    return out;
}

kbc::KnowledgeBase planted_kb(const SynthSpec& spec) {
    const RawSplits raw = planted_kb_raw(spec);
    return kbc::build_kb(raw.train, raw.valid, raw.test);
}

}  // namespace testsup
