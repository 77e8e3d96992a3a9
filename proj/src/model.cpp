#include "kbc/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "kernels.hpp"

namespace kbc {

const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::TransE: return "transe";
        case ModelKind::RotatE: return "rotate";
        case ModelKind::ComplEx: return "complex";
        case ModelKind::SimplE: return "simple";
    }
    return "?";
}

std::optional<ModelKind> model_kind_from_string(std::string_view name) {
    if (name == "transe") return ModelKind::TransE;
    if (name == "rotate") return ModelKind::RotatE;
    if (name == "complex") return ModelKind::ComplEx;
    if (name == "simple") return ModelKind::SimplE;
    return std::nullopt;
}

std::vector<double>& ModelParams::table(ParamTable t) {
    switch (t) {
        case ParamTable::Entity: return entity;
        case ParamTable::EntityTail: return entity_tail;
        case ParamTable::Relation: return relation;
        case ParamTable::RelationInv: return relation_inv;
    }
    throw std::logic_error("bad table id");
}

const std::vector<double>& ModelParams::table(ParamTable t) const {
    return const_cast<ModelParams*>(this)->table(t);
}

int ModelParams::table_width(ParamTable t) const {
    return (t == ParamTable::Relation || t == ParamTable::RelationInv) ? rel_width() : dim;
}

int64_t ModelParams::table_rows(ParamTable t) const {
    switch (t) {
        case ParamTable::Entity: return n_entities;
        case ParamTable::EntityTail: return has_tail_table() ? n_entities : 0;
        case ParamTable::Relation: return relation_rows();
        case ParamTable::RelationInv: return has_relation_inv() ? relation_rows() : 0;
    }
    return 0;
}

std::vector<ParamTable> ModelParams::tables() const {
    std::vector<ParamTable> out{ParamTable::Entity};
    if (has_tail_table()) out.push_back(ParamTable::EntityTail);
    out.push_back(ParamTable::Relation);
    if (has_relation_inv()) out.push_back(ParamTable::RelationInv);
    return out;
}

bool ModelParams::same_shape(const ModelParams& o) const {
    return kind == o.kind && dim == o.dim && reciprocal == o.reciprocal &&
           simple_original == o.simple_original && n_entities == o.n_entities &&
           n_relations == o.n_relations;
}

ModelParams make_params(ModelKind kind, int dim, int64_t n_entities, int64_t n_relations,
                        bool reciprocal, bool simple_original) {
    if (dim <= 0) throw std::invalid_argument("dim must be positive");
    if (n_entities <= 0 || n_relations <= 0)
        throw std::invalid_argument("entity and relation counts must be positive");
    ModelParams p;
    p.kind = kind;
    p.dim = dim;
    p.reciprocal = reciprocal;
    p.simple_original = simple_original;
    p.n_entities = n_entities;
    p.n_relations = n_relations;
    if (p.complex_layout() && dim % 2 != 0)
        throw std::invalid_argument(std::string(to_string(kind)) +
                                    " uses complex pairs: dim must be even, got " +
                                    std::to_string(dim));
    for (ParamTable t : p.tables())
        p.table(t).assign(static_cast<size_t>(p.table_rows(t)) * p.table_width(t), 0.0);
    return p;
}

void init_params(ModelParams& p, uint64_t seed, double stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, stddev);
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
    for (ParamTable t : p.tables()) {
        auto& tab = p.table(t);
        if (p.kind == ModelKind::RotatE && t == ParamTable::Relation) {
            for (double& x : tab) x = phase(rng);
        } else {
            for (double& x : tab) x = gauss(rng);
        }
    }
}

namespace {

void check_ids(const ModelParams& p, int64_t s, int64_t rel_row, int64_t o) {
    if (s < 0 || s >= p.n_entities || o < 0 || o >= p.n_entities)
        throw std::out_of_range("entity id out of range: s=" + std::to_string(s) +
                                " o=" + std::to_string(o) + " |E|=" +
                                std::to_string(p.n_entities));
    if (rel_row < 0 || rel_row >= p.relation_rows())
        throw std::out_of_range("relation row out of range: " + std::to_string(rel_row) +
                                " rows=" + std::to_string(p.relation_rows()));
}

// Accumulates into an existing (table,row) entry or appends a zeroed one.
// Callers keep references across calls, so grads must be reserved large
// enough up front that push_back never reallocates.
std::vector<double>& grad_slot(std::vector<RowGrad>& grads, ParamTable t, int64_t row,
                               int width) {
    for (auto& g : grads)
        if (g.table == t && g.row == row) return g.g;
    grads.push_back(RowGrad{t, row, std::vector<double>(width, 0.0)});
    return grads.back().g;
}

}  // namespace

double score_one(const ModelParams& p, int64_t s, int64_t rel_row, int64_t o) {
    check_ids(p, s, rel_row, o);
    const int dim = p.dim;
    const int nc = dim / 2;
    switch (p.kind) {
        case ModelKind::TransE: {
            const double* es = p.entity_row(s);
            const double* r = p.relation_row(rel_row);
            const double* eo = p.entity_row(o);
            double acc = 0.0;
            for (int j = 0; j < dim; ++j) {
                double d = es[j] + r[j] - eo[j];
                acc += d * d;
            }
            return -std::sqrt(acc);
        }
        case ModelKind::RotatE: {
            const double* es = p.entity_row(s);
            const double* th = p.relation_row(rel_row);
            const double* eo = p.entity_row(o);
            double acc = 0.0;
            for (int d = 0; d < nc; ++d) {
                double c = std::cos(th[d]), sn = std::sin(th[d]);
                double sre = es[2 * d], sim = es[2 * d + 1];
                double ure = sre * c - sim * sn - eo[2 * d];
                double uim = sre * sn + sim * c - eo[2 * d + 1];
                acc += ure * ure + uim * uim;
            }
            return -std::sqrt(acc);
        }
        case ModelKind::ComplEx: {
            const double* es = p.entity_row(s);
            const double* r = p.relation_row(rel_row);
            const double* eo = p.entity_row(o);
            double acc = 0.0;
            // Re(s * r * conj(o)) per component.
            for (int d = 0; d < nc; ++d) {
                double pre = es[2 * d] * r[2 * d] - es[2 * d + 1] * r[2 * d + 1];
                double pim = es[2 * d] * r[2 * d + 1] + es[2 * d + 1] * r[2 * d];
                acc += pre * eo[2 * d] + pim * eo[2 * d + 1];
            }
            return acc;
        }
        case ModelKind::SimplE: {
            const double* hs = p.entity_row(s);
            const double* ts = p.entity_tail_row(s);
            const double* ho = p.entity_row(o);
            const double* to = p.entity_tail_row(o);
            const double* r = p.relation_row(rel_row);
            const double* ri = p.relation_inv_row(rel_row);
            double acc = 0.0;
            if (!p.simple_original) {
                // 1/2 (<h_s, r, t_o> + <t_o, r^-1, h_s>): both terms share the
                // same entity rows, so fold the relations first.
                for (int d = 0; d < nc; ++d) {
                    double are = 0.5 * (r[2 * d] + ri[2 * d]);
                    double aim = 0.5 * (r[2 * d + 1] + ri[2 * d + 1]);
                    double wre = hs[2 * d] * are - hs[2 * d + 1] * aim;
                    double wim = hs[2 * d] * aim + hs[2 * d + 1] * are;
                    acc += wre * to[2 * d] - wim * to[2 * d + 1];
                }
            } else {
                // original variant: 1/2 (<h_s, r, t_o> + <h_o, r^-1, t_s>)
                for (int d = 0; d < nc; ++d) {
                    double w1re = hs[2 * d] * r[2 * d] - hs[2 * d + 1] * r[2 * d + 1];
                    double w1im = hs[2 * d] * r[2 * d + 1] + hs[2 * d + 1] * r[2 * d];
                    double w2re = ho[2 * d] * ri[2 * d] - ho[2 * d + 1] * ri[2 * d + 1];
                    double w2im = ho[2 * d] * ri[2 * d + 1] + ho[2 * d + 1] * ri[2 * d];
                    acc += 0.5 * (w1re * to[2 * d] - w1im * to[2 * d + 1]);
                    acc += 0.5 * (w2re * ts[2 * d] - w2im * ts[2 * d + 1]);
                }
            }
            return acc;
        }
    }
    throw std::logic_error("bad model kind");
}

std::vector<RowGrad> grad_one(const ModelParams& p, int64_t s, int64_t rel_row, int64_t o,
                              double up) {
    check_ids(p, s, rel_row, o);
    const int dim = p.dim;
    const int nc = dim / 2;
    std::vector<RowGrad> grads;
    // At most 6 distinct rows are touched (both entity tables twice plus both
    // relation tables); grad_slot references stay valid only without growth.
    grads.reserve(8);
    switch (p.kind) {
        case ModelKind::TransE: {
            const double* es = p.entity_row(s);
            const double* r = p.relation_row(rel_row);
            const double* eo = p.entity_row(o);
            std::vector<double> diff(dim);
            double acc = 0.0;
            for (int j = 0; j < dim; ++j) {
                diff[j] = es[j] + r[j] - eo[j];
                acc += diff[j] * diff[j];
            }
            double norm = std::sqrt(acc);
            auto& gs = grad_slot(grads, ParamTable::Entity, s, dim);
            auto& gr = grad_slot(grads, ParamTable::Relation, rel_row, dim);
            auto& go = grad_slot(grads, ParamTable::Entity, o, dim);
            if (norm == 0.0) break;  // subgradient of the norm at 0: zero
            double coef = up / norm;
            for (int j = 0; j < dim; ++j) {
                gs[j] -= coef * diff[j];
                gr[j] -= coef * diff[j];
                go[j] += coef * diff[j];
            }
            break;
        }
        case ModelKind::RotatE: {
            const double* es = p.entity_row(s);
            const double* th = p.relation_row(rel_row);
            const double* eo = p.entity_row(o);
            std::vector<double> u(dim), sr(dim), cs(nc), sn(nc);
            double acc = 0.0;
            for (int d = 0; d < nc; ++d) {
                cs[d] = std::cos(th[d]);
                sn[d] = std::sin(th[d]);
                sr[2 * d] = es[2 * d] * cs[d] - es[2 * d + 1] * sn[d];
                sr[2 * d + 1] = es[2 * d] * sn[d] + es[2 * d + 1] * cs[d];
                u[2 * d] = sr[2 * d] - eo[2 * d];
                u[2 * d + 1] = sr[2 * d + 1] - eo[2 * d + 1];
                acc += u[2 * d] * u[2 * d] + u[2 * d + 1] * u[2 * d + 1];
            }
            double norm = std::sqrt(acc);
            auto& gs = grad_slot(grads, ParamTable::Entity, s, dim);
            auto& gth = grad_slot(grads, ParamTable::Relation, rel_row, nc);
            auto& go = grad_slot(grads, ParamTable::Entity, o, dim);
            if (norm == 0.0) break;
            double coef = up / norm;
            for (int d = 0; d < nc; ++d) {
                double ure = u[2 * d], uim = u[2 * d + 1];
                // d(-|u|)/ds = -conj(e^{i th}) u / |u|
                gs[2 * d] -= coef * (cs[d] * ure + sn[d] * uim);
                gs[2 * d + 1] -= coef * (cs[d] * uim - sn[d] * ure);
                go[2 * d] += coef * ure;
                go[2 * d + 1] += coef * uim;
                // d(-|u|)/d th = Im(conj(u) s e^{i th}) / |u|
                gth[d] += coef * (ure * sr[2 * d + 1] - uim * sr[2 * d]);
            }
            break;
        }
        case ModelKind::ComplEx: {
            const double* es = p.entity_row(s);
            const double* r = p.relation_row(rel_row);
            const double* eo = p.entity_row(o);
            auto& gs = grad_slot(grads, ParamTable::Entity, s, dim);
            auto& gr = grad_slot(grads, ParamTable::Relation, rel_row, dim);
            auto& go = grad_slot(grads, ParamTable::Entity, o, dim);
            for (int d = 0; d < nc; ++d) {
                double sre = es[2 * d], sim = es[2 * d + 1];
                double rre = r[2 * d], rim = r[2 * d + 1];
                double ore = eo[2 * d], oim = eo[2 * d + 1];
                // g_s = conj(r) o; g_r = conj(s) o; g_o = s r
                gs[2 * d] += up * (rre * ore + rim * oim);
                gs[2 * d + 1] += up * (rre * oim - rim * ore);
                gr[2 * d] += up * (sre * ore + sim * oim);
                gr[2 * d + 1] += up * (sre * oim - sim * ore);
                go[2 * d] += up * (sre * rre - sim * rim);
                go[2 * d + 1] += up * (sre * rim + sim * rre);
            }
            break;
        }
        case ModelKind::SimplE: {
            const double* r = p.relation_row(rel_row);
            const double* ri = p.relation_inv_row(rel_row);
            // Each term <a, b, c> = Re(sum a b c) contributes conj-products:
            // g_a = conj(b c), g_b = conj(a c), g_c = conj(a b), times 1/2.
            auto add_term = [&](const double* a, ParamTable ta, int64_t rowa, const double* b,
                                ParamTable tb, int64_t rowb, const double* c, ParamTable tc,
                                int64_t rowc) {
                auto& ga = grad_slot(grads, ta, rowa, dim);
                auto& gb = grad_slot(grads, tb, rowb, dim);
                auto& gc = grad_slot(grads, tc, rowc, dim);
                for (int d = 0; d < nc; ++d) {
                    double are = a[2 * d], aim = a[2 * d + 1];
                    double bre = b[2 * d], bim = b[2 * d + 1];
                    double cre = c[2 * d], cim = c[2 * d + 1];
                    double h = 0.5 * up;
                    ga[2 * d] += h * (bre * cre - bim * cim);
                    ga[2 * d + 1] -= h * (bre * cim + bim * cre);
                    gb[2 * d] += h * (are * cre - aim * cim);
                    gb[2 * d + 1] -= h * (are * cim + aim * cre);
                    gc[2 * d] += h * (are * bre - aim * bim);
                    gc[2 * d + 1] -= h * (are * bim + aim * bre);
                }
            };
            add_term(p.entity_row(s), ParamTable::Entity, s, r, ParamTable::Relation, rel_row,
                     p.entity_tail_row(o), ParamTable::EntityTail, o);
            if (!p.simple_original)
                add_term(p.entity_tail_row(o), ParamTable::EntityTail, o, ri,
                         ParamTable::RelationInv, rel_row, p.entity_row(s), ParamTable::Entity, s);
            else
                add_term(p.entity_row(o), ParamTable::Entity, o, ri, ParamTable::RelationInv,
                         rel_row, p.entity_tail_row(s), ParamTable::EntityTail, s);
            break;
        }
    }
    return grads;
}

namespace {

void check_queries(const ModelParams& p, std::span<const std::pair<int64_t, int64_t>> queries,
                   bool rel_first) {
    for (const auto& [a, b] : queries) {
        int64_t anchor = rel_first ? b : a;
        int64_t rel = rel_first ? a : b;
        if (anchor < 0 || anchor >= p.n_entities)
            throw std::out_of_range("query entity id out of range: " + std::to_string(anchor));
        if (rel < 0 || rel >= p.relation_rows())
            throw std::out_of_range("query relation row out of range: " + std::to_string(rel));
    }
}

void score_all(const ModelParams& p, kern::QuerySpan queries, bool head_dir, ScoreMatrix& out,
               int64_t chunk) {
    const int64_t ne = p.n_entities;
    out.resize(static_cast<int64_t>(queries.size()), ne);
    if (queries.empty()) return;
    if (chunk <= 0) chunk = ne;
    if (kern::is_multiplicative(p.kind)) {
        kern::MulPlan plan = kern::build_mul_plan(p, queries, head_dir);
        kern::mul_scores(p, plan, 0, ne, out);
    } else {
        kern::TransPlan plan = kern::build_trans_plan(p, queries, head_dir);
        for (int64_t c0 = 0; c0 < ne; c0 += chunk)
            kern::trans_scores(p, plan, c0, std::min(ne, c0 + chunk), out);
    }
}

}  // namespace

void score_1n_tail(const ModelParams& p, std::span<const std::pair<int64_t, int64_t>> queries,
                   ScoreMatrix& out, int64_t chunk) {
    check_queries(p, queries, /*rel_first=*/false);
    score_all(p, queries, /*head_dir=*/false, out, chunk);
}

void score_1n_head(const ModelParams& p, std::span<const std::pair<int64_t, int64_t>> queries,
                   ScoreMatrix& out, int64_t chunk) {
    check_queries(p, queries, /*rel_first=*/true);
    std::vector<kern::Query> q(queries.size());
    if (p.reciprocal) {
        // Head prediction under reciprocal augmentation is the tail query of
        // the paired relation row: row r <-> row r + |R|.
        const int64_t nr = p.n_relations;
        for (size_t i = 0; i < queries.size(); ++i) {
            int64_t rel = queries[i].first;
            int64_t inv = rel < nr ? rel + nr : rel - nr;
            q[i] = {queries[i].second, inv};
        }
        score_all(p, q, /*head_dir=*/false, out, chunk);
    } else {
        for (size_t i = 0; i < queries.size(); ++i)
            q[i] = {queries[i].second, queries[i].first};
        score_all(p, q, /*head_dir=*/true, out, chunk);
    }
}

}  // namespace kbc
