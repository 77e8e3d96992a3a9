#include "kernels.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kbc::kern {

bool is_multiplicative(ModelKind k) {
    return k == ModelKind::ComplEx || k == ModelKind::SimplE;
}

MulPlan build_mul_plan(const ModelParams& p, QuerySpan queries, bool head_dir) {
    MulPlan plan;
    plan.n_queries = static_cast<int64_t>(queries.size());
    plan.dim = p.dim;
    const int nc = p.dim / 2;
    const int64_t B = plan.n_queries;
    plan.q1.assign(static_cast<size_t>(B) * p.dim, 0.0);

    if (p.kind == ModelKind::ComplEx) {
        plan.cand1 = ParamTable::Entity;
        for (int64_t b = 0; b < B; ++b) {
            const auto [anchor, rel] = queries[b];
            const double* e = p.entity_row(anchor);
            const double* r = p.relation_row(rel);
            double* q = plan.q1.data() + b * p.dim;
            if (!head_dir) {
                // score(o) = Re(s r conj(o)) = Re(s r) o_re + Im(s r) o_im
                for (int d = 0; d < nc; ++d) {
                    q[2 * d] = e[2 * d] * r[2 * d] - e[2 * d + 1] * r[2 * d + 1];
                    q[2 * d + 1] = e[2 * d] * r[2 * d + 1] + e[2 * d + 1] * r[2 * d];
                }
            } else {
                // score(s) = Re(s w), w = r conj(o): q = (Re w, -Im w)
                for (int d = 0; d < nc; ++d) {
                    double wre = r[2 * d] * e[2 * d] + r[2 * d + 1] * e[2 * d + 1];
                    double wim = r[2 * d + 1] * e[2 * d] - r[2 * d] * e[2 * d + 1];
                    q[2 * d] = wre;
                    q[2 * d + 1] = -wim;
                }
            }
        }
        return plan;
    }

    if (p.kind != ModelKind::SimplE) throw std::logic_error("mul plan on translation kind");

    if (!p.simple_original) {
        // score = Re(h_s a t_o), a = (r + r_inv)/2. Tail candidates live in
        // the tail table, head candidates in the head table; either way the
        // score is Re(w t) resp. Re(h w), i.e. q = (Re w, -Im w).
        plan.cand1 = head_dir ? ParamTable::Entity : ParamTable::EntityTail;
        for (int64_t b = 0; b < B; ++b) {
            const auto [anchor, rel] = queries[b];
            const double* e = head_dir ? p.entity_tail_row(anchor) : p.entity_row(anchor);
            const double* r = p.relation_row(rel);
            const double* ri = p.relation_inv_row(rel);
            double* q = plan.q1.data() + b * p.dim;
            for (int d = 0; d < nc; ++d) {
                double are = 0.5 * (r[2 * d] + ri[2 * d]);
                double aim = 0.5 * (r[2 * d + 1] + ri[2 * d + 1]);
                double wre = e[2 * d] * are - e[2 * d + 1] * aim;
                double wim = e[2 * d] * aim + e[2 * d + 1] * are;
                q[2 * d] = wre;
                q[2 * d + 1] = -wim;
            }
        }
        return plan;
    }

    // Original-variant SimplE: two independent terms against two tables.
    plan.dual = true;
    plan.q2.assign(static_cast<size_t>(B) * p.dim, 0.0);
    if (!head_dir) {
        plan.cand1 = ParamTable::EntityTail;  // 1/2 <h_s, r, t_c>
        plan.cand2 = ParamTable::Entity;      // 1/2 <h_c, r_inv, t_s>
    } else {
        plan.cand1 = ParamTable::Entity;      // 1/2 <h_c, r, t_o>
        plan.cand2 = ParamTable::EntityTail;  // 1/2 <h_o, r_inv, t_c>
    }
    for (int64_t b = 0; b < B; ++b) {
        const auto [anchor, rel] = queries[b];
        const double* h = p.entity_row(anchor);
        const double* t = p.entity_tail_row(anchor);
        const double* r = p.relation_row(rel);
        const double* ri = p.relation_inv_row(rel);
        double* q1 = plan.q1.data() + b * p.dim;
        double* q2 = plan.q2.data() + b * p.dim;
        for (int d = 0; d < nc; ++d) {
            double w1re, w1im, w2re, w2im;
            if (!head_dir) {
                // w1 = h_s r / 2 against t_c; w2 = r_inv t_s / 2 against h_c
                w1re = 0.5 * (h[2 * d] * r[2 * d] - h[2 * d + 1] * r[2 * d + 1]);
                w1im = 0.5 * (h[2 * d] * r[2 * d + 1] + h[2 * d + 1] * r[2 * d]);
                w2re = 0.5 * (ri[2 * d] * t[2 * d] - ri[2 * d + 1] * t[2 * d + 1]);
                w2im = 0.5 * (ri[2 * d] * t[2 * d + 1] + ri[2 * d + 1] * t[2 * d]);
            } else {
                // w1 = r t_o / 2 against h_c; w2 = h_o r_inv / 2 against t_c
                w1re = 0.5 * (r[2 * d] * t[2 * d] - r[2 * d + 1] * t[2 * d + 1]);
                w1im = 0.5 * (r[2 * d] * t[2 * d + 1] + r[2 * d + 1] * t[2 * d]);
                w2re = 0.5 * (h[2 * d] * ri[2 * d] - h[2 * d + 1] * ri[2 * d + 1]);
                w2im = 0.5 * (h[2 * d] * ri[2 * d + 1] + h[2 * d + 1] * ri[2 * d]);
            }
            q1[2 * d] = w1re;
            q1[2 * d + 1] = -w1im;
            q2[2 * d] = w2re;
            q2[2 * d + 1] = -w2im;
        }
    }
    return plan;
}

TransPlan build_trans_plan(const ModelParams& p, QuerySpan queries, bool head_dir) {
    TransPlan plan;
    plan.n_queries = static_cast<int64_t>(queries.size());
    plan.dim = p.dim;
    const int64_t B = plan.n_queries;
    const int nc = p.dim / 2;
    plan.v.assign(static_cast<size_t>(B) * p.dim, 0.0);
    for (int64_t b = 0; b < B; ++b) {
        const auto [anchor, rel] = queries[b];
        const double* e = p.entity_row(anchor);
        double* v = plan.v.data() + b * p.dim;
        if (p.kind == ModelKind::TransE) {
            const double* r = p.relation_row(rel);
            // tail: -||o - (s + r)||; head: -||s - (o - r)||
            for (int j = 0; j < p.dim; ++j) v[j] = head_dir ? e[j] - r[j] : e[j] + r[j];
        } else {
            const double* th = p.relation_row(rel);
            // tail: v = s e^{i th}; head: v = o e^{-i th} (unit modulus lets
            // the rotation move onto the non-candidate side).
            for (int d = 0; d < nc; ++d) {
                double c = std::cos(th[d]), sn = std::sin(th[d]);
                if (head_dir) sn = -sn;
                v[2 * d] = e[2 * d] * c - e[2 * d + 1] * sn;
                v[2 * d + 1] = e[2 * d] * sn + e[2 * d + 1] * c;
            }
        }
    }
    return plan;
}

void mul_scores(const ModelParams& p, const MulPlan& plan, int64_t c0, int64_t c1,
                ScoreMatrix& out) {
    const int dim = plan.dim;
    const double* t1 = p.table(plan.cand1).data();
    const double* t2 = plan.dual ? p.table(plan.cand2).data() : nullptr;
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        const double* q1 = plan.q1_row(b);
        const double* q2 = plan.dual ? plan.q2_row(b) : nullptr;
        double* orow = out.row(b);
        for (int64_t c = c0; c < c1; ++c) {
            const double* r1 = t1 + c * dim;
            double acc = 0.0;
            for (int j = 0; j < dim; ++j) acc += q1[j] * r1[j];
            if (plan.dual) {
                const double* r2 = t2 + c * dim;
                for (int j = 0; j < dim; ++j) acc += q2[j] * r2[j];
            }
            orow[c] = acc;
        }
    }
}

void trans_scores(const ModelParams& p, const TransPlan& plan, int64_t c0, int64_t c1,
                  ScoreMatrix& out) {
    const int dim = plan.dim;
    const double* ent = p.entity.data();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        const double* v = plan.v_row(b);
        double* orow = out.row(b);
        for (int64_t c = c0; c < c1; ++c) {
            const double* e = ent + c * dim;
            double acc = 0.0;
            for (int j = 0; j < dim; ++j) {
                double d = e[j] - v[j];
                acc += d * d;
            }
            orow[c] = -std::sqrt(acc);
        }
    }
}

void mul_backward_candidates(const ModelParams& p, const MulPlan& plan, const ScoreMatrix& g,
                             int64_t c0, int64_t c1, GradBuffer& gb) {
    const int dim = plan.dim;
    gb.mark_rows(plan.cand1, c0, c1);
    if (plan.dual) gb.mark_rows(plan.cand2, c0, c1);
    double* g1 = gb.data(plan.cand1);
    double* g2 = plan.dual ? gb.data(plan.cand2) : nullptr;
    (void)p;
#pragma omp parallel for schedule(static)
    for (int64_t c = c0; c < c1; ++c) {
        double* gr1 = g1 + c * dim;
        double* gr2 = plan.dual ? g2 + c * dim : nullptr;
        for (int64_t b = 0; b < plan.n_queries; ++b) {
            const double w = g.row(b)[c];
            const double* q1 = plan.q1_row(b);
            for (int j = 0; j < dim; ++j) gr1[j] += w * q1[j];
            if (plan.dual) {
                const double* q2 = plan.q2_row(b);
                for (int j = 0; j < dim; ++j) gr2[j] += w * q2[j];
            }
        }
    }
}

void trans_fill_diff(const ModelParams& p, const TransPlan& plan, int64_t c0, int64_t c1,
                     double* diff) {
    const int dim = plan.dim;
    const int64_t cc = c1 - c0;
    const double* ent = p.entity.data();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        const double* v = plan.v_row(b);
        double* drow = diff + b * cc * dim;
        for (int64_t c = c0; c < c1; ++c) {
            const double* e = ent + c * dim;
            double* d = drow + (c - c0) * dim;
            for (int j = 0; j < dim; ++j) d[j] = e[j] - v[j];
        }
    }
}

void trans_backward_candidates(const ModelParams& p, const TransPlan& plan, const ScoreMatrix& g,
                               const ScoreMatrix& scores, int64_t c0, int64_t c1,
                               const double* diff, GradBuffer& gb) {
    const int dim = plan.dim;
    const int64_t cc = c1 - c0;
    gb.mark_rows(ParamTable::Entity, c0, c1);
    double* ge = gb.data(ParamTable::Entity);
    (void)p;
#pragma omp parallel for schedule(static)
    for (int64_t c = c0; c < c1; ++c) {
        double* gr = ge + c * dim;
        for (int64_t b = 0; b < plan.n_queries; ++b) {
            const double norm = -scores.row(b)[c];
            if (norm == 0.0) continue;
            const double coef = g.row(b)[c] / norm;
            const double* d = diff + (b * cc + (c - c0)) * dim;
            // d score / d e_c = -(e_c - v)/||.||
            for (int j = 0; j < dim; ++j) gr[j] -= coef * d[j];
        }
    }
}

void mul_backward_queries(const ModelParams& p, const MulPlan& plan, const ScoreMatrix& g,
                          int64_t c0, int64_t c1, double* dq1, double* dq2) {
    const int dim = plan.dim;
    const double* t1 = p.table(plan.cand1).data();
    const double* t2 = plan.dual ? p.table(plan.cand2).data() : nullptr;
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        double* a1 = dq1 + b * dim;
        double* a2 = plan.dual ? dq2 + b * dim : nullptr;
        const double* grow = g.row(b);
        for (int64_t c = c0; c < c1; ++c) {
            const double w = grow[c];
            const double* r1 = t1 + c * dim;
            for (int j = 0; j < dim; ++j) a1[j] += w * r1[j];
            if (plan.dual) {
                const double* r2 = t2 + c * dim;
                for (int j = 0; j < dim; ++j) a2[j] += w * r2[j];
            }
        }
    }
}

void trans_backward_queries(const ModelParams& p, const TransPlan& plan, const ScoreMatrix& g,
                            const ScoreMatrix& scores, int64_t c0, int64_t c1, const double* diff,
                            double* dv) {
    const int dim = plan.dim;
    const int64_t cc = c1 - c0;
    (void)p;
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        double* a = dv + b * dim;
        const double* grow = g.row(b);
        const double* srow = scores.row(b);
        for (int64_t c = c0; c < c1; ++c) {
            const double norm = -srow[c];
            if (norm == 0.0) continue;
            const double coef = grow[c] / norm;
            const double* d = diff + (b * cc + (c - c0)) * dim;
            // d score / d v = +(e_c - v)/||.||
            for (int j = 0; j < dim; ++j) a[j] += coef * d[j];
        }
    }
}

namespace {

// g_dst += conj(x) * gw, one complex component.
inline void add_conj_prod(double* dst, int d, double xre, double xim, double gwre, double gwim) {
    dst[2 * d] += xre * gwre + xim * gwim;
    dst[2 * d + 1] += xre * gwim - xim * gwre;
}

// g_dst += x * gw, one complex component.
inline void add_prod(double* dst, int d, double xre, double xim, double gwre, double gwim) {
    dst[2 * d] += xre * gwre - xim * gwim;
    dst[2 * d + 1] += xre * gwim + xim * gwre;
}

}  // namespace

void mul_chain_queries(const ModelParams& p, QuerySpan queries, bool head_dir,
                       const MulPlan& plan, const double* dq1, const double* dq2, GradBuffer& gb) {
    const int dim = plan.dim;
    const int nc = dim / 2;
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        const auto [anchor, rel] = queries[b];
        const double* d1 = dq1 + b * dim;
        if (p.kind == ModelKind::ComplEx) {
            const double* e = p.entity_row(anchor);
            const double* r = p.relation_row(rel);
            double* ganc = gb.row(ParamTable::Entity, anchor);
            double* grel = gb.row(ParamTable::Relation, rel);
            if (!head_dir) {
                // w = s r stored as (Re w, Im w): gw = dq as complex.
                for (int d = 0; d < nc; ++d) {
                    double gwre = d1[2 * d], gwim = d1[2 * d + 1];
                    add_conj_prod(ganc, d, r[2 * d], r[2 * d + 1], gwre, gwim);  // conj(r) gw
                    add_conj_prod(grel, d, e[2 * d], e[2 * d + 1], gwre, gwim);  // conj(s) gw
                }
            } else {
                // q = (Re w, -Im w), w = r conj(o): g_r = o gw, g_o = conj(gw) r.
                for (int d = 0; d < nc; ++d) {
                    double gwre = d1[2 * d], gwim = -d1[2 * d + 1];
                    add_prod(grel, d, e[2 * d], e[2 * d + 1], gwre, gwim);
                    add_conj_prod(ganc, d, gwre, gwim, r[2 * d], r[2 * d + 1]);
                }
            }
            continue;
        }
        // SimplE
        const double* r = p.relation_row(rel);
        const double* ri = p.relation_inv_row(rel);
        double* grel = gb.row(ParamTable::Relation, rel);
        double* grinv = gb.row(ParamTable::RelationInv, rel);
        if (!p.simple_original) {
            const double* e = head_dir ? p.entity_tail_row(anchor) : p.entity_row(anchor);
            double* ganc = gb.row(head_dir ? ParamTable::EntityTail : ParamTable::Entity, anchor);
            // q = (Re w, -Im w), w = e a with a = (r + r_inv)/2:
            // g_e = conj(a) gw; g_a = conj(e) gw, split half/half over r, r_inv.
            for (int d = 0; d < nc; ++d) {
                double gwre = d1[2 * d], gwim = -d1[2 * d + 1];
                double are = 0.5 * (r[2 * d] + ri[2 * d]);
                double aim = 0.5 * (r[2 * d + 1] + ri[2 * d + 1]);
                add_conj_prod(ganc, d, are, aim, gwre, gwim);
                double gare = 0.5 * (e[2 * d] * gwre + e[2 * d + 1] * gwim);
                double gaim = 0.5 * (e[2 * d] * gwim - e[2 * d + 1] * gwre);
                grel[2 * d] += gare;
                grel[2 * d + 1] += gaim;
                grinv[2 * d] += gare;
                grinv[2 * d + 1] += gaim;
            }
        } else {
            const double* d2 = dq2 + b * dim;
            const double* h = p.entity_row(anchor);
            const double* t = p.entity_tail_row(anchor);
            double* gh = gb.row(ParamTable::Entity, anchor);
            double* gt = gb.row(ParamTable::EntityTail, anchor);
            for (int d = 0; d < nc; ++d) {
                double gw1re = d1[2 * d], gw1im = -d1[2 * d + 1];
                double gw2re = d2[2 * d], gw2im = -d2[2 * d + 1];
                if (!head_dir) {
                    // w1 = h_s r / 2; w2 = r_inv t_s / 2
                    add_conj_prod(gh, d, 0.5 * r[2 * d], 0.5 * r[2 * d + 1], gw1re, gw1im);
                    add_conj_prod(grel, d, 0.5 * h[2 * d], 0.5 * h[2 * d + 1], gw1re, gw1im);
                    add_conj_prod(grinv, d, 0.5 * t[2 * d], 0.5 * t[2 * d + 1], gw2re, gw2im);
                    add_conj_prod(gt, d, 0.5 * ri[2 * d], 0.5 * ri[2 * d + 1], gw2re, gw2im);
                } else {
                    // w1 = r t_o / 2; w2 = h_o r_inv / 2
                    add_conj_prod(grel, d, 0.5 * t[2 * d], 0.5 * t[2 * d + 1], gw1re, gw1im);
                    add_conj_prod(gt, d, 0.5 * r[2 * d], 0.5 * r[2 * d + 1], gw1re, gw1im);
                    add_conj_prod(gh, d, 0.5 * ri[2 * d], 0.5 * ri[2 * d + 1], gw2re, gw2im);
                    add_conj_prod(grinv, d, 0.5 * h[2 * d], 0.5 * h[2 * d + 1], gw2re, gw2im);
                }
            }
        }
    }
}

void trans_chain_queries(const ModelParams& p, QuerySpan queries, bool head_dir,
                         const TransPlan& plan, const double* dv, GradBuffer& gb) {
    const int dim = plan.dim;
    const int nc = dim / 2;
    for (int64_t b = 0; b < plan.n_queries; ++b) {
        const auto [anchor, rel] = queries[b];
        const double* gv = dv + b * dim;
        double* ganc = gb.row(ParamTable::Entity, anchor);
        double* grel = gb.row(ParamTable::Relation, rel);
        if (p.kind == ModelKind::TransE) {
            // tail: v = s + r; head: v = o - r
            for (int j = 0; j < dim; ++j) {
                ganc[j] += gv[j];
                grel[j] += head_dir ? -gv[j] : gv[j];
            }
        } else {
            const double* th = p.relation_row(rel);
            const double* v = plan.v_row(b);
            for (int d = 0; d < nc; ++d) {
                double c = std::cos(th[d]), sn = std::sin(th[d]);
                double gvre = gv[2 * d], gvim = gv[2 * d + 1];
                double vre = v[2 * d], vim = v[2 * d + 1];
                // Im(conj(gv) v)
                double cross = gvre * vim - gvim * vre;
                if (!head_dir) {
                    // v = s e^{i th}: g_s = conj(e^{i th}) gv; g_th = -Im(conj(gv) v)
                    add_conj_prod(ganc, d, c, sn, gvre, gvim);
                    grel[d] -= cross;
                } else {
                    // v = o e^{-i th}: g_o = e^{i th} gv; g_th = +Im(conj(gv) v)
                    add_prod(ganc, d, c, sn, gvre, gvim);
                    grel[d] += cross;
                }
            }
        }
    }
}

double mul_score_candidate(const ModelParams& p, const MulPlan& plan, int64_t b, int64_t cand) {
    const int dim = plan.dim;
    const double* q1 = plan.q1_row(b);
    const double* r1 = p.table(plan.cand1).data() + cand * dim;
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += q1[j] * r1[j];
    if (plan.dual) {
        const double* q2 = plan.q2_row(b);
        const double* r2 = p.table(plan.cand2).data() + cand * dim;
        for (int j = 0; j < dim; ++j) acc += q2[j] * r2[j];
    }
    return acc;
}

double trans_score_candidate(const ModelParams& p, const TransPlan& plan, int64_t b,
                             int64_t cand) {
    const int dim = plan.dim;
    const double* v = plan.v_row(b);
    const double* e = p.entity_row(cand);
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) {
        double d = e[j] - v[j];
        acc += d * d;
    }
    return -std::sqrt(acc);
}

void mul_backward_candidate_one(const ModelParams& p, const MulPlan& plan, int64_t b,
                                int64_t cand, double g, GradBuffer& gb, double* dq1,
                                double* dq2) {
    const int dim = plan.dim;
    const double* q1 = plan.q1_row(b);
    const double* r1 = p.table(plan.cand1).data() + cand * dim;
    double* g1 = gb.row(plan.cand1, cand);
    for (int j = 0; j < dim; ++j) {
        g1[j] += g * q1[j];
        dq1[j] += g * r1[j];
    }
    if (plan.dual) {
        const double* q2 = plan.q2_row(b);
        const double* r2 = p.table(plan.cand2).data() + cand * dim;
        double* g2 = gb.row(plan.cand2, cand);
        for (int j = 0; j < dim; ++j) {
            g2[j] += g * q2[j];
            dq2[j] += g * r2[j];
        }
    }
}

void trans_backward_candidate_one(const ModelParams& p, const TransPlan& plan, int64_t b,
                                  int64_t cand, double g, double score, GradBuffer& gb,
                                  double* dv) {
    const double norm = -score;
    if (norm == 0.0) return;
    const int dim = plan.dim;
    const double coef = g / norm;
    const double* v = plan.v_row(b);
    const double* e = p.entity_row(cand);
    double* ge = gb.row(ParamTable::Entity, cand);
    for (int j = 0; j < dim; ++j) {
        double d = e[j] - v[j];
        ge[j] -= coef * d;
        dv[j] += coef * d;
    }
}

}  // namespace kbc::kern
