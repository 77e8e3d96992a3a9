#pragma once

// Batched 1-N scoring kernels and their backward passes. Both the public
// score_1n_* entry points and the trainer run through these; score_one stays
// an independent per-triple route so the two can be checked against each
// other.
//
// Every multiplicative query (ComplEx, SimplE) is lowered to one or two plain
// real dot products per candidate: score[b][c] = Q1[b].T1[c] (+ Q2[b].T2[c]).
// The complex algebra (conjugation, the SimplE 1/2 factor, reciprocal terms)
// is folded into the query vectors at build time.
//
// Every translation query (TransE, RotatE) is lowered to
// score[b][c] = -|| entity[c] - V[b] ||. For RotatE head queries this uses
// the unit-modulus identity ||s.r - o|| = ||s - o.conj(r)||.
//
// Parallel loops only ever split over independent output elements, so results
// do not depend on the thread count.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kbc/model.hpp"
#include "kbc/optim.hpp"

namespace kbc::kern {

// (anchor, rel_row): anchor is the subject for tail queries, the object for
// head queries.
using Query = std::pair<int64_t, int64_t>;
using QuerySpan = std::span<const Query>;

struct MulPlan {
    int64_t n_queries = 0;
    int dim = 0;
    bool dual = false;
    ParamTable cand1 = ParamTable::Entity;
    ParamTable cand2 = ParamTable::Entity;
    std::vector<double> q1;  // n_queries x dim
    std::vector<double> q2;  // n_queries x dim when dual

    const double* q1_row(int64_t b) const { return q1.data() + b * dim; }
    const double* q2_row(int64_t b) const { return q2.data() + b * dim; }
};

struct TransPlan {
    int64_t n_queries = 0;
    int dim = 0;
    std::vector<double> v;  // n_queries x dim

    const double* v_row(int64_t b) const { return v.data() + b * dim; }
};

bool is_multiplicative(ModelKind k);

MulPlan build_mul_plan(const ModelParams& p, QuerySpan queries, bool head_dir);
TransPlan build_trans_plan(const ModelParams& p, QuerySpan queries, bool head_dir);

// Scores candidates [c0, c1) into out columns; out must be n_queries x |E|.
void mul_scores(const ModelParams& p, const MulPlan& plan, int64_t c0, int64_t c1,
                ScoreMatrix& out);
void trans_scores(const ModelParams& p, const TransPlan& plan, int64_t c0, int64_t c1,
                  ScoreMatrix& out);

// Backward through the candidate side: grad rows of the candidate table(s)
// accumulate sum_b g[b][c] * d score[b][c] / d row. The kernels bulk-mark
// rows [c0, c1) themselves.
void mul_backward_candidates(const ModelParams& p, const MulPlan& plan, const ScoreMatrix& g,
                             int64_t c0, int64_t c1, GradBuffer& gb);

// Translation backward works on a materialized difference block for one
// candidate chunk: diff[(b*(c1-c0) + (c-c0))*dim + j] = entity[c][j] - v[b][j].
// The block is the only O(B*dim*chunk) intermediate; norms come from the
// forward scores. Zero-norm pairs contribute nothing (subgradient choice).
void trans_fill_diff(const ModelParams& p, const TransPlan& plan, int64_t c0, int64_t c1,
                     double* diff);
void trans_backward_candidates(const ModelParams& p, const TransPlan& plan, const ScoreMatrix& g,
                               const ScoreMatrix& scores, int64_t c0, int64_t c1,
                               const double* diff, GradBuffer& gb);

// Backward through the query side: dq/dv accumulate sum_{c in [c0,c1)}
// g[b][c] * d score[b][c] / d q. dq1/dq2/dv are n_queries x dim, caller
// zeroed before the first chunk.
void mul_backward_queries(const ModelParams& p, const MulPlan& plan, const ScoreMatrix& g,
                          int64_t c0, int64_t c1, double* dq1, double* dq2);
void trans_backward_queries(const ModelParams& p, const TransPlan& plan, const ScoreMatrix& g,
                            const ScoreMatrix& scores, int64_t c0, int64_t c1, const double* diff,
                            double* dv);

// Routes accumulated dq/dv into the anchor entity row and relation row(s) of
// each query. Serial scatter; call once after all candidate chunks.
void mul_chain_queries(const ModelParams& p, QuerySpan queries, bool head_dir,
                       const MulPlan& plan, const double* dq1, const double* dq2, GradBuffer& gb);
void trans_chain_queries(const ModelParams& p, QuerySpan queries, bool head_dir,
                         const TransPlan& plan, const double* dv, GradBuffer& gb);

// Single-candidate helpers for the sampled-softmax path.
double mul_score_candidate(const ModelParams& p, const MulPlan& plan, int64_t b, int64_t cand);
double trans_score_candidate(const ModelParams& p, const TransPlan& plan, int64_t b, int64_t cand);
// Accumulates the candidate-row gradient for weight g and adds the query-side
// contribution into dq1/dq2/dv (width dim).
void mul_backward_candidate_one(const ModelParams& p, const MulPlan& plan, int64_t b, int64_t cand,
                                double g, GradBuffer& gb, double* dq1, double* dq2);
void trans_backward_candidate_one(const ModelParams& p, const TransPlan& plan, int64_t b,
                                  int64_t cand, double g, double score, GradBuffer& gb,
                                  double* dv);

}  // namespace kbc::kern
