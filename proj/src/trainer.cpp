#include "kbc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "kbc/loss.hpp"
#include "kernels.hpp"

namespace kbc {

NegativeRegime NegativeRegime::sampled(int64_t k, bool distinct) {
    NegativeRegime r;
    r.mode = NegMode::Sampled;
    r.k = k;
    r.distinct = distinct;
    return r;
}

NegativeRegime NegativeRegime::all_1n() {
    NegativeRegime r;
    r.mode = NegMode::AllOneN;
    return r;
}

NegativeRegime NegativeRegime::all_accum(int64_t m, AccumAxis axis) {
    NegativeRegime r;
    r.mode = NegMode::AllAccum;
    r.micro_batch = m;
    r.axis = axis;
    return r;
}

void TrainConfig::validate() const {
    if (learning_rate < 0 || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning_rate must be finite and >= 0");
    if (reg_coeff < 0 || !std::isfinite(reg_coeff))
        throw std::invalid_argument("reg_coeff must be finite and >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (candidate_chunk < 1) throw std::invalid_argument("candidate_chunk must be >= 1");
    if (init_std <= 0) throw std::invalid_argument("init_std must be > 0");
    if (adagrad_eps <= 0) throw std::invalid_argument("adagrad_eps must be > 0");
    if (regime.mode == NegMode::Sampled && regime.k < 1)
        throw std::invalid_argument("sampled regime needs k >= 1");
    if (regime.mode == NegMode::AllAccum && regime.micro_batch < 1)
        throw std::invalid_argument("accumulation needs micro_batch >= 1");
}

TrainDiverged::TrainDiverged(double loss_value, int64_t at_epoch)
    : std::runtime_error("training diverged: non-finite loss" +
                         (at_epoch >= 0 ? " at epoch " + std::to_string(at_epoch) : "")),
      loss(loss_value),
      epoch(at_epoch) {}

namespace {

struct QueryGroup {
    bool head_dir = false;
    int64_t offset = 0;  // global query index of this group's first query
    std::vector<kern::Query> queries;
    std::vector<int64_t> gold;
};

struct BatchCtx {
    explicit BatchCtx(const ModelParams& p) : gb(p) {}
    GradBuffer gb;
    ScoreMatrix scores;
    ScoreMatrix grad_scores;
    std::vector<double> dq1, dq2, dv, diff;
    std::vector<double> row_loss;  // per global query, raw cross-entropy
    std::vector<int64_t> negs;
    std::vector<uint8_t> neg_mark;
    std::vector<QueryGroup> groups;
    std::vector<Triple> batch_buf;
    std::vector<std::pair<ParamTable, int64_t>> reg_rows;
    kern::MulPlan mblock;
    kern::TransPlan tblock;
};

// Per-query-row views of a plan. Plans are built per query, so a sliced copy
// is bitwise identical to building the plan on the sub-span.
void slice_mul_plan(const kern::MulPlan& full, int64_t b0, int64_t b1, kern::MulPlan& out) {
    out.n_queries = b1 - b0;
    out.dim = full.dim;
    out.dual = full.dual;
    out.cand1 = full.cand1;
    out.cand2 = full.cand2;
    out.q1.assign(full.q1.begin() + b0 * full.dim, full.q1.begin() + b1 * full.dim);
    if (full.dual)
        out.q2.assign(full.q2.begin() + b0 * full.dim, full.q2.begin() + b1 * full.dim);
    else
        out.q2.clear();
}

void slice_trans_plan(const kern::TransPlan& full, int64_t b0, int64_t b1,
                      kern::TransPlan& out) {
    out.n_queries = b1 - b0;
    out.dim = full.dim;
    out.v.assign(full.v.begin() + b0 * full.dim, full.v.begin() + b1 * full.dim);
}

// A distinct draw that exhausts all non-gold entities is exactly the full
// softmax; route it through the dense path so the equality is bit-exact.
NegativeRegime effective_regime(const NegativeRegime& r, int64_t n_entities) {
    if (r.mode == NegMode::Sampled && r.distinct && r.k >= n_entities - 1)
        return NegativeRegime::all_1n();
    return r;
}

void build_groups(const ModelParams& p, std::span<const Triple> batch,
                  std::vector<QueryGroup>& groups) {
    groups.clear();
    groups.emplace_back();
    QueryGroup& tail = groups.back();
    tail.head_dir = false;
    tail.offset = 0;
    tail.queries.reserve(batch.size() * (p.reciprocal ? 2 : 1));
    tail.gold.reserve(tail.queries.capacity());
    for (const Triple& t : batch) {
        tail.queries.push_back({t.s, t.r});
        tail.gold.push_back(t.o);
    }
    if (p.reciprocal) {
        for (const Triple& t : batch) {
            tail.queries.push_back({t.o, t.r + p.n_relations});
            tail.gold.push_back(t.s);
        }
    } else {
        groups.emplace_back();
        QueryGroup& head = groups.back();
        head.head_dir = true;
        head.offset = static_cast<int64_t>(batch.size());
        head.queries.reserve(batch.size());
        head.gold.reserve(batch.size());
        for (const Triple& t : batch) {
            head.queries.push_back({t.o, t.r});
            head.gold.push_back(t.s);
        }
    }
}

// Forward + softmax + backward for one query group against all entities.
// Query rows run in blocks of row_chunk (bounding the live score matrix) and
// candidates in chunks of cand_chunk, but every partial sum is carried in a
// fixed element order and the query-side chain runs once at the end, so the
// accumulated gradient is bit-identical for every chunk and block size.
void process_all_entities(const ModelParams& p, const QueryGroup& g, double inv_q,
                          int64_t cand_chunk, int64_t row_chunk, BatchCtx& ctx,
                          double* row_loss_out) {
    const int64_t nq = static_cast<int64_t>(g.queries.size());
    const int64_t ne = p.n_entities;
    const int dim = p.dim;
    if (nq == 0) return;
    cand_chunk = std::clamp<int64_t>(cand_chunk, 1, ne);
    row_chunk = std::clamp<int64_t>(row_chunk, 1, nq);

    const bool mult = kern::is_multiplicative(p.kind);
    kern::MulPlan mplan;
    kern::TransPlan tplan;
    if (mult) {
        mplan = kern::build_mul_plan(p, g.queries, g.head_dir);
        ctx.dq1.assign(static_cast<size_t>(nq) * dim, 0.0);
        if (mplan.dual) ctx.dq2.assign(static_cast<size_t>(nq) * dim, 0.0);
    } else {
        tplan = kern::build_trans_plan(p, g.queries, g.head_dir);
        ctx.dv.assign(static_cast<size_t>(nq) * dim, 0.0);
    }

    for (int64_t b0 = 0; b0 < nq; b0 += row_chunk) {
        const int64_t b1 = std::min(nq, b0 + row_chunk);
        const int64_t bn = b1 - b0;
        if (mult)
            slice_mul_plan(mplan, b0, b1, ctx.mblock);
        else
            slice_trans_plan(tplan, b0, b1, ctx.tblock);

        ctx.scores.resize(bn, ne);
        if (mult) {
            kern::mul_scores(p, ctx.mblock, 0, ne, ctx.scores);
        } else {
            for (int64_t c0 = 0; c0 < ne; c0 += cand_chunk)
                kern::trans_scores(p, ctx.tblock, c0, std::min(ne, c0 + cand_chunk),
                                   ctx.scores);
        }

        ctx.grad_scores.resize(bn, ne);
#pragma omp parallel for schedule(static)
        for (int64_t b = 0; b < bn; ++b) {
            std::span<const double> srow(ctx.scores.row(b), static_cast<size_t>(ne));
            std::span<double> drow(ctx.grad_scores.row(b), static_cast<size_t>(ne));
            row_loss_out[b0 + b] = loss_full_softmax(srow, g.gold[b0 + b], drow);
            for (int64_t c = 0; c < ne; ++c) drow[c] *= inv_q;
        }

        if (mult) {
            for (int64_t c0 = 0; c0 < ne; c0 += cand_chunk) {
                const int64_t c1 = std::min(ne, c0 + cand_chunk);
                kern::mul_backward_candidates(p, ctx.mblock, ctx.grad_scores, c0, c1, ctx.gb);
                kern::mul_backward_queries(p, ctx.mblock, ctx.grad_scores, c0, c1,
                                           ctx.dq1.data() + b0 * dim,
                                           mplan.dual ? ctx.dq2.data() + b0 * dim : nullptr);
            }
        } else {
            ctx.diff.resize(static_cast<size_t>(bn) * cand_chunk * dim);
            for (int64_t c0 = 0; c0 < ne; c0 += cand_chunk) {
                const int64_t c1 = std::min(ne, c0 + cand_chunk);
                kern::trans_fill_diff(p, ctx.tblock, c0, c1, ctx.diff.data());
                kern::trans_backward_candidates(p, ctx.tblock, ctx.grad_scores, ctx.scores, c0,
                                                c1, ctx.diff.data(), ctx.gb);
                kern::trans_backward_queries(p, ctx.tblock, ctx.grad_scores, ctx.scores, c0, c1,
                                             ctx.diff.data(), ctx.dv.data() + b0 * dim);
            }
        }
    }

    if (mult)
        kern::mul_chain_queries(p, g.queries, g.head_dir, mplan, ctx.dq1.data(),
                                mplan.dual ? ctx.dq2.data() : nullptr, ctx.gb);
    else
        kern::trans_chain_queries(p, g.queries, g.head_dir, tplan, ctx.dv.data(), ctx.gb);
}

void draw_negatives(int64_t n_entities, int64_t k, bool distinct, int64_t gold,
                    std::mt19937_64& rng, std::vector<uint8_t>& mark, int64_t* out) {
    std::uniform_int_distribution<int64_t> dist(0, n_entities - 1);
    if (!distinct) {
        for (int64_t i = 0; i < k; ++i) out[i] = dist(rng);
        return;
    }
    mark[gold] = 1;
    for (int64_t i = 0; i < k; ++i) {
        int64_t id;
        do {
            id = dist(rng);
        } while (mark[id]);
        mark[id] = 1;
        out[i] = id;
    }
    mark[gold] = 0;
    for (int64_t i = 0; i < k; ++i) mark[out[i]] = 0;
}

void process_sampled(const ModelParams& p, const QueryGroup& g, int64_t k, bool distinct,
                     double inv_q, std::mt19937_64& rng, BatchCtx& ctx, double* row_loss_out) {
    const int64_t nq = static_cast<int64_t>(g.queries.size());
    const int64_t ne = p.n_entities;
    const int dim = p.dim;
    if (nq == 0) return;
    const int64_t keff = distinct ? std::min(k, ne - 1) : k;
    const int64_t cols = keff + 1;

    // Serial draw in query order keeps the stream independent of threading.
    ctx.negs.resize(static_cast<size_t>(nq) * keff);
    if (distinct && static_cast<int64_t>(ctx.neg_mark.size()) < ne) ctx.neg_mark.assign(ne, 0);
    for (int64_t b = 0; b < nq; ++b)
        draw_negatives(ne, keff, distinct, g.gold[b], rng, ctx.neg_mark,
                       ctx.negs.data() + b * keff);

    const bool mult = kern::is_multiplicative(p.kind);
    kern::MulPlan mplan;
    kern::TransPlan tplan;
    if (mult)
        mplan = kern::build_mul_plan(p, g.queries, g.head_dir);
    else
        tplan = kern::build_trans_plan(p, g.queries, g.head_dir);

    ctx.scores.resize(nq, cols);
    ctx.grad_scores.resize(nq, cols);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < nq; ++b) {
        double* srow = ctx.scores.row(b);
        for (int64_t c = 0; c < cols; ++c) {
            const int64_t cand = c == 0 ? g.gold[b] : ctx.negs[b * keff + (c - 1)];
            srow[c] = mult ? kern::mul_score_candidate(p, mplan, b, cand)
                           : kern::trans_score_candidate(p, tplan, b, cand);
        }
        std::span<const double> srow_s(srow, static_cast<size_t>(cols));
        std::span<double> drow(ctx.grad_scores.row(b), static_cast<size_t>(cols));
        row_loss_out[b] = loss_sampled(srow_s, drow);
        for (int64_t c = 0; c < cols; ++c) drow[c] *= inv_q;
    }

    ctx.dq1.assign(static_cast<size_t>(nq) * dim, 0.0);
    if (mult && mplan.dual) ctx.dq2.assign(static_cast<size_t>(nq) * dim, 0.0);
    if (!mult) ctx.dv.assign(static_cast<size_t>(nq) * dim, 0.0);
    for (int64_t b = 0; b < nq; ++b) {
        for (int64_t c = 0; c < cols; ++c) {
            const int64_t cand = c == 0 ? g.gold[b] : ctx.negs[b * keff + (c - 1)];
            const double w = ctx.grad_scores.row(b)[c];
            if (mult)
                kern::mul_backward_candidate_one(p, mplan, b, cand, w, ctx.gb,
                                                 ctx.dq1.data() + b * dim,
                                                 mplan.dual ? ctx.dq2.data() + b * dim : nullptr);
            else
                kern::trans_backward_candidate_one(p, tplan, b, cand, w, ctx.scores.row(b)[c],
                                                   ctx.gb, ctx.dv.data() + b * dim);
        }
    }
    if (mult)
        kern::mul_chain_queries(p, g.queries, g.head_dir, mplan, ctx.dq1.data(),
                                mplan.dual ? ctx.dq2.data() : nullptr, ctx.gb);
    else
        kern::trans_chain_queries(p, g.queries, g.head_dir, tplan, ctx.dv.data(), ctx.gb);
}

void rows_for_positive(const ModelParams& p, int64_t s, int64_t rel, int64_t o,
                       std::vector<std::pair<ParamTable, int64_t>>& rows) {
    rows.push_back({ParamTable::Entity, s});
    rows.push_back({ParamTable::Relation, rel});
    if (p.kind != ModelKind::SimplE) {
        rows.push_back({ParamTable::Entity, o});
        return;
    }
    rows.push_back({ParamTable::EntityTail, o});
    rows.push_back({ParamTable::RelationInv, rel});
    if (p.simple_original) {
        rows.push_back({ParamTable::Entity, o});
        rows.push_back({ParamTable::EntityTail, s});
    }
}

double train_batch_ctx(ModelParams& p, OptState& opt, std::span<const Triple> batch,
                       const TrainConfig& cfg, std::mt19937_64& neg_rng, BatchCtx& ctx) {
    if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
    const NegativeRegime regime = effective_regime(cfg.regime, p.n_entities);
    build_groups(p, batch, ctx.groups);
    const int64_t total_q = 2 * static_cast<int64_t>(batch.size());
    const double inv_q = 1.0 / static_cast<double>(total_q);

    ctx.gb.reset();
    ctx.row_loss.assign(total_q, 0.0);

    for (const QueryGroup& g : ctx.groups) {
        double* rl = ctx.row_loss.data() + g.offset;
        if (regime.mode == NegMode::Sampled) {
            process_sampled(p, g, regime.k, regime.distinct, inv_q, neg_rng, ctx, rl);
            continue;
        }
        const int64_t nq = static_cast<int64_t>(g.queries.size());
        int64_t cand_chunk = cfg.candidate_chunk;
        int64_t row_chunk = nq;
        if (regime.mode == NegMode::AllAccum) {
            const int64_t m = std::max<int64_t>(1, regime.micro_batch);
            if (regime.axis == AccumAxis::Candidates)
                cand_chunk = std::max<int64_t>(1, (p.n_entities + m - 1) / m);
            else
                row_chunk = std::max<int64_t>(1, (nq + m - 1) / m);
        }
        process_all_entities(p, g, inv_q, cand_chunk, row_chunk, ctx, rl);
    }

    double loss = 0.0;
    for (int64_t i = 0; i < total_q; ++i) loss += ctx.row_loss[i];
    loss *= inv_q;

    if (cfg.reg_coeff > 0.0) {
        double penalty = 0.0;
        for (const Triple& t : batch) {
            ctx.reg_rows.clear();
            rows_for_positive(p, t.s, t.r, t.o, ctx.reg_rows);
            if (p.reciprocal)
                rows_for_positive(p, t.o, t.r + p.n_relations, t.s, ctx.reg_rows);
            else
                rows_for_positive(p, t.s, t.r, t.o, ctx.reg_rows);
            penalty += regularize_rows(p, ctx.reg_rows, cfg.reg_kind, cfg.reg_coeff * inv_q,
                                       &ctx.gb);
        }
        loss += penalty;
    }

    if (!std::isfinite(loss)) throw TrainDiverged(loss, -1);
    adagrad_step(p, opt, ctx.gb, cfg.learning_rate);
    return loss;
}

std::string serialize_rng(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 deserialize_rng(const std::string& s) {
    std::mt19937_64 rng;
    std::istringstream is(s);
    is >> rng;
    if (is.fail()) throw std::runtime_error("corrupt random-generator state");
    return rng;
}

std::string log_line(const TrainLogRecord& rec) {
    nlohmann::ordered_json j;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.loss;
    j["dev_mrr"] = rec.dev_mrr;  // NaN serializes as null
    j["wall"] = rec.wall;
    return j.dump();
}

}  // namespace

double train_batch(ModelParams& params, OptState& opt, std::span<const Triple> batch,
                   const TrainConfig& cfg, std::mt19937_64& neg_rng) {
    cfg.validate();
    BatchCtx ctx(params);
    return train_batch_ctx(params, opt, batch, cfg, neg_rng, ctx);
}

TrainState make_train_state(ModelParams init, const TrainConfig& cfg) {
    TrainState st;
    st.params = std::move(init);
    st.opt = make_opt_state(st.params, cfg.adagrad_eps);
    st.best_params = st.params;
    st.best_opt = st.opt;
    st.best_dev_mrr = -std::numeric_limits<double>::infinity();
    std::mt19937_64 seeder(cfg.seed);
    st.shuffle_rng = serialize_rng(std::mt19937_64(seeder()));
    st.sample_rng = serialize_rng(std::mt19937_64(seeder()));
    return st;
}

TrainResult train(TrainState state, const KnowledgeBase& kb, const TrainConfig& cfg,
                  const DevEvalFn& dev_eval, std::ostream* log_stream,
                  const EvalHookFn& on_eval) {
    cfg.validate();
    const auto& triples = kb.train();
    if (triples.empty()) throw std::invalid_argument("train split is empty");
    const int64_t n = static_cast<int64_t>(triples.size());

    std::mt19937_64 shuffle_rng = deserialize_rng(state.shuffle_rng);
    std::mt19937_64 sample_rng = deserialize_rng(state.sample_rng);
    BatchCtx ctx(state.params);
    std::vector<int64_t> perm(n);

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res;
    int64_t epoch = state.next_epoch;
    int64_t completed = epoch;
    bool stop = false;

    for (; epoch < cfg.max_epochs && !stop; ++epoch) {
        // Shuffle from identity every epoch: the order is then a pure function
        // of the generator state, so a resumed run replays the same batches.
        for (int64_t i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), shuffle_rng);
        double loss_sum = 0.0;
        int64_t q_count = 0;
        for (int64_t start = 0; start < n; start += cfg.batch_size) {
            const int64_t end = std::min(n, start + cfg.batch_size);
            ctx.batch_buf.clear();
            for (int64_t i = start; i < end; ++i) ctx.batch_buf.push_back(triples[perm[i]]);
            double l;
            try {
                l = train_batch_ctx(state.params, state.opt, ctx.batch_buf, cfg, sample_rng,
                                    ctx);
            } catch (const TrainDiverged& d) {
                throw TrainDiverged(d.loss, epoch + 1);
            }
            const int64_t nq = 2 * (end - start);
            loss_sum += l * static_cast<double>(nq);
            q_count += nq;
        }
        completed = epoch + 1;
        const double epoch_loss = loss_sum / static_cast<double>(q_count);

        if (completed % cfg.eval_every != 0 && completed != cfg.max_epochs) continue;

        const double dev = dev_eval ? dev_eval(state.params)
                                    : std::numeric_limits<double>::quiet_NaN();
        bool improved = true;
        if (dev_eval) improved = !state.has_best || dev > state.best_dev_mrr;
        if (improved) {
            state.best_params = state.params;
            state.best_opt = state.opt;
            state.best_dev_mrr = dev;
            state.best_epoch = completed;
            state.has_best = true;
            state.evals_since_improve = 0;
        } else {
            ++state.evals_since_improve;
        }

        TrainLogRecord rec;
        rec.epoch = completed;
        rec.loss = epoch_loss;
        rec.dev_mrr = dev;
        rec.wall = cfg.measure_time
                       ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count()
                       : 0.0;
        res.log.push_back(rec);
        if (log_stream) (*log_stream) << log_line(rec) << '\n' << std::flush;
        if (on_eval) {
            state.next_epoch = completed;
            state.shuffle_rng = serialize_rng(shuffle_rng);
            state.sample_rng = serialize_rng(sample_rng);
            on_eval(state, rec);
        }
        if (dev_eval && state.evals_since_improve >= cfg.patience) stop = true;
    }

    if (!state.has_best) {  // never evaluated (e.g. max_epochs == 0)
        state.best_params = state.params;
        state.best_opt = state.opt;
        state.best_dev_mrr = std::numeric_limits<double>::quiet_NaN();
        state.best_epoch = completed;
    }
    res.best_params = std::move(state.best_params);
    res.best_opt = std::move(state.best_opt);
    res.best_dev_mrr = state.best_dev_mrr;
    res.best_epoch = state.best_epoch;
    res.epochs_run = completed;
    return res;
}

TrainResult train(ModelParams init, const KnowledgeBase& kb, const TrainConfig& cfg,
                  const DevEvalFn& dev_eval, std::ostream* log_stream,
                  const EvalHookFn& on_eval) {
    return train(make_train_state(std::move(init), cfg), kb, cfg, dev_eval, log_stream,
                 on_eval);
}

}  // namespace kbc
