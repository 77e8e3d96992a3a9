#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbc/kb.hpp"
#include "kbc/model.hpp"
#include "kbc/optim.hpp"
#include "kbc/regularizer.hpp"

namespace kbc {

enum class NegMode : uint8_t { Sampled = 0, AllOneN = 1, AllAccum = 2 };
// Gradient accumulation can split either the candidate axis (micro-chunks of
// entities) or the query rows; both give the same result, only peak memory
// and traversal differ.
enum class AccumAxis : uint8_t { Candidates = 0, Rows = 1 };

struct NegativeRegime {
    NegMode mode = NegMode::AllOneN;
    int64_t k = 100;          // Sampled: negatives per query
    bool distinct = false;    // Sampled: without replacement and gold excluded
    int64_t micro_batch = 1;  // AllAccum: number of micro-batches m
    AccumAxis axis = AccumAxis::Candidates;

    static NegativeRegime sampled(int64_t k, bool distinct = false);
    static NegativeRegime all_1n();
    static NegativeRegime all_accum(int64_t m, AccumAxis axis = AccumAxis::Candidates);
    bool all_entities() const { return mode != NegMode::Sampled; }
};

struct TrainConfig {
    double learning_rate = 0.1;
    RegKind reg_kind = RegKind::L2;
    double reg_coeff = 0.0;
    int64_t batch_size = 100;
    NegativeRegime regime;
    int64_t max_epochs = 1000;
    int64_t patience = 10;    // consecutive non-improving dev evaluations
    int64_t eval_every = 5;   // epochs between dev evaluations
    bool reciprocal = false;  // consumed when the caller builds ModelParams
    uint64_t seed = 1;
    int64_t candidate_chunk = kDefaultCandidateChunk;
    double init_std = 1e-2;
    double adagrad_eps = 1e-10;
    // With measure_time off the wall field of every log record is 0.0, so two
    // runs of the same seed produce byte-identical logs.
    bool measure_time = true;

    void validate() const;  // throws std::invalid_argument
};

// Thrown when a batch loss stops being finite; grid search records the cell
// as failed instead of aborting.
struct TrainDiverged : std::runtime_error {
    TrainDiverged(double loss_value, int64_t at_epoch);
    double loss;
    int64_t epoch;
};

/// One optimizer step over a batch of triples. Each triple contributes a tail
/// query (s, r, ?) and a head query (?, r, o) — the latter becomes a tail
/// query of the reciprocal row when params.reciprocal is set. Returns the
/// batch objective: mean cross-entropy per query plus the regularization
/// penalty of the positive rows (also per query). neg_rng drives negative
/// sampling (Sampled regime only).
double train_batch(ModelParams& params, OptState& opt, std::span<const Triple> batch,
                   const TrainConfig& cfg, std::mt19937_64& neg_rng);

struct TrainLogRecord {
    int64_t epoch = 0;     // 1-based epoch the evaluation follows
    double loss = 0.0;     // mean train objective over that epoch
    double dev_mrr = 0.0;  // NaN when no dev callback is given
    double wall = 0.0;     // seconds since training start; 0.0 if untimed
};

// Complete resumable snapshot between epochs.
struct TrainState {
    ModelParams params;
    OptState opt;
    ModelParams best_params;
    OptState best_opt;
    double best_dev_mrr = 0.0;
    bool has_best = false;
    int64_t best_epoch = -1;
    int64_t next_epoch = 0;
    int64_t evals_since_improve = 0;
    std::string shuffle_rng;  // serialized mt19937_64 streams
    std::string sample_rng;
};

struct TrainResult {
    ModelParams best_params;
    OptState best_opt;
    double best_dev_mrr = 0.0;
    int64_t best_epoch = -1;
    int64_t epochs_run = 0;
    std::vector<TrainLogRecord> log;
};

using DevEvalFn = std::function<double(const ModelParams&)>;
using EvalHookFn = std::function<void(const TrainState&, const TrainLogRecord&)>;

TrainState make_train_state(ModelParams init, const TrainConfig& cfg);

/// Epoch loop: shuffles the train split each epoch with the seeded generator,
/// evaluates dev MRR every eval_every epochs (and after the final epoch if it
/// was not already evaluated), keeps the best-dev snapshot, stops after
/// `patience` consecutive non-improving evaluations, and returns the best
/// checkpoint — never the last. Each evaluation appends one record to the log
/// (and log_stream, as one JSON object per line) and invokes on_eval with a
/// resumable state.
TrainResult train(TrainState state, const KnowledgeBase& kb, const TrainConfig& cfg,
                  const DevEvalFn& dev_eval, std::ostream* log_stream = nullptr,
                  const EvalHookFn& on_eval = {});
TrainResult train(ModelParams init, const KnowledgeBase& kb, const TrainConfig& cfg,
                  const DevEvalFn& dev_eval, std::ostream* log_stream = nullptr,
                  const EvalHookFn& on_eval = {});

}  // namespace kbc
