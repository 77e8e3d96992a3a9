#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kbc/eval.hpp"
#include "kbc/kb.hpp"
#include "kbc/model.hpp"
#include "kbc/trainer.hpp"

namespace kbc {

/// One end-to-end run: load a dataset directory (train.txt / valid.txt /
/// test.txt), train with dev-fold early stopping, evaluate the best model on
/// test, and write report.json, best.ckpt, last.ckpt, and log.jsonl under
/// output_dir/tag/.
struct ExperimentSpec {
    std::string dataset_dir;
    ModelKind model = ModelKind::ComplEx;
    int dim = 16;
    TrainConfig train;
    std::string output_dir;
    std::string tag = "run";
    std::optional<int64_t> dev_sample;  // cap on dev queries per evaluation
    bool simple_original = false;
    std::string resume_from;  // path to a last.ckpt to continue from
};

struct ExperimentResult {
    EvalReport test_report;
    TrainResult training;
    std::string report_path;
    std::string log_path;
    std::string best_checkpoint_path;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);
ExperimentResult run_experiment(const ExperimentSpec& spec, const KnowledgeBase& kb);

/// Exhaustive product over the axes, iterated reg_coeff-major then
/// learning_rate then batch_size; the winner is the strictly-highest dev MRR
/// (earliest cell on ties) and is the only cell evaluated on test.
struct GridSpec {
    ExperimentSpec base;
    std::vector<double> reg_coeffs = {1.0, 0.1, 0.01, 0.001, 0.0001, 0.00001};
    std::vector<double> learning_rates = {0.5, 0.1, 0.01, 0.001, 0.0001};
    std::vector<int64_t> batch_sizes = {100, 200, 500, 1000, 2000};
};

struct GridCell {
    double reg_coeff = 0.0;
    double learning_rate = 0.0;
    int64_t batch_size = 0;
    double dev_mrr = 0.0;
    bool failed = false;
    std::string error;
};

struct GridResult {
    std::vector<GridCell> cells;
    int64_t winner = -1;  // index into cells; -1 when every cell failed
    EvalReport test_report;
    std::string table_path;
    std::string report_path;
};

GridResult run_grid(const GridSpec& spec);
GridResult run_grid(const GridSpec& spec, const KnowledgeBase& kb);

/// One full train + test evaluation per negative count k using Sampled(k);
/// emits a two-column CSV ("k,mrr") under output_dir/tag/.
struct AblationSpec {
    ExperimentSpec base;
    std::vector<int64_t> negative_counts = {100,  200,  400,  600,  800,   1000,  2000,
                                            4000, 6000, 8000, 10000, 12000, 14000};
    bool distinct = false;  // draw negatives without replacement
};

struct AblationPoint {
    int64_t k = 0;
    double test_mrr = 0.0;
};

struct AblationResult {
    std::vector<AblationPoint> points;
    std::string csv_path;
};

AblationResult run_ablation(const AblationSpec& spec);
AblationResult run_ablation(const AblationSpec& spec, const KnowledgeBase& kb);

}  // namespace kbc
