#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "kbc/checkpoint.hpp"
#include "kbc/eval.hpp"
#include "kbc/experiment.hpp"
#include "kbc/kb.hpp"
#include "kbc/model.hpp"
#include "kbc/trainer.hpp"

namespace {

struct ExpOpts {
    std::string dataset_dir;
    std::string model = "complex";
    int dim = 16;
    double lr = 0.1;
    std::string reg = "n3";
    double reg_coeff = 0.0;
    int64_t batch_size = 100;
    std::string negatives = "all-1n";
    bool reciprocal = false;
    bool no_reciprocal = false;
    uint64_t seed = 1;
    std::string out = "runs";
    std::string tag = "run";
    int64_t max_epochs = 1000;
    int64_t patience = 10;
    int64_t eval_every = 5;
    int64_t dev_sample = 0;  // 0 = full dev fold
    int64_t chunk = kbc::kDefaultCandidateChunk;
    double init_std = 1e-2;
    bool distinct = false;
    int threads = 0;  // 0 = library default
    bool no_timing = false;
    bool simple_original = false;
    std::string resume;
};

void add_experiment_flags(CLI::App* cmd, ExpOpts& o) {
    cmd->add_option("--dataset-dir", o.dataset_dir,
                    "Directory with train.txt/valid.txt/test.txt")
        ->required();
    cmd->add_option("--model", o.model, "transe|rotate|complex|simple")
        ->check(CLI::IsMember({"transe", "rotate", "complex", "simple"}));
    cmd->add_option("--dim", o.dim, "Embedding width (real numbers per entity)");
    cmd->add_option("--lr", o.lr, "AdaGrad learning rate");
    cmd->add_option("--reg", o.reg, "Regularizer")->check(CLI::IsMember({"l2", "n3"}));
    cmd->add_option("--reg-coeff", o.reg_coeff, "Regularization coefficient");
    cmd->add_option("--batch-size", o.batch_size, "Triples per batch");
    cmd->add_option("--negatives", o.negatives,
                    "K | all-1n | all-accum:M[:rows|:candidates]");
    cmd->add_flag("--reciprocal", o.reciprocal,
                  "Force reciprocal relations on (default: on for all-*, off for sampled)");
    cmd->add_flag("--no-reciprocal", o.no_reciprocal, "Force reciprocal relations off");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--out", o.out, "Output directory root");
    cmd->add_option("--tag", o.tag, "Run name under the output directory");
    cmd->add_option("--max-epochs", o.max_epochs, "Epoch cap");
    cmd->add_option("--patience", o.patience,
                    "Non-improving dev evaluations before stopping");
    cmd->add_option("--eval-every", o.eval_every, "Epochs between dev evaluations");
    cmd->add_option("--dev-sample", o.dev_sample,
                    "Cap on dev queries per evaluation (0 = all)");
    cmd->add_option("--chunk", o.chunk, "Candidate chunk width for 1-N scoring");
    cmd->add_option("--init-std", o.init_std, "Init stddev for embeddings");
    cmd->add_flag("--distinct-negatives", o.distinct,
                  "Sample negatives without replacement, excluding the gold entity");
    cmd->add_option("--threads", o.threads, "OpenMP thread count (0 = default)");
    cmd->add_flag("--no-timing", o.no_timing,
                  "Write wall = 0.0 in logs so reruns are byte-identical");
    cmd->add_flag("--simple-original", o.simple_original,
                  "Use the two-sided variant of the simple model's second term");
    cmd->set_config("--config", "", "Flat key=value config file; flags override");
}

kbc::NegativeRegime parse_negatives(const std::string& s, bool distinct) {
    if (s == "all" || s == "all-1n") return kbc::NegativeRegime::all_1n();
    if (s.rfind("all-accum:", 0) == 0) {
        std::string rest = s.substr(10);
        kbc::AccumAxis axis = kbc::AccumAxis::Candidates;
        const size_t colon = rest.find(':');
        if (colon != std::string::npos) {
            const std::string ax = rest.substr(colon + 1);
            rest = rest.substr(0, colon);
            if (ax == "rows")
                axis = kbc::AccumAxis::Rows;
            else if (ax != "candidates")
                throw CLI::ValidationError("--negatives", "unknown accumulation axis: " + ax);
        }
        try {
            return kbc::NegativeRegime::all_accum(std::stoll(rest), axis);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--negatives", "bad micro-batch count: " + rest);
        }
    }
    try {
        size_t used = 0;
        const int64_t k = std::stoll(s, &used);
        if (used == s.size() && k >= 1) return kbc::NegativeRegime::sampled(k, distinct);
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("--negatives", "expected K, all-1n, or all-accum:M, got " + s);
}

kbc::ExperimentSpec build_spec(const ExpOpts& o) {
    if (o.threads > 0) omp_set_num_threads(o.threads);

    kbc::ExperimentSpec spec;
    spec.dataset_dir = o.dataset_dir;
    spec.model = *kbc::model_kind_from_string(o.model);
    spec.dim = o.dim;
    spec.output_dir = o.out;
    spec.tag = o.tag;
    if (o.dev_sample > 0) spec.dev_sample = o.dev_sample;
    spec.simple_original = o.simple_original;
    spec.resume_from = o.resume;

    kbc::TrainConfig& cfg = spec.train;
    cfg.learning_rate = o.lr;
    cfg.reg_kind = *kbc::reg_kind_from_string(o.reg);
    cfg.reg_coeff = o.reg_coeff;
    cfg.batch_size = o.batch_size;
    cfg.regime = parse_negatives(o.negatives, o.distinct);
    cfg.max_epochs = o.max_epochs;
    cfg.patience = o.patience;
    cfg.eval_every = o.eval_every;
    cfg.seed = o.seed;
    cfg.candidate_chunk = o.chunk;
    cfg.init_std = o.init_std;
    cfg.measure_time = !o.no_timing;
    if (o.reciprocal && o.no_reciprocal)
        throw CLI::ValidationError("--reciprocal", "both --reciprocal and --no-reciprocal given");
    if (o.reciprocal)
        cfg.reciprocal = true;
    else if (o.no_reciprocal)
        cfg.reciprocal = false;
    else
        cfg.reciprocal = cfg.regime.all_entities();  // default: reciprocals pair with the full softmax
    return spec;
}

std::vector<int64_t> parse_counts(const std::vector<std::string>& words, const char* flag) {
    std::vector<int64_t> out;
    for (const std::string& w : words) {
        try {
            size_t used = 0;
            const int64_t v = std::stoll(w, &used);
            if (used != w.size()) throw std::invalid_argument(w);
            out.push_back(v);
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "bad count: " + w);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-base completion: training, evaluation, sweeps"};
    app.require_subcommand(1);

    ExpOpts train_o;
    CLI::App* train_cmd = app.add_subcommand("train", "Train one model and evaluate on test");
    add_experiment_flags(train_cmd, train_o);
    train_cmd->add_option("--resume", train_o.resume, "Continue from a last.ckpt");

    struct {
        std::string checkpoint, dataset_dir, split = "test", out;
        int64_t chunk = kbc::kDefaultCandidateChunk;
        int threads = 0;
    } eval_o;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", eval_o.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--dataset-dir", eval_o.dataset_dir, "Dataset directory")->required();
    eval_cmd->add_option("--split", eval_o.split, "train|valid|test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    eval_cmd->add_option("--out", eval_o.out, "Write the report here instead of stdout only");
    eval_cmd->add_option("--chunk", eval_o.chunk, "Candidate chunk width");
    eval_cmd->add_option("--threads", eval_o.threads, "OpenMP thread count (0 = default)");

    ExpOpts grid_o;
    std::vector<std::string> grid_coeffs, grid_lrs, grid_batches;
    CLI::App* grid_cmd = app.add_subcommand("grid", "Hyperparameter grid search");
    add_experiment_flags(grid_cmd, grid_o);
    grid_cmd->add_option("--reg-coeffs", grid_coeffs, "Grid axis (overrides default)");
    grid_cmd->add_option("--lrs", grid_lrs, "Grid axis (overrides default)");
    grid_cmd->add_option("--batch-sizes", grid_batches, "Grid axis (overrides default)");

    ExpOpts abl_o;
    std::vector<std::string> abl_counts;
    CLI::App* abl_cmd = app.add_subcommand("ablate", "Test MRR vs negative-sample count");
    add_experiment_flags(abl_cmd, abl_o);
    abl_cmd->add_option("--counts", abl_counts, "Negative counts (overrides default)");

    std::string inspect_path;
    CLI::App* inspect_cmd = app.add_subcommand("inspect-checkpoint", "Print checkpoint header");
    inspect_cmd->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            const kbc::ExperimentSpec spec = build_spec(train_o);
            const kbc::ExperimentResult res = kbc::run_experiment(spec);
            std::cout << res.test_report.to_json() << '\n';
            std::cerr << "report: " << res.report_path << '\n'
                      << "checkpoint: " << res.best_checkpoint_path << '\n';
        } else if (*eval_cmd) {
            if (eval_o.threads > 0) omp_set_num_threads(eval_o.threads);
            const kbc::Checkpoint ck = kbc::load_checkpoint(eval_o.checkpoint);
            const kbc::KnowledgeBase kb = kbc::load_dataset(eval_o.dataset_dir);
            kbc::Split split = kbc::Split::Test;
            if (eval_o.split == "train") split = kbc::Split::Train;
            if (eval_o.split == "valid") split = kbc::Split::Valid;
            const kbc::FilterIndex filter(kb);
            const kbc::EvalReport rep =
                kbc::evaluate(ck.params, kb, filter, split, 512, eval_o.chunk);
            std::cout << rep.to_json() << '\n';
            if (!eval_o.out.empty()) {
                std::ofstream os(eval_o.out);
                if (!os) throw std::runtime_error("cannot open file: " + eval_o.out);
                os << rep.to_json() << '\n';
            }
        } else if (*grid_cmd) {
            kbc::GridSpec gs;
            gs.base = build_spec(grid_o);
            if (!grid_coeffs.empty()) {
                gs.reg_coeffs.clear();
                for (const std::string& w : grid_coeffs) gs.reg_coeffs.push_back(std::stod(w));
            }
            if (!grid_lrs.empty()) {
                gs.learning_rates.clear();
                for (const std::string& w : grid_lrs) gs.learning_rates.push_back(std::stod(w));
            }
            if (!grid_batches.empty())
                gs.batch_sizes = parse_counts(grid_batches, "--batch-sizes");
            const kbc::GridResult res = kbc::run_grid(gs);
            std::cout << res.test_report.to_json() << '\n';
            std::cerr << "cells: " << res.table_path << '\n'
                      << "winner report: " << res.report_path << '\n';
        } else if (*abl_cmd) {
            kbc::AblationSpec as;
            as.base = build_spec(abl_o);
            as.distinct = abl_o.distinct;
            if (!abl_counts.empty()) as.negative_counts = parse_counts(abl_counts, "--counts");
            const kbc::AblationResult res = kbc::run_ablation(as);
            for (const kbc::AblationPoint& pt : res.points)
                std::cout << pt.k << "," << pt.test_mrr << '\n';
            std::cerr << "csv: " << res.csv_path << '\n';
        } else if (*inspect_cmd) {
            std::cout << kbc::inspect_checkpoint(inspect_path).to_json() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
