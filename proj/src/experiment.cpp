#include "kbc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "kbc/checkpoint.hpp"

namespace fs = std::filesystem;

namespace kbc {

namespace {

std::string regime_name(const NegativeRegime& r) {
    switch (r.mode) {
        case NegMode::Sampled:
            return (r.distinct ? "sampled-distinct:" : "sampled:") + std::to_string(r.k);
        case NegMode::AllOneN:
            return "all-1n";
        case NegMode::AllAccum:
            return "all-accum:" + std::to_string(r.micro_batch) +
                   (r.axis == AccumAxis::Rows ? ":rows" : ":candidates");
    }
    return "?";
}

fs::path prepare_out_dir(const ExperimentSpec& spec) {
    if (spec.output_dir.empty())
        throw std::invalid_argument("output_dir must not be empty");
    const fs::path dir = fs::path(spec.output_dir) / (spec.tag.empty() ? "run" : spec.tag);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " +
                                     ec.message());
    return dir;
}

std::ofstream open_text(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open file: " + p.string());
    return os;
}

DevEvalFn make_dev_fn(const ExperimentSpec& spec, const KnowledgeBase& kb,
                      const FilterIndex& dev_filter) {
    if (kb.valid().empty()) return {};
    std::optional<int64_t> cap = spec.dev_sample;
    if (cap) {
        const int64_t total = 2 * static_cast<int64_t>(kb.valid().size());
        cap = std::min(*cap, total);
    }
    const int64_t chunk = spec.train.candidate_chunk;
    return [&kb, &dev_filter, cap, chunk](const ModelParams& p) {
        return mrr_only(p, kb, dev_filter, Split::Valid, cap, 512, chunk);
    };
}

ModelParams fresh_params(const ExperimentSpec& spec, const KnowledgeBase& kb,
                         const TrainConfig& cfg) {
    ModelParams p = make_params(spec.model, spec.dim, kb.num_entities(), kb.num_relations(),
                                cfg.reciprocal, spec.simple_original);
    init_params(p, cfg.seed, cfg.init_std);
    return p;
}

/// Trains one configuration without touching the test fold.
TrainResult train_cell(const ExperimentSpec& spec, const KnowledgeBase& kb,
                       const TrainConfig& cfg, const FilterIndex& dev_filter,
                       std::ostream* log_stream, const EvalHookFn& on_eval) {
    const DevEvalFn dev_fn = make_dev_fn(spec, kb, dev_filter);
    if (!spec.resume_from.empty()) {
        Checkpoint ck = load_checkpoint(spec.resume_from);
        if (!ck.train)
            throw std::runtime_error("checkpoint " + spec.resume_from +
                                     " has no training state to resume from");
        if (ck.params.kind != spec.model)
            throw std::runtime_error("checkpoint " + spec.resume_from + " holds a " +
                                     std::string(to_string(ck.params.kind)) +
                                     " model, expected " + std::string(to_string(spec.model)));
        return train(std::move(*ck.train), kb, cfg, dev_fn, log_stream, on_eval);
    }
    return train(fresh_params(spec, kb, cfg), kb, cfg, dev_fn, log_stream, on_eval);
}

nlohmann::ordered_json config_json(const ExperimentSpec& spec, const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["tag"] = spec.tag;
    j["model"] = to_string(spec.model);
    j["dim"] = spec.dim;
    j["reciprocal"] = cfg.reciprocal;
    j["regularizer"] = to_string(cfg.reg_kind);
    j["reg_coeff"] = cfg.reg_coeff;
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["negatives"] = regime_name(cfg.regime);
    j["seed"] = cfg.seed;
    if (spec.simple_original) j["simple_original"] = true;
    return j;
}

ExperimentResult finish_run(const ExperimentSpec& spec, const KnowledgeBase& kb,
                            const TrainConfig& cfg, TrainResult tr, const fs::path& dir,
                            const std::string& log_path) {
    ExperimentResult res;
    res.log_path = log_path;

    const fs::path best_path = dir / "best.ckpt";
    save_checkpoint(best_path.string(), tr.best_params, &tr.best_opt);
    res.best_checkpoint_path = best_path.string();

    // Model selection is over; the test fold is read only from here on.
    const FilterIndex full_filter(kb, /*include_test=*/true);
    res.test_report = evaluate(tr.best_params, kb, full_filter, Split::Test, 512,
                               cfg.candidate_chunk);

    nlohmann::ordered_json j = config_json(spec, cfg);
    j["best_epoch"] = tr.best_epoch;
    if (std::isfinite(tr.best_dev_mrr))
        j["best_dev_mrr"] = tr.best_dev_mrr;
    else
        j["best_dev_mrr"] = nullptr;
    j["epochs_run"] = tr.epochs_run;
    j["test"] = nlohmann::ordered_json::parse(res.test_report.to_json());

    const fs::path report_path = dir / "report.json";
    {
        std::ofstream os = open_text(report_path);
        os << j.dump(2) << '\n';
    }
    res.report_path = report_path.string();
    res.training = std::move(tr);
    return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const KnowledgeBase& kb) {
    TrainConfig cfg = spec.train;
    cfg.validate();
    const fs::path dir = prepare_out_dir(spec);

    const FilterIndex dev_filter(kb, /*include_test=*/false);
    const fs::path log_path = dir / "log.jsonl";
    std::ofstream log_stream = open_text(log_path);
    const fs::path last_path = dir / "last.ckpt";
    EvalHookFn on_eval = [&last_path](const TrainState& st, const TrainLogRecord&) {
        save_train_checkpoint(last_path.string(), st);
    };

    TrainResult tr = train_cell(spec, kb, cfg, dev_filter, &log_stream, on_eval);
    log_stream.close();
    return finish_run(spec, kb, cfg, std::move(tr), dir, log_path.string());
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    const KnowledgeBase kb = load_dataset(spec.dataset_dir);
    return run_experiment(spec, kb);
}

GridResult run_grid(const GridSpec& grid, const KnowledgeBase& kb) {
    if (grid.reg_coeffs.empty() || grid.learning_rates.empty() || grid.batch_sizes.empty())
        throw std::invalid_argument("grid axes must be nonempty");
    if (kb.valid().empty())
        throw std::invalid_argument("grid search needs a validation split for model selection");

    const fs::path dir = prepare_out_dir(grid.base);
    const fs::path table_path = dir / "grid.jsonl";
    std::ofstream table = open_text(table_path);

    ExperimentSpec base = grid.base;
    base.resume_from.clear();  // cells always start fresh

    const FilterIndex dev_filter(kb, /*include_test=*/false);

    GridResult res;
    res.table_path = table_path.string();
    std::optional<TrainResult> best_tr;
    TrainConfig best_cfg;

    for (double coeff : grid.reg_coeffs) {
        for (double lr : grid.learning_rates) {
            for (int64_t batch : grid.batch_sizes) {
                TrainConfig cfg = base.train;
                cfg.reg_coeff = coeff;
                cfg.learning_rate = lr;
                cfg.batch_size = batch;
                cfg.validate();

                GridCell cell;
                cell.reg_coeff = coeff;
                cell.learning_rate = lr;
                cell.batch_size = batch;
                try {
                    TrainResult tr = train_cell(base, kb, cfg, dev_filter, nullptr, {});
                    cell.dev_mrr = tr.best_dev_mrr;
                    if (!best_tr || cell.dev_mrr > best_tr->best_dev_mrr) {
                        best_tr = std::move(tr);
                        best_cfg = cfg;
                        res.winner = static_cast<int64_t>(res.cells.size());
                    }
                } catch (const TrainDiverged& e) {
                    cell.failed = true;
                    cell.error = e.what();
                    cell.dev_mrr = std::numeric_limits<double>::quiet_NaN();
                }

                nlohmann::ordered_json line;
                line["reg_coeff"] = cell.reg_coeff;
                line["learning_rate"] = cell.learning_rate;
                line["batch_size"] = cell.batch_size;
                if (cell.failed) {
                    line["dev_mrr"] = nullptr;
                    line["failed"] = true;
                    line["error"] = cell.error;
                } else {
                    line["dev_mrr"] = cell.dev_mrr;
                    line["failed"] = false;
                }
                table << line.dump() << '\n';
                table.flush();
                res.cells.push_back(std::move(cell));
            }
        }
    }
    table.close();

    if (!best_tr) throw std::runtime_error("every grid cell failed");

    ExperimentResult win =
        finish_run(base, kb, best_cfg, std::move(*best_tr), dir, /*log_path=*/"");
    res.test_report = std::move(win.test_report);
    res.report_path = std::move(win.report_path);
    return res;
}

GridResult run_grid(const GridSpec& grid) {
    const KnowledgeBase kb = load_dataset(grid.base.dataset_dir);
    return run_grid(grid, kb);
}

AblationResult run_ablation(const AblationSpec& spec, const KnowledgeBase& kb) {
    if (spec.negative_counts.empty())
        throw std::invalid_argument("negative_counts must not be empty");
    for (int64_t k : spec.negative_counts)
        if (k < 1 || k > kb.num_entities())
            throw std::invalid_argument("negative count " + std::to_string(k) +
                                        " outside [1, " + std::to_string(kb.num_entities()) + "]");

    const fs::path dir = prepare_out_dir(spec.base);
    const FilterIndex dev_filter(kb, /*include_test=*/false);

    AblationResult res;
    std::string csv = "k,mrr\n";
    for (int64_t k : spec.negative_counts) {
        ExperimentSpec cell = spec.base;
        cell.resume_from.clear();
        cell.tag = spec.base.tag + "/k" + std::to_string(k);
        TrainConfig cfg = cell.train;
        cfg.regime = NegativeRegime::sampled(k, spec.distinct);
        cfg.validate();
        cell.train = cfg;

        TrainResult tr = train_cell(cell, kb, cfg, dev_filter, nullptr, {});
        const FilterIndex full_filter(kb, /*include_test=*/true);
        const EvalReport rep =
            evaluate(tr.best_params, kb, full_filter, Split::Test, 512, cfg.candidate_chunk);
        res.points.push_back({k, rep.mrr});
        csv += std::to_string(k) + "," + nlohmann::json(rep.mrr).dump() + "\n";
    }

    const fs::path csv_path = dir / "ablation.csv";
    {
        std::ofstream os = open_text(csv_path);
        os << csv;
    }
    res.csv_path = csv_path.string();
    return res;
}

AblationResult run_ablation(const AblationSpec& spec) {
    const KnowledgeBase kb = load_dataset(spec.base.dataset_dir);
    return run_ablation(spec, kb);
}

}  // namespace kbc
