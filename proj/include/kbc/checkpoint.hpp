#pragma once

#include <optional>
#include <string>

#include "kbc/model.hpp"
#include "kbc/optim.hpp"
#include "kbc/trainer.hpp"

namespace kbc {

/// Contents of a checkpoint file. `params` are always present; `opt` holds the
/// optimizer accumulators when they were saved; `train` is the full resume
/// state for mid-run checkpoints (its params/opt are the live training copy;
/// the top-level params/opt mirror them for uniform access).
struct Checkpoint {
    ModelParams params;
    std::optional<OptState> opt;
    std::optional<TrainState> train;
};

/// Header summary for quick inspection without loading the tables.
struct CheckpointInfo {
    std::string kind;
    int dim = 0;
    int64_t n_entities = 0;
    int64_t n_relations = 0;
    bool reciprocal = false;
    bool simple_original = false;
    bool has_opt = false;
    bool has_train = false;
    int64_t next_epoch = 0;
    int64_t best_epoch = -1;
    double best_dev_mrr = 0.0;
    int64_t param_doubles = 0;

    std::string to_json() const;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const OptState* opt = nullptr);
void save_train_checkpoint(const std::string& path, const TrainState& state);

Checkpoint load_checkpoint(const std::string& path);

/// Loads a params-only view and verifies the stored model kind. A mismatch
/// throws with both kinds named.
ModelParams load_checkpoint_expect(const std::string& path, ModelKind expect);

CheckpointInfo inspect_checkpoint(const std::string& path);

}  // namespace kbc
