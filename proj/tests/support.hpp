#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kbc/kb.hpp"
#include "kbc/model.hpp"

// Shared helpers for the unit tests and the acceptance suite: independent
// complex-arithmetic scorers, finite differences, random and planted
// knowledge bases, and split-file writers.
namespace testsup {

/// Independent scorer built on std::complex; the production code uses
/// expanded real arithmetic, so agreement is a real check.
double oracle_score(const kbc::ModelParams& p, int64_t s, int64_t rel_row, int64_t o);

/// Central finite difference of score_one with respect to one coordinate of
/// one parameter table row. For rotation phases the table width is dim/2.
double fd_score_coord(kbc::ModelParams p, int64_t s, int64_t rel_row, int64_t o,
                      kbc::ParamTable table, int64_t row, int64_t j, double h);

/// Random model parameters with standard-normal entries (phases uniform on
/// [-pi, pi) for the rotation kind).
kbc::ModelParams random_params(kbc::ModelKind kind, int dim, int64_t n_entities,
                               int64_t n_relations, bool reciprocal, uint64_t seed,
                               bool simple_original = false, double scale = 1.0);

struct RawSplits {
    std::vector<kbc::RawTriple> train, valid, test;
};

/// Random knowledge base covering every entity in [0, n_entities) and every
/// relation in [0, n_relations). Duplicate triples are possible by design.
RawSplits random_kb_raw(uint64_t seed, int64_t n_entities, int64_t n_relations, int64_t n_train,
                        int64_t n_valid, int64_t n_test);

kbc::KnowledgeBase random_kb(uint64_t seed, int64_t n_entities, int64_t n_relations,
                             int64_t n_train, int64_t n_valid, int64_t n_test);

/// Writes train.txt/valid.txt/test.txt under dir (created if needed).
void write_kb_dir(const std::string& dir, const RawSplits& splits);

/// Synthetic data with real structure: triples are sampled from a softmax
/// over a planted ground-truth bilinear-complex model, so held-out triples
/// are genuinely predictable. Deduplicated, every entity appears, splits are
/// a seeded shuffle cut 80/10/10.
struct SynthSpec {
    int64_t n_entities = 500;
    int64_t n_relations = 10;
    int64_t n_triples = 5000;
    int plant_dim = 16;  // real width of the planted model
    double plant_std = 1.0;
    double temperature = 1.0;
    uint64_t seed = 7;
};

RawSplits planted_kb_raw(const SynthSpec& spec);
kbc::KnowledgeBase planted_kb(const SynthSpec& spec);

}  // namespace testsup
