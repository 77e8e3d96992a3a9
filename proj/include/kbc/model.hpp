#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kbc {

enum class ModelKind : uint8_t { TransE = 0, RotatE = 1, ComplEx = 2, SimplE = 3 };

const char* to_string(ModelKind k);
std::optional<ModelKind> model_kind_from_string(std::string_view name);

// Which parameter table a gradient row belongs to. Entity doubles as the
// SimplE head table; EntityTail/RelationInv exist for SimplE only.
enum class ParamTable : uint8_t { Entity = 0, EntityTail = 1, Relation = 2, RelationInv = 3 };

/// Embedding tables for one model, stored row-major in flat arrays.
///
/// Complex-layout kinds (RotatE, ComplEx, SimplE) store one complex component
/// per consecutive real pair (x[2j], x[2j+1]) = re, im. RotatE relations are
/// dim/2 raw phase angles; the implied entries e^{i theta} are unit-modulus by
/// construction. SimplE keeps separate head/tail entity tables and a
/// structural inverse relation table next to the forward one.
///
/// With reciprocal augmentation the relation tables have 2|R| rows; row R + r
/// is the reciprocal of relation r.
struct ModelParams {
    ModelKind kind = ModelKind::ComplEx;
    int dim = 0;  // real parameters per entity row
    bool reciprocal = false;
    // SimplE second term as printed is <t_o, r^-1, h_s>; the original
    // publication's <h_o, r^-1, t_s> is available behind this toggle.
    bool simple_original = false;
    int64_t n_entities = 0;
    int64_t n_relations = 0;  // base relation vocabulary |R|

    std::vector<double> entity;        // |E| x dim (SimplE: head table)
    std::vector<double> entity_tail;   // |E| x dim (SimplE only)
    std::vector<double> relation;      // relation_rows() x rel_width()
    std::vector<double> relation_inv;  // relation_rows() x rel_width() (SimplE only)

    int64_t relation_rows() const { return reciprocal ? 2 * n_relations : n_relations; }
    int rel_width() const { return kind == ModelKind::RotatE ? dim / 2 : dim; }
    bool complex_layout() const { return kind != ModelKind::TransE; }
    bool has_tail_table() const { return kind == ModelKind::SimplE; }
    bool has_relation_inv() const { return kind == ModelKind::SimplE; }

    double* entity_row(int64_t e) { return entity.data() + e * dim; }
    const double* entity_row(int64_t e) const { return entity.data() + e * dim; }
    double* entity_tail_row(int64_t e) { return entity_tail.data() + e * dim; }
    const double* entity_tail_row(int64_t e) const { return entity_tail.data() + e * dim; }
    double* relation_row(int64_t r) { return relation.data() + r * rel_width(); }
    const double* relation_row(int64_t r) const { return relation.data() + r * rel_width(); }
    double* relation_inv_row(int64_t r) { return relation_inv.data() + r * rel_width(); }
    const double* relation_inv_row(int64_t r) const { return relation_inv.data() + r * rel_width(); }

    std::vector<double>& table(ParamTable t);
    const std::vector<double>& table(ParamTable t) const;
    int table_width(ParamTable t) const;
    int64_t table_rows(ParamTable t) const;
    // Tables that exist for this kind, in fixed serialization order.
    std::vector<ParamTable> tables() const;

    bool same_shape(const ModelParams& other) const;
};

/// Allocates zeroed tables. Throws if a complex-layout kind gets an odd dim.
ModelParams make_params(ModelKind kind, int dim, int64_t n_entities, int64_t n_relations,
                        bool reciprocal, bool simple_original = false);

/// Gaussian init with the given std for all tables; RotatE phases are drawn
/// uniform in [-pi, pi) instead.
void init_params(ModelParams& params, uint64_t seed, double stddev = 1e-2);

/// Scores one triple. rel_row indexes the (possibly reciprocal-augmented)
/// relation table. Throws on out-of-range ids.
double score_one(const ModelParams& params, int64_t s, int64_t rel_row, int64_t o);

/// Gradient of upstream * score_one(s, rel_row, o) with respect to every
/// touched parameter row. RotatE relation gradients are over phase angles.
struct RowGrad {
    ParamTable table;
    int64_t row;
    std::vector<double> g;
};
std::vector<RowGrad> grad_one(const ModelParams& params, int64_t s, int64_t rel_row, int64_t o,
                              double upstream);

struct ScoreMatrix {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> data;

    void resize(int64_t r, int64_t c) {
        rows = r;
        cols = c;
        data.assign(static_cast<size_t>(r) * c, 0.0);
    }
    double* row(int64_t b) { return data.data() + b * cols; }
    const double* row(int64_t b) const { return data.data() + b * cols; }
};

inline constexpr int64_t kDefaultCandidateChunk = 1024;

/// 1-N scoring, candidates in object position: out[b][o] = score of
/// (subject_b, rel_b, o) for every entity o. Multiplicative kinds run as one
/// fused query-vector/entity-table product; translation kinds walk candidates
/// in chunks of `chunk` so only a B x chunk block is live at a time.
void score_1n_tail(const ModelParams& params,
                   std::span<const std::pair<int64_t, int64_t>> queries,  // (subject, rel_row)
                   ScoreMatrix& out, int64_t chunk = kDefaultCandidateChunk);

/// Mirror of score_1n_tail with candidates in subject position; queries are
/// (rel_row, object).
void score_1n_head(const ModelParams& params,
                   std::span<const std::pair<int64_t, int64_t>> queries,  // (rel_row, object)
                   ScoreMatrix& out, int64_t chunk = kDefaultCandidateChunk);

}  // namespace kbc
