#include "kbc/regularizer.hpp"

#include <cmath>

namespace kbc {

const char* to_string(RegKind k) { return k == RegKind::L2 ? "l2" : "n3"; }

std::optional<RegKind> reg_kind_from_string(std::string_view name) {
    if (name == "l2") return RegKind::L2;
    if (name == "n3") return RegKind::N3;
    return std::nullopt;
}

double reg_row(RegKind kind, bool complex_pairs, double coeff, std::span<const double> row,
               double* grad) {
    double penalty = 0.0;
    const size_t n = row.size();
    if (kind == RegKind::L2) {
        for (size_t j = 0; j < n; ++j) {
            penalty += row[j] * row[j];
            if (grad) grad[j] += 2.0 * coeff * row[j];
        }
        return coeff * penalty;
    }
    if (complex_pairs) {
        for (size_t j = 0; j + 1 < n; j += 2) {
            const double m = std::sqrt(row[j] * row[j] + row[j + 1] * row[j + 1]);
            penalty += m * m * m;
            if (grad) {
                grad[j] += 3.0 * coeff * m * row[j];
                grad[j + 1] += 3.0 * coeff * m * row[j + 1];
            }
        }
    } else {
        for (size_t j = 0; j < n; ++j) {
            const double a = std::abs(row[j]);
            penalty += a * a * a;
            if (grad) grad[j] += 3.0 * coeff * a * row[j];
        }
    }
    return coeff * penalty;
}

double regularize_rows(const ModelParams& p,
                       std::span<const std::pair<ParamTable, int64_t>> rows, RegKind kind,
                       double coeff, GradBuffer* gb) {
    if (coeff == 0.0) return 0.0;
    double penalty = 0.0;
    for (const auto& [t, r] : rows) {
        if (p.kind == ModelKind::RotatE &&
            (t == ParamTable::Relation || t == ParamTable::RelationInv))
            continue;  // phase rows: constant penalty, zero gradient
        const int w = p.table_width(t);
        std::span<const double> row(p.table(t).data() + r * w, static_cast<size_t>(w));
        penalty += reg_row(kind, p.complex_layout(), coeff, row, gb ? gb->row(t, r) : nullptr);
    }
    return penalty;
}

}  // namespace kbc
