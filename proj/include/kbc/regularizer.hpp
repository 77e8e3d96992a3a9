#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "kbc/model.hpp"
#include "kbc/optim.hpp"

namespace kbc {

enum class RegKind : uint8_t { L2 = 0, N3 = 1 };

const char* to_string(RegKind k);
std::optional<RegKind> reg_kind_from_string(std::string_view name);

/// Penalty (and, when grad is non-null, accumulated gradient) for one row.
/// L2: coeff * sum x^2, grad 2 coeff x.
/// N3 with complex_pairs: coeff * sum |c_j|^3 over complex components,
/// grad 3 coeff |c_j| (re, im); without pairs: coeff * sum |x|^3, grad
/// 3 coeff x |x|.
double reg_row(RegKind kind, bool complex_pairs, double coeff, std::span<const double> row,
               double* grad);

/// Applies reg_row over whole parameter rows, respecting each table's layout.
/// RotatE relation rows contribute nothing: their implied complex entries are
/// unit-modulus by construction, so the penalty is a constant with zero
/// gradient. Returns the total penalty; gradients accumulate into gb if given.
double regularize_rows(const ModelParams& params,
                       std::span<const std::pair<ParamTable, int64_t>> rows, RegKind kind,
                       double coeff, GradBuffer* gb);

}  // namespace kbc
