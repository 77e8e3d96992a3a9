#pragma once

#include <cstdint>
#include <vector>

#include "kbc/model.hpp"

namespace kbc {

// Sparse gradient accumulator shaped like a ModelParams. Dense per-table
// mirrors plus a touched-row list, so reset() only clears what a batch wrote.
class GradBuffer {
  public:
    explicit GradBuffer(const ModelParams& shape);

    // Returns the gradient slot for a row, marking it touched.
    double* row(ParamTable t, int64_t r);
    const double* row_if_touched(ParamTable t, int64_t r) const;
    bool is_touched(ParamTable t, int64_t r) const;
    // Bulk-marks [begin, end) so parallel candidate passes can write rows
    // without touching the bookkeeping.
    void mark_rows(ParamTable t, int64_t begin, int64_t end);

    int width(ParamTable t) const { return width_[static_cast<int>(t)]; }
    const std::vector<int64_t>& touched_rows(ParamTable t) const {
        return list_[static_cast<int>(t)];
    }
    double* data(ParamTable t) { return grad_[static_cast<int>(t)].data(); }
    const double* data(ParamTable t) const { return grad_[static_cast<int>(t)].data(); }

    // Zeroes touched rows and clears the lists.
    void reset();

    static constexpr int kNumTables = 4;

  private:
    std::vector<double> grad_[kNumTables];
    std::vector<uint8_t> touched_[kNumTables];
    std::vector<int64_t> list_[kNumTables];
    int width_[kNumTables] = {0, 0, 0, 0};
    int64_t rows_[kNumTables] = {0, 0, 0, 0};
};

// AdaGrad state: one squared-gradient accumulator per parameter, zero at
// start.
struct OptState {
    double eps = 1e-10;
    std::vector<double> acc[GradBuffer::kNumTables];

    double* table(ParamTable t) { return acc[static_cast<int>(t)].data(); }
    const double* table(ParamTable t) const { return acc[static_cast<int>(t)].data(); }
};

OptState make_opt_state(const ModelParams& p, double eps = 1e-10);

// For every touched row: acc += g^2; param -= lr * g / (sqrt(acc) + eps).
void adagrad_step(ModelParams& p, OptState& opt, const GradBuffer& grads, double lr);

}  // namespace kbc
