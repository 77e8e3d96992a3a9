#include "kbc/optim.hpp"

#include <cmath>

namespace kbc {

GradBuffer::GradBuffer(const ModelParams& shape) {
    for (int i = 0; i < kNumTables; ++i) {
        auto t = static_cast<ParamTable>(i);
        rows_[i] = shape.table_rows(t);
        width_[i] = shape.table_width(t);
        grad_[i].assign(static_cast<size_t>(rows_[i]) * width_[i], 0.0);
        touched_[i].assign(static_cast<size_t>(rows_[i]), 0);
    }
}

double* GradBuffer::row(ParamTable t, int64_t r) {
    const int i = static_cast<int>(t);
    if (!touched_[i][r]) {
        touched_[i][r] = 1;
        list_[i].push_back(r);
    }
    return grad_[i].data() + r * width_[i];
}

const double* GradBuffer::row_if_touched(ParamTable t, int64_t r) const {
    const int i = static_cast<int>(t);
    if (r < 0 || r >= rows_[i] || !touched_[i][r]) return nullptr;
    return grad_[i].data() + r * width_[i];
}

bool GradBuffer::is_touched(ParamTable t, int64_t r) const {
    const int i = static_cast<int>(t);
    return r >= 0 && r < rows_[i] && touched_[i][r] != 0;
}

void GradBuffer::mark_rows(ParamTable t, int64_t begin, int64_t end) {
    const int i = static_cast<int>(t);
    for (int64_t r = begin; r < end; ++r) {
        if (!touched_[i][r]) {
            touched_[i][r] = 1;
            list_[i].push_back(r);
        }
    }
}

void GradBuffer::reset() {
    for (int i = 0; i < kNumTables; ++i) {
        double* g = grad_[i].data();
        const int w = width_[i];
        for (int64_t r : list_[i]) {
            std::fill(g + r * w, g + (r + 1) * w, 0.0);
            touched_[i][r] = 0;
        }
        list_[i].clear();
    }
}

OptState make_opt_state(const ModelParams& p, double eps) {
    OptState o;
    o.eps = eps;
    for (ParamTable t : p.tables())
        o.acc[static_cast<int>(t)].assign(p.table(t).size(), 0.0);
    return o;
}

void adagrad_step(ModelParams& p, OptState& opt, const GradBuffer& grads, double lr) {
    for (ParamTable t : p.tables()) {
        const auto& rows = grads.touched_rows(t);
        const int w = grads.width(t);
        double* params = p.table(t).data();
        double* acc = opt.table(t);
        const double* g = grads.data(t);
        const int64_t n = static_cast<int64_t>(rows.size());
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) {
            const int64_t r = rows[i];
            for (int j = 0; j < w; ++j) {
                const double gj = g[r * w + j];
                if (gj == 0.0) continue;  // untouched coordinate of a touched row
                const int64_t k = r * w + j;
                acc[k] += gj * gj;
                params[k] -= lr * gj / (std::sqrt(acc[k]) + opt.eps);
            }
        }
    }
}

}  // namespace kbc
