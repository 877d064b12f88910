#include "ncd/optimizer.hpp"

#include <cmath>

namespace ncd {
namespace {

std::vector<Matrix> like_params(const std::vector<Matrix*>& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const Matrix* p : params) out.push_back(Matrix(p->rows(), p->cols()));
    return out;
}

} // namespace

OptimizerState make_adamw(const std::vector<Matrix*>& params, double weight_decay,
                          double beta1, double beta2, double eps) {
    OptimizerState s;
    s.kind = OptKind::adamw;
    s.weight_decay = weight_decay;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.m = like_params(params);
    s.v = like_params(params);
    return s;
}

OptimizerState make_sgd(const std::vector<Matrix*>& params, double momentum,
                        double weight_decay) {
    OptimizerState s;
    s.kind = OptKind::sgd;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    s.m = like_params(params);
    return s;
}

void optimizer_step(OptimizerState& state, const std::vector<Matrix*>& params,
                    const std::vector<Matrix*>& grads, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeMismatch("optimizer_step: parameter/gradient count mismatch");
    }
    state.step += 1;
    if (state.kind == OptKind::adamw) {
        const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
        for (std::size_t p = 0; p < params.size(); ++p) {
            Matrix& w = *params[p];
            const Matrix& g = *grads[p];
            ensure_same_shape(w, g, "optimizer_step");
            Matrix& m = state.m[p];
            Matrix& v = state.v[p];
            for (std::size_t t = 0; t < w.size(); ++t) {
                const double gt = g.data()[t];
                double wt = w.data()[t];
                wt *= 1.0 - lr * state.weight_decay;
                const double mt = state.beta1 * m.data()[t] + (1.0 - state.beta1) * gt;
                const double vt = state.beta2 * v.data()[t] + (1.0 - state.beta2) * gt * gt;
                m.data()[t] = static_cast<float>(mt);
                v.data()[t] = static_cast<float>(vt);
                wt -= lr * (mt / bc1) / (std::sqrt(vt / bc2) + state.eps);
                w.data()[t] = static_cast<float>(wt);
            }
            ensure_finite(w, "optimizer_step(adamw)");
        }
    } else {
        for (std::size_t p = 0; p < params.size(); ++p) {
            Matrix& w = *params[p];
            const Matrix& g = *grads[p];
            ensure_same_shape(w, g, "optimizer_step");
            Matrix& buf = state.m[p];
            for (std::size_t t = 0; t < w.size(); ++t) {
                const double gt = g.data()[t] + state.weight_decay * w.data()[t];
                const double bt = state.momentum * buf.data()[t] + gt;
                buf.data()[t] = static_cast<float>(bt);
                w.data()[t] = static_cast<float>(w.data()[t] - lr * bt);
            }
            ensure_finite(w, "optimizer_step(sgd)");
        }
    }
}

double lr_at(const LrSchedule& schedule, std::int64_t step) {
    if (step < 0 || step > schedule.total_steps) {
        throw Error("lr_at: step outside [0, total_steps]");
    }
    if (step < schedule.warmup_steps) {
        return schedule.base_lr * static_cast<double>(step + 1) /
               static_cast<double>(schedule.warmup_steps);
    }
    const std::int64_t span = schedule.total_steps - schedule.warmup_steps;
    if (span <= 0) return schedule.base_lr;
    const double t = static_cast<double>(step - schedule.warmup_steps) /
                     static_cast<double>(span);
    return schedule.floor_lr +
           (schedule.base_lr - schedule.floor_lr) * 0.5 * (1.0 + std::cos(M_PI * t));
}

} // namespace ncd
