#pragma once

#include <cstdint>
#include <vector>

#include "ncd/matrix.hpp"

namespace ncd {

enum class OptKind { adamw, sgd };

// AdamW: decoupled weight decay, then bias-corrected moment step.
// SGD: momentum buffer update, then descent; weight decay folded into the
// gradient (L2 style).
struct OptimizerState {
    OptKind kind = OptKind::adamw;
    std::int64_t step = 0;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.0;

    std::vector<Matrix> m; // first moments / momentum buffers
    std::vector<Matrix> v; // second moments (adamw only)
};

OptimizerState make_adamw(const std::vector<Matrix*>& params, double weight_decay = 0.0,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
OptimizerState make_sgd(const std::vector<Matrix*>& params, double momentum = 0.0,
                        double weight_decay = 0.0);

void optimizer_step(OptimizerState& state, const std::vector<Matrix*>& params,
                    const std::vector<Matrix*>& grads, double lr);

// Linear warmup to the base rate, then cosine decay to the floor.
struct LrSchedule {
    double base_lr = 0.0;
    double floor_lr = 0.0;
    std::int64_t warmup_steps = 0;
    std::int64_t total_steps = 0;
};

double lr_at(const LrSchedule& schedule, std::int64_t step);

} // namespace ncd
