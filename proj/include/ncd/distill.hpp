#pragma once

#include <vector>

#include "ncd/matrix.hpp"
#include "ncd/rng.hpp"

namespace ncd {

enum class HeadRole { teacher, student };

// Projection head for self-distillation. The student sharpens with tau_s,
// the teacher subtracts a running center and sharpens harder with tau_t.
struct DistillHead {
    Matrix proj;   // out_dim x D
    Matrix center; // 1 x out_dim, used by the teacher only
    double tau_s = 0.1;
    double tau_t = 0.04;
    double center_momentum = 0.9;

    std::size_t out_dim() const { return proj.rows(); }
    std::size_t feature_dim() const { return proj.cols(); }
};

DistillHead make_distill_head(std::size_t out_dim, std::size_t feature_dim, double tau_s,
                              double tau_t, double center_momentum, Rng& rng);

// Raw projection logits z = f * proj^T.
Matrix head_project(const DistillHead& head, const Matrix& features);

// Probability rows: student softmax(z / tau_s); teacher softmax((z - center) / tau_t).
Matrix head_forward(const DistillHead& head, const Matrix& features, HeadRole role);

struct HeadBackwardResult {
    Matrix d_features;
    Matrix d_proj;
};

// Chains d(loss)/d(projection logits) back to features and projection weights.
HeadBackwardResult head_backward(const DistillHead& head, const Matrix& features,
                                 const Matrix& d_logits);

struct InstanceLossResult {
    double loss = 0.0;
    // One n x out_dim gradient per student view, w.r.t. the projection logits.
    std::vector<Matrix> d_student_logits;
};

// Cross-entropy from each teacher global view to every other student view,
// averaged over the batch. The teacher side is a constant. Log arguments are
// floored at 1e-12.
InstanceLossResult instance_loss(const std::vector<Matrix>& teacher_global_probs,
                                 const std::vector<Matrix>& student_view_probs,
                                 double tau_s);

// center <- momentum * center + (1 - momentum) * batch mean of teacher logits.
void update_center(DistillHead& head, const Matrix& teacher_logits);

void ema_head(DistillHead& target, const DistillHead& source, double momentum);

} // namespace ncd
