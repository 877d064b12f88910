#include "ncd/distill.hpp"

#include <cmath>

namespace ncd {

DistillHead make_distill_head(std::size_t out_dim, std::size_t feature_dim, double tau_s,
                              double tau_t, double center_momentum, Rng& rng) {
    if (tau_t >= tau_s) {
        throw Error("make_distill_head: teacher temperature must be below student's");
    }
    DistillHead head;
    const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    head.proj = Matrix(out_dim, feature_dim);
    for (float& x : head.proj.data()) x = static_cast<float>(rng.uniform(-bound, bound));
    head.center = Matrix(1, out_dim);
    head.tau_s = tau_s;
    head.tau_t = tau_t;
    head.center_momentum = center_momentum;
    return head;
}

Matrix head_project(const DistillHead& head, const Matrix& features) {
    if (features.cols() != head.feature_dim()) {
        throw ShapeMismatch("head_project: feature dim " + std::to_string(features.cols()) +
                            " != " + std::to_string(head.feature_dim()));
    }
    return matmul_nt(features, head.proj);
}

Matrix head_forward(const DistillHead& head, const Matrix& features, HeadRole role) {
    Matrix z = head_project(head, features);
    if (role == HeadRole::teacher) {
        for (std::size_t i = 0; i < z.rows(); ++i) {
            float* row = z.row_ptr(i);
            for (std::size_t j = 0; j < z.cols(); ++j) row[j] -= head.center(0, j);
        }
        return softmax_rows(z, head.tau_t);
    }
    return softmax_rows(z, head.tau_s);
}

HeadBackwardResult head_backward(const DistillHead& head, const Matrix& features,
                                 const Matrix& d_logits) {
    if (d_logits.rows() != features.rows() || d_logits.cols() != head.out_dim()) {
        throw ShapeMismatch("head_backward: gradient shape");
    }
    HeadBackwardResult res;
    res.d_features = matmul(d_logits, head.proj);
    res.d_proj = matmul_tn(d_logits, features);
    return res;
}

InstanceLossResult instance_loss(const std::vector<Matrix>& teacher_global_probs,
                                 const std::vector<Matrix>& student_view_probs,
                                 double tau_s) {
    if (teacher_global_probs.size() != 2) {
        throw ViewMismatch("instance_loss: expected exactly 2 teacher global views");
    }
    if (student_view_probs.size() < 2) {
        throw ViewMismatch("instance_loss: student must cover at least the global views");
    }
    const std::size_t n = teacher_global_probs[0].rows();
    const std::size_t m = teacher_global_probs[0].cols();
    for (const Matrix& t : teacher_global_probs) {
        if (t.rows() != n || t.cols() != m) {
            throw ViewMismatch("instance_loss: teacher view shapes disagree");
        }
    }
    for (const Matrix& s : student_view_probs) {
        if (s.rows() != n || s.cols() != m) {
            throw ViewMismatch("instance_loss: student view shapes disagree");
        }
    }
    if (n == 0) throw ViewMismatch("instance_loss: empty batch");

    InstanceLossResult res;
    res.d_student_logits.reserve(student_view_probs.size());
    for (std::size_t v = 0; v < student_view_probs.size(); ++v) {
        res.d_student_logits.push_back(Matrix(n, m));
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (std::size_t tv = 0; tv < 2; ++tv) {
        const Matrix& pt = teacher_global_probs[tv];
        for (std::size_t sv = 0; sv < student_view_probs.size(); ++sv) {
            if (sv == tv) continue; // x' != x: views share the index space
            const Matrix& ps = student_view_probs[sv];
            Matrix& grad = res.d_student_logits[sv];
            for (std::size_t i = 0; i < n; ++i) {
                const float* trow = pt.row_ptr(i);
                const float* srow = ps.row_ptr(i);
                float* grow = grad.row_ptr(i);
                for (std::size_t j = 0; j < m; ++j) {
                    const double p = std::max(static_cast<double>(srow[j]), 1e-12);
                    loss -= static_cast<double>(trow[j]) * std::log(p) * inv_n;
                    grow[j] += static_cast<float>((srow[j] - trow[j]) / tau_s * inv_n);
                }
            }
        }
    }
    res.loss = loss;
    return res;
}

void update_center(DistillHead& head, const Matrix& teacher_logits) {
    if (teacher_logits.rows() == 0) throw EmptyBatch("update_center: empty batch");
    if (teacher_logits.cols() != head.out_dim()) {
        throw ShapeMismatch("update_center: logit width");
    }
    Matrix mean = scale(col_sum(teacher_logits), 1.0 / static_cast<double>(teacher_logits.rows()));
    ema_matrix(head.center, mean, head.center_momentum);
    ensure_finite(head.center, "update_center");
}

void ema_head(DistillHead& target, const DistillHead& source, double momentum) {
    ema_matrix(target.proj, source.proj, momentum);
}

} // namespace ncd
