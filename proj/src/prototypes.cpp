#include "ncd/prototypes.hpp"

#include <cmath>

namespace ncd {

PrototypeBank init_from_classifier(const Matrix& novel_head_rows, double beta) {
    if (beta < 0.0 || beta >= 1.0) throw Error("init_from_classifier: beta must be in [0, 1)");
    PrototypeBank bank;
    bank.p = novel_head_rows;
    bank.beta = beta;
    l2_normalize_rows(bank.p);
    return bank;
}

PseudoBatch assign(const PrototypeBank& bank, const Matrix& features) {
    const Matrix cos = pairwise_cosine(features, bank.p); // n x K
    PseudoBatch out;
    out.features = features;
    out.labels.resize(features.rows());
    out.scores.resize(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < bank.num_classes(); ++c) {
            if (cos(i, c) > cos(i, best)) best = c; // ties keep the lowest index
        }
        out.labels[i] = static_cast<int>(best);
        out.scores[i] = cos(i, best);
    }
    return out;
}

std::vector<int> bootstrap_uniform(std::size_t n, std::size_t k, Rng& rng) {
    if (n < 1 || k < 1) throw Error("bootstrap_uniform: n and k must be >= 1");
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(rng.below(k));
    }
    return labels;
}

void ema_update(PrototypeBank& bank, const PseudoBatch& pseudo) {
    if (pseudo.features.cols() != bank.dim()) {
        throw ShapeMismatch("ema_update: feature dim");
    }
    if (pseudo.labels.size() != pseudo.features.rows()) {
        throw ShapeMismatch("ema_update: label count");
    }
    for (std::size_t i = 0; i < pseudo.features.rows(); ++i) {
        const int c = pseudo.labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= bank.num_classes()) {
            throw LabelOutOfRange("ema_update: label " + std::to_string(c));
        }
        float* prow = bank.p.row_ptr(c);
        const float* frow = pseudo.features.row_ptr(i);
        for (std::size_t j = 0; j < bank.dim(); ++j) {
            prow[j] = static_cast<float>(bank.beta * prow[j] + (1.0 - bank.beta) * frow[j]);
        }
        const double norm = l2_norm(prow, bank.dim());
        if (norm < 1e-12) {
            throw ZeroVector("ema_update: prototype " + std::to_string(c) +
                             " cancelled to near zero");
        }
        for (std::size_t j = 0; j < bank.dim(); ++j) {
            prow[j] = static_cast<float>(prow[j] / norm);
        }
    }
}

PasLossResult pas_loss(const PrototypeBank& bank) {
    const std::size_t k = bank.num_classes();
    const std::size_t d = bank.dim();
    PasLossResult res;
    res.d_p = Matrix(k, d);
    if (k == 0) throw ShapeMismatch("pas_loss: empty bank");

    // M = P P^T - 2I without any normalization, so the ambient gradient is
    // exact for finite-difference checks.
    Matrix m = matmul_nt(bank.p, bank.p);
    for (std::size_t i = 0; i < k; ++i) m(i, i) -= 2.0f;

    const double inv_k = 1.0 / static_cast<double>(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (m(i, j) > m(i, best)) best = j;
        }
        loss += static_cast<double>(m(i, best)) * inv_k;
        float* gi = res.d_p.row_ptr(i);
        if (best == i) {
            // d(P_i . P_i - 2)/dP_i = 2 P_i
            const float* pi = bank.p.row_ptr(i);
            for (std::size_t t = 0; t < d; ++t) {
                gi[t] += static_cast<float>(2.0 * inv_k * pi[t]);
            }
        } else {
            const float* pi = bank.p.row_ptr(i);
            const float* pj = bank.p.row_ptr(best);
            float* gj = res.d_p.row_ptr(best);
            for (std::size_t t = 0; t < d; ++t) {
                gi[t] += static_cast<float>(inv_k * pj[t]);
                gj[t] += static_cast<float>(inv_k * pi[t]);
            }
        }
    }
    res.loss = loss;
    return res;
}

void bank_gradient_step(PrototypeBank& bank, const Matrix& d_p, double lr) {
    ensure_same_shape(bank.p, d_p, "bank_gradient_step");
    for (std::size_t t = 0; t < bank.p.size(); ++t) {
        bank.p.data()[t] = static_cast<float>(bank.p.data()[t] - lr * d_p.data()[t]);
    }
    l2_normalize_rows(bank.p);
}

CategoryLossResult category_loss(const Matrix& logits, const std::vector<int>& labels,
                                 const std::vector<LabelSource>& sources, double lambda,
                                 const PrototypeBank& bank, std::size_t num_base) {
    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    if (labels.size() != n || sources.size() != n) {
        throw ShapeMismatch("category_loss: label/source counts");
    }
    if (n == 0) throw EmptyBatch("category_loss: empty batch");
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw LabelOutOfRange("category_loss: label " + std::to_string(y));
        }
        if (sources[i] == LabelSource::labelled && static_cast<std::size_t>(y) >= num_base) {
            throw LabelOutOfRange("category_loss: labelled sample with novel id");
        }
        if (sources[i] == LabelSource::pseudo && static_cast<std::size_t>(y) < num_base) {
            throw LabelOutOfRange("category_loss: pseudo sample without novel offset");
        }
    }

    const Matrix logp = log_softmax_rows(logits);
    const Matrix prob = softmax_rows(logits, 1.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    CategoryLossResult res;
    res.d_logits = Matrix(n, c);
    double cls = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cls -= static_cast<double>(logp(i, labels[i])) * inv_n;
        const float* prow = prob.row_ptr(i);
        float* grow = res.d_logits.row_ptr(i);
        for (std::size_t j = 0; j < c; ++j) {
            grow[j] = static_cast<float>(inv_n * prow[j]);
        }
        grow[labels[i]] -= static_cast<float>(inv_n);
    }
    res.loss_cls = cls;

    PasLossResult pas = pas_loss(bank);
    res.loss_pas = pas.loss;
    res.d_p = scale(pas.d_p, lambda);
    res.loss = cls + lambda * pas.loss;
    return res;
}

} // namespace ncd
