#pragma once

#include <cstdint>
#include <vector>

#include "ncd/matrix.hpp"
#include "ncd/rng.hpp"

namespace ncd {

// One unit-norm prototype per novel class, EMA-updated from assigned
// features and re-projected onto the hypersphere after every change.
struct PrototypeBank {
    Matrix p;          // K x D, unit rows
    double beta = 0.99;

    std::size_t num_classes() const { return p.rows(); }
    std::size_t dim() const { return p.cols(); }
};

struct PseudoBatch {
    Matrix features;             // n x D
    std::vector<int> labels;     // novel-class indices in [0, K)
    std::vector<float> scores;   // max cosine per sample, in [-1, 1]
};

PrototypeBank init_from_classifier(const Matrix& novel_head_rows, double beta);

// Nearest-prototype pseudo labels by cosine similarity; ties break toward
// the lowest class index.
PseudoBatch assign(const PrototypeBank& bank, const Matrix& features);

// I.i.d. Uniform{0..K-1} labels, used in place of assign for the bootstrap
// batch that guards against single-prototype collapse.
std::vector<int> bootstrap_uniform(std::size_t n, std::size_t k, Rng& rng);

// Per-sample sequential EMA: p_c <- beta * p_c + (1 - beta) * f_i, re-normalized
// after each sample, in batch order.
void ema_update(PrototypeBank& bank, const PseudoBatch& pseudo);

struct PasLossResult {
    double loss = 0.0;
    Matrix d_p; // K x D
};

// Pair-wise angular separation: M = P P^T - 2I, loss = mean over rows of the
// row max. The subgradient follows each row's argmax partner (lowest index
// on ties).
PasLossResult pas_loss(const PrototypeBank& bank);

// Descends the bank along a loss gradient, then re-projects rows onto the
// sphere.
void bank_gradient_step(PrototypeBank& bank, const Matrix& d_p, double lr);

enum class LabelSource { labelled, pseudo };

struct CategoryLossResult {
    double loss = 0.0;     // cls + lambda * pas
    double loss_cls = 0.0;
    double loss_pas = 0.0;
    Matrix d_logits;       // n x C
    Matrix d_p;            // lambda-scaled PAS gradient, K x D
};

// Mean cross-entropy over the combined batch (labelled samples carry base
// ids, pseudo samples carry novel ids offset by num_base) plus
// lambda * pas_loss on the bank.
CategoryLossResult category_loss(const Matrix& logits, const std::vector<int>& labels,
                                 const std::vector<LabelSource>& sources, double lambda,
                                 const PrototypeBank& bank, std::size_t num_base);

} // namespace ncd
