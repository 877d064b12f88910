#pragma once

#include <cstddef>
#include <vector>

#include "ncd/matrix.hpp"
#include "ncd/rng.hpp"

namespace ncd {

enum class Activation { relu };

// Feed-forward feature extractor with a unified (base + novel) linear
// classifier head on the last-layer features. The final feature layer has no
// activation so features can point anywhere before normalization. Classifier
// rows [0, num_base) are base classes, rows [num_base, num_base + num_novel)
// are novel classes.
struct Network {
    std::vector<std::size_t> widths; // input -> hidden... -> embedding dim
    Activation activation = Activation::relu;
    std::size_t num_base = 0;
    std::size_t num_novel = 0;

    std::vector<Matrix> layer_w; // layer l: widths[l+1] x widths[l]
    std::vector<Matrix> layer_b; // 1 x widths[l+1]
    Matrix head_w;               // C x D
    Matrix head_b;               // 1 x C

    std::size_t input_dim() const { return widths.front(); }
    std::size_t embed_dim() const { return widths.back(); }
    std::size_t num_classes() const { return num_base + num_novel; }

    // All trainable parameters in a fixed order (layer w/b pairs, then head).
    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;

    // Novel-class rows of the classifier head as a K x D matrix.
    Matrix novel_head_rows() const;
};

// Hidden layers get uniform fan-in init; the classifier head is
// Uniform(-1/sqrt(D), 1/sqrt(D)) with zero bias.
Network make_network(const std::vector<std::size_t>& widths, std::size_t num_base,
                     std::size_t num_novel, Rng& rng);

// Re-draws the classifier head in place (stage II retrains it from scratch).
void reinit_head(Network& net, Rng& rng);

struct ForwardTape {
    Matrix input;                   // n x input_dim
    std::vector<Matrix> activations; // post-activation output of every layer
};

struct ForwardResult {
    Matrix features; // n x D
    Matrix logits;   // n x C
    ForwardTape tape;
};

struct Gradients {
    std::vector<Matrix> layer_w;
    std::vector<Matrix> layer_b;
    Matrix head_w;
    Matrix head_b;

    std::vector<Matrix*> flat();
    void accumulate(const Gradients& other);
    void scale_all(double s);
};

Gradients zero_gradients(const Network& net);

ForwardResult forward(const Network& net, const Matrix& batch);
// Features only; no tape retained.
Matrix forward_features(const Network& net, const Matrix& batch);

// Upstream gradients may arrive on the feature path, the logit path, or both
// (pass an empty matrix for an absent path).
Gradients backward(const Network& net, const ForwardTape& tape, const Matrix& d_features,
                   const Matrix& d_logits);

// target <- m * target + (1 - m) * source for every parameter.
void ema_params(Network& target, const Network& source, double momentum);

} // namespace ncd
