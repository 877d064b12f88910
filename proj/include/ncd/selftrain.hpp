#pragma once

#include <cstdint>
#include <vector>

#include "ncd/clustering.hpp"
#include "ncd/data.hpp"
#include "ncd/eval.hpp"
#include "ncd/network.hpp"
#include "ncd/prototypes.hpp"

namespace ncd {

enum class OfflineMethod { kmeans, spectral };

// Offline pseudo labels for D^u plus the prototype snapshot they were scored
// against. The snapshot stays fixed for a whole training epoch.
struct PseudoLabelSet {
    std::vector<int> labels;          // novel-class indices in [0, K)
    std::vector<float> weights;       // rectification weights in [0, 1] at labelling time
    std::string source;               // "clustering" or "classifier"
    Matrix prototype_snapshot;        // K x D, unit rows
};

struct OfflineLabelResult {
    PseudoLabelSet pseudo;
    PrototypeBank bank; // normalized cluster centers re-positioned as prototypes
};

// Clusters the (frozen) stage-I features of D^u; cluster labels become the
// pseudo labels and L2-normalized cluster mean features become the new
// prototypes.
OfflineLabelResult offline_pseudo_labels(const Matrix& features, std::size_t k,
                                         OfflineMethod method, std::uint64_t seed,
                                         double spectral_sigma = 0.0);

struct RectifiedLossResult {
    double loss = 0.0; // summed, not averaged
    Matrix d_logits;
    std::vector<float> weights; // the detached per-sample weights used
};

// L_rect = sum_i max(0, cos(p_{c_i}, f_i)) * CE(logits_i, c_i + num_base).
// The prototype snapshot is a constant, and so is the cosine weight: it
// gauges pseudo-label reliability and is re-evaluated each call, but no
// gradient flows through it (descending through the weight lets the
// optimizer silence every pseudo-labelled sample instead of fitting it).
RectifiedLossResult rectified_loss(const Matrix& logits, const PseudoLabelSet& pseudo,
                                   const Matrix& features, std::size_t num_base);

struct Stage2LossResult {
    double loss = 0.0;
    Matrix d_labelled_logits;
    Matrix d_unlabelled_logits;
};

// (summed CE over the labelled portion + rectified sum over the unlabelled
// portion) / (n_l + n_u).
Stage2LossResult stage2_loss(const Matrix& labelled_logits, const std::vector<int>& labelled_y,
                             const Matrix& unlabelled_logits, const Matrix& unlabelled_features,
                             const PseudoLabelSet& pseudo, const std::vector<std::size_t>& rows,
                             std::size_t num_base);

struct SelfTrainOptions {
    std::size_t iterations = 2;
    std::size_t epochs_per_iter = 2;
    std::size_t batch_size = 128;
    double lr = 0.05;
    double momentum = 0.9;
    OfflineMethod method = OfflineMethod::kmeans;
    double spectral_sigma = 0.0; // 0 = median heuristic
    std::uint64_t seed = 0;
    bool reinit_head = true;
};

struct IterationMetrics {
    std::size_t iter = 0;
    SplitMetrics metrics;
    double mean_loss = 0.0;
    double pseudo_label_acc = 0.0; // against the eval channel, diagnostics only
};

struct SelfTrainResult {
    std::vector<IterationMetrics> per_iteration;
};

// Iteration 1 labels come from offline clustering (run once); later
// iterations relabel D^u with the classifier's novel rows. Each iteration
// refreezes the prototype snapshot from current per-class feature means and
// jointly optimizes base CE plus the rectified loss with SGD under a cosine
// schedule.
SelfTrainResult self_train(Network& net, const DatasetSplit& split,
                           const SelfTrainOptions& options);

} // namespace ncd
