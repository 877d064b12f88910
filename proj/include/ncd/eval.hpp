#pragma once

#include "ncd/clustering.hpp"
#include "ncd/data.hpp"
#include "ncd/network.hpp"

namespace ncd {

struct SplitMetrics {
    double novel_train_acc = 0.0; // Hungarian-matched over the novel head rows on D^u
    double test_old_acc = 0.0;    // plain accuracy on base-class test samples
    double test_new_acc = 0.0;    // Hungarian-matched on novel-class test samples
    double test_all_acc = 0.0;    // (correct old + matched new) / total
    AccReport novel_train_report;
};

// Classifier argmax over the novel head rows, as indices in [0, K).
std::vector<int> predict_novel(const Network& net, const Matrix& x);
// Classifier argmax over all C rows.
std::vector<int> predict_all(const Network& net, const Matrix& x);

// Old classes score by identity matching (their labels are known); novel
// classes are matched by the Hungarian algorithm fitted on the evaluated
// predictions themselves.
SplitMetrics eval_splits(const Network& net, const DatasetSplit& split);

} // namespace ncd
