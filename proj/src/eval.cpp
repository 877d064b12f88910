#include "ncd/eval.hpp"

#include <algorithm>
#include <cmath>

namespace ncd {
namespace {

// Batched to keep peak memory flat on larger splits.
Matrix forward_logits(const Network& net, const Matrix& x) {
    const std::size_t batch = 256;
    Matrix logits(x.rows(), net.num_classes());
    for (std::size_t start = 0; start < x.rows(); start += batch) {
        const std::size_t stop = std::min(x.rows(), start + batch);
        Matrix chunk(stop - start, x.cols());
        for (std::size_t i = start; i < stop; ++i) chunk.set_row(i - start, x.row(i));
        const ForwardResult fwd = forward(net, chunk);
        for (std::size_t i = start; i < stop; ++i) {
            logits.set_row(i, fwd.logits.row(i - start));
        }
    }
    return logits;
}

} // namespace

std::vector<int> predict_novel(const Network& net, const Matrix& x) {
    if (net.num_novel == 0) {
        throw ShapeMismatch("predict_novel: network has no novel head rows");
    }
    const Matrix logits = forward_logits(net, x);
    std::vector<int> pred(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t best = net.num_base;
        for (std::size_t c = net.num_base + 1; c < net.num_classes(); ++c) {
            if (logits(i, c) > logits(i, best)) best = c;
        }
        pred[i] = static_cast<int>(best - net.num_base);
    }
    return pred;
}

std::vector<int> predict_all(const Network& net, const Matrix& x) {
    const Matrix logits = forward_logits(net, x);
    std::vector<int> pred(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        pred[i] = static_cast<int>(argmax_row(logits, i));
    }
    return pred;
}

SplitMetrics eval_splits(const Network& net, const DatasetSplit& split) {
    const std::size_t n_base = split.base_classes.size();
    const std::size_t k = split.novel_classes.size();
    SplitMetrics m;

    if (split.unlabelled.x.rows() > 0 && k > 0) {
        const std::vector<int> pred = predict_novel(net, split.unlabelled.x);
        m.novel_train_report = hungarian_acc(pred, split.eval.unlabelled_truth, k);
        m.novel_train_acc = m.novel_train_report.acc;
    }

    if (split.test.x.rows() > 0) {
        const std::vector<int> pred_all = predict_all(net, split.test.x);
        std::vector<int> new_pred, new_truth;
        std::int64_t old_total = 0, old_correct = 0;
        for (std::size_t i = 0; i < split.test.y.size(); ++i) {
            if (static_cast<std::size_t>(split.test.y[i]) < n_base) {
                old_total += 1;
                if (pred_all[i] == split.test.y[i]) old_correct += 1;
            } else {
                new_truth.push_back(split.test.y[i] - static_cast<int>(n_base));
            }
        }
        if (!new_truth.empty()) {
            new_pred.reserve(new_truth.size());
            // novel test samples score over the novel head block only
            const std::vector<int> pred_nov = predict_novel(net, split.test.x);
            for (std::size_t i = 0; i < split.test.y.size(); ++i) {
                if (static_cast<std::size_t>(split.test.y[i]) >= n_base) {
                    new_pred.push_back(pred_nov[i]);
                }
            }
        }
        m.test_old_acc = old_total > 0
                             ? static_cast<double>(old_correct) / static_cast<double>(old_total)
                             : 0.0;
        std::int64_t new_matched = 0;
        if (!new_pred.empty()) {
            const AccReport rep = hungarian_acc(new_pred, new_truth, k);
            m.test_new_acc = rep.acc;
            new_matched = static_cast<std::int64_t>(
                std::llround(rep.acc * static_cast<double>(new_pred.size())));
        }
        const std::size_t total = split.test.y.size();
        m.test_all_acc =
            total > 0 ? static_cast<double>(old_correct + new_matched) / total : 0.0;
    }
    return m;
}

} // namespace ncd
