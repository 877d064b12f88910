#include "ncd/selftrain.hpp"

#include <algorithm>
#include <cmath>

#include "ncd/optimizer.hpp"

namespace ncd {
namespace {

Matrix normalized_copy(const Matrix& m) {
    Matrix out = m;
    l2_normalize_rows(out);
    return out;
}

std::vector<float> rect_weights(const Matrix& snapshot, const Matrix& features,
                                const std::vector<int>& labels) {
    std::vector<float> w(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        const double fnorm = l2_norm(features.row_ptr(i), features.cols());
        if (fnorm < 1e-12) throw ZeroVector("rect_weights: zero feature row");
        const double cos =
            dot(snapshot.row_ptr(c), features.row_ptr(i), features.cols()) / fnorm;
        w[i] = static_cast<float>(std::max(0.0, cos));
    }
    return w;
}

// Shared core of rectified_loss and stage2_loss: summed CE, each sample
// scaled by its detached cosine weight.
void rect_accumulate(const Matrix& logits, const Matrix& features, const Matrix& snapshot,
                     const std::vector<int>& novel_labels, std::size_t num_base,
                     double grad_scale, double& loss, Matrix& d_logits,
                     std::vector<float>* weights_out) {
    const std::size_t n = logits.rows();
    const std::size_t c_total = logits.cols();
    const Matrix logp = log_softmax_rows(logits);
    const Matrix prob = softmax_rows(logits, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = novel_labels[i];
        if (c < 0 || num_base + c >= c_total) {
            throw LabelOutOfRange("rectified loss: pseudo label " + std::to_string(c));
        }
        const std::size_t g = num_base + static_cast<std::size_t>(c);
        const double fnorm = l2_norm(features.row_ptr(i), features.cols());
        if (fnorm < 1e-12) throw ZeroVector("rectified loss: zero feature row");
        const double cos =
            dot(snapshot.row_ptr(c), features.row_ptr(i), features.cols()) / fnorm;
        const double w = std::max(0.0, cos);
        if (weights_out) weights_out->push_back(static_cast<float>(w));
        const double ce = -static_cast<double>(logp(i, g));
        loss += w * ce;
        if (w <= 0.0) continue;

        const float* prow = prob.row_ptr(i);
        float* grow = d_logits.row_ptr(i);
        for (std::size_t j = 0; j < c_total; ++j) {
            grow[j] += static_cast<float>(grad_scale * w * prow[j]);
        }
        grow[g] -= static_cast<float>(grad_scale * w);
    }
}

} // namespace

OfflineLabelResult offline_pseudo_labels(const Matrix& features, std::size_t k,
                                         OfflineMethod method, std::uint64_t seed,
                                         double spectral_sigma) {
    ClusterResult clusters;
    if (method == OfflineMethod::kmeans) {
        clusters = kmeans(features, k, seed);
    } else {
        const double sigma =
            spectral_sigma > 0.0 ? spectral_sigma : median_pairwise_distance(features);
        clusters = spectral(features, k, sigma, seed);
    }

    OfflineLabelResult res;
    res.bank.p = normalized_copy(cluster_means(features, clusters.labels, k));
    res.bank.beta = 0.99;
    res.pseudo.labels = clusters.labels;
    res.pseudo.source = "clustering";
    res.pseudo.prototype_snapshot = res.bank.p;
    res.pseudo.weights = rect_weights(res.bank.p, features, clusters.labels);
    return res;
}

RectifiedLossResult rectified_loss(const Matrix& logits, const PseudoLabelSet& pseudo,
                                   const Matrix& features, std::size_t num_base) {
    if (pseudo.labels.size() != logits.rows() || features.rows() != logits.rows()) {
        throw ShapeMismatch("rectified_loss: batch sizes disagree");
    }
    RectifiedLossResult res;
    res.d_logits = Matrix(logits.rows(), logits.cols());
    rect_accumulate(logits, features, pseudo.prototype_snapshot, pseudo.labels, num_base,
                    1.0, res.loss, res.d_logits, &res.weights);
    return res;
}

Stage2LossResult stage2_loss(const Matrix& labelled_logits, const std::vector<int>& labelled_y,
                             const Matrix& unlabelled_logits, const Matrix& unlabelled_features,
                             const PseudoLabelSet& pseudo, const std::vector<std::size_t>& rows,
                             std::size_t num_base) {
    const std::size_t n_l = labelled_logits.rows();
    const std::size_t n_u = unlabelled_logits.rows();
    if (n_l + n_u == 0) throw EmptyBatch("stage2_loss: both portions empty");
    if (labelled_y.size() != n_l || rows.size() != n_u ||
        unlabelled_features.rows() != n_u) {
        throw ShapeMismatch("stage2_loss: portion sizes disagree");
    }
    const double inv_total = 1.0 / static_cast<double>(n_l + n_u);

    Stage2LossResult res;
    res.d_labelled_logits = Matrix(n_l, labelled_logits.cols());
    res.d_unlabelled_logits = Matrix(n_u, unlabelled_logits.cols());

    double total = 0.0;
    if (n_l > 0) {
        const Matrix logp = log_softmax_rows(labelled_logits);
        const Matrix prob = softmax_rows(labelled_logits, 1.0);
        for (std::size_t i = 0; i < n_l; ++i) {
            const int y = labelled_y[i];
            if (y < 0 || static_cast<std::size_t>(y) >= num_base) {
                throw LabelOutOfRange("stage2_loss: labelled id " + std::to_string(y));
            }
            total -= static_cast<double>(logp(i, y));
            const float* prow = prob.row_ptr(i);
            float* grow = res.d_labelled_logits.row_ptr(i);
            for (std::size_t j = 0; j < labelled_logits.cols(); ++j) {
                grow[j] = static_cast<float>(inv_total * prow[j]);
            }
            grow[y] -= static_cast<float>(inv_total);
        }
    }
    if (n_u > 0) {
        std::vector<int> batch_labels(n_u);
        for (std::size_t i = 0; i < n_u; ++i) {
            if (rows[i] >= pseudo.labels.size()) {
                throw LabelOutOfRange("stage2_loss: pseudo row out of range");
            }
            batch_labels[i] = pseudo.labels[rows[i]];
        }
        rect_accumulate(unlabelled_logits, unlabelled_features, pseudo.prototype_snapshot,
                        batch_labels, num_base, inv_total, total,
                        res.d_unlabelled_logits, nullptr);
    }
    res.loss = total * inv_total;
    return res;
}

SelfTrainResult self_train(Network& net, const DatasetSplit& split,
                           const SelfTrainOptions& options) {
    SelfTrainResult result;
    const std::size_t k = split.novel_classes.size();
    const std::size_t num_base = split.base_classes.size();

    if (options.iterations == 0 || k == 0 || split.unlabelled.x.rows() == 0) {
        IterationMetrics m0;
        m0.iter = 0;
        m0.metrics = eval_splits(net, split);
        result.per_iteration.push_back(std::move(m0));
        return result;
    }

    // Offline pseudo labels: clustering runs once, at the start.
    Matrix feats = forward_features(net, split.unlabelled.x);
    l2_normalize_rows(feats);
    OfflineLabelResult offline = offline_pseudo_labels(
        feats, k, options.method, options.seed, options.spectral_sigma);

    {
        // Iteration 0 record: pseudo-label quality on D^u before any
        // self-training, plus the incoming model's test metrics.
        IterationMetrics m0;
        m0.iter = 0;
        m0.metrics = eval_splits(net, split);
        m0.metrics.novel_train_report =
            hungarian_acc(offline.pseudo.labels, split.eval.unlabelled_truth, k);
        m0.metrics.novel_train_acc = m0.metrics.novel_train_report.acc;
        m0.pseudo_label_acc = m0.metrics.novel_train_acc;
        result.per_iteration.push_back(std::move(m0));
    }

    Rng rng(options.seed, 0x73656c66ULL);
    if (options.reinit_head) {
        Rng head_rng = rng.child(1);
        reinit_head(net, head_rng);
    }

    PseudoLabelSet pseudo = offline.pseudo;

    std::vector<Matrix*> params = net.parameters();
    OptimizerState opt = make_sgd(params, options.momentum, 0.0);

    const std::size_t n_l = split.labelled.x.rows();
    const std::size_t n_u = split.unlabelled.x.rows();

    for (std::size_t iter = 1; iter <= options.iterations; ++iter) {
        if (iter > 1) {
            // Later iterations relabel D^u with the explicit classifier.
            pseudo.labels = predict_novel(net, split.unlabelled.x);
            pseudo.source = "classifier";
        }

        // Refreeze the prototype snapshot from current per-class feature
        // means; empty classes keep their previous prototype row.
        Matrix cur_feats = forward_features(net, split.unlabelled.x);
        l2_normalize_rows(cur_feats);
        {
            Matrix means = cluster_means(cur_feats, pseudo.labels, k);
            for (std::size_t c = 0; c < k; ++c) {
                if (l2_norm(means.row_ptr(c), means.cols()) >= 1e-12) {
                    Matrix row = means.row(c);
                    l2_normalize_rows(row);
                    pseudo.prototype_snapshot.set_row(c, row);
                }
            }
        }
        pseudo.weights = rect_weights(pseudo.prototype_snapshot, cur_feats, pseudo.labels);

        const std::size_t steps_per_epoch =
            (n_l + n_u + options.batch_size - 1) / options.batch_size;
        LrSchedule schedule{options.lr, 0.0, 0,
                            static_cast<std::int64_t>(options.epochs_per_iter * steps_per_epoch)};
        std::int64_t step = 0;

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t epoch = 0; epoch < options.epochs_per_iter; ++epoch) {
            // tag >= n_l means unlabelled row (tag - n_l)
            std::vector<std::size_t> order(n_l + n_u);
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng shuffle_rng = rng.child(0x1000 + iter * 100 + epoch);
            shuffle_rng.shuffle(order);

            for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
                const std::size_t stop = std::min(order.size(), start + options.batch_size);
                std::vector<std::size_t> lab_rows, unlab_rows;
                for (std::size_t t = start; t < stop; ++t) {
                    if (order[t] < n_l) {
                        lab_rows.push_back(order[t]);
                    } else {
                        unlab_rows.push_back(order[t] - n_l);
                    }
                }

                Matrix lab_x(lab_rows.size(), split.labelled.x.cols());
                std::vector<int> lab_y(lab_rows.size());
                for (std::size_t t = 0; t < lab_rows.size(); ++t) {
                    lab_x.set_row(t, split.labelled.x.row(lab_rows[t]));
                    lab_y[t] = split.labelled.y[lab_rows[t]];
                }
                Matrix unlab_x(unlab_rows.size(), split.unlabelled.x.cols());
                for (std::size_t t = 0; t < unlab_rows.size(); ++t) {
                    unlab_x.set_row(t, split.unlabelled.x.row(unlab_rows[t]));
                }

                Gradients grads = zero_gradients(net);
                Matrix lab_logits(0, 0), unlab_logits(0, 0), unlab_feats(0, 0);
                ForwardResult lab_fwd, unlab_fwd;
                if (!lab_rows.empty()) {
                    lab_fwd = forward(net, lab_x);
                    lab_logits = lab_fwd.logits;
                }
                if (!unlab_rows.empty()) {
                    unlab_fwd = forward(net, unlab_x);
                    unlab_logits = unlab_fwd.logits;
                    unlab_feats = unlab_fwd.features;
                }

                const Stage2LossResult loss =
                    stage2_loss(lab_logits, lab_y, unlab_logits, unlab_feats, pseudo,
                                unlab_rows, num_base);
                loss_sum += loss.loss;
                loss_count += 1;

                if (!lab_rows.empty()) {
                    grads.accumulate(
                        backward(net, lab_fwd.tape, Matrix(), loss.d_labelled_logits));
                }
                if (!unlab_rows.empty()) {
                    grads.accumulate(backward(net, unlab_fwd.tape, Matrix(),
                                              loss.d_unlabelled_logits));
                }

                const double lr = lr_at(schedule, step++);
                std::vector<Matrix*> grad_ptrs = grads.flat();
                optimizer_step(opt, params, grad_ptrs, lr);
            }
        }

        IterationMetrics m;
        m.iter = iter;
        m.metrics = eval_splits(net, split);
        m.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        m.pseudo_label_acc =
            hungarian_acc(pseudo.labels, split.eval.unlabelled_truth, k).acc;
        result.per_iteration.push_back(std::move(m));
    }
    return result;
}

} // namespace ncd
