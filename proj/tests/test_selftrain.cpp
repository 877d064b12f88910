#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncd/pipeline.hpp"
#include "ncd/selftrain.hpp"
#include "ref_math.hpp"

using namespace ncd;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (float& x : m.data()) x = static_cast<float>(scale * rng.normal());
    return m;
}

Matrix random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m = random_matrix(rows, cols, rng);
    l2_normalize_rows(m);
    return m;
}

PseudoLabelSet make_pseudo(const Matrix& snapshot, std::vector<int> labels) {
    PseudoLabelSet p;
    p.labels = std::move(labels);
    p.source = "clustering";
    p.prototype_snapshot = snapshot;
    p.weights.assign(p.labels.size(), 1.0f);
    return p;
}

} // namespace

TEST_CASE("offline pseudo labels on separated blobs") {
    Dataset ds = synth_gaussians(0, 3, 16, 40, 10.0, 3);
    Matrix feats = ds.train_x;
    OfflineLabelResult res = offline_pseudo_labels(feats, 3, OfflineMethod::kmeans, 3);
    CHECK(hungarian_acc(res.pseudo.labels, ds.train_y, 3).acc == doctest::Approx(1.0));
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(std::fabs(l2_norm(res.bank.p.row_ptr(c), res.bank.p.cols()) - 1.0) <= 1e-6);
    }
    for (float w : res.pseudo.weights) {
        CHECK(w >= 0.0f);
        CHECK(w <= 1.0f);
    }

    // k = 1: single prototype is the normalized mean
    OfflineLabelResult one = offline_pseudo_labels(feats, 1, OfflineMethod::kmeans, 3);
    for (int lab : one.pseudo.labels) CHECK(lab == 0);
    Matrix mean = cluster_means(feats, one.pseudo.labels, 1);
    l2_normalize_rows(mean);
    for (std::size_t j = 0; j < mean.cols(); ++j) {
        CHECK(one.bank.p(0, j) == doctest::Approx(mean(0, j)).epsilon(1e-5));
    }
}

TEST_CASE("offline spectral labels separate rings") {
    Rng rng(4);
    const std::size_t per_ring = 60;
    Matrix x(2 * per_ring, 2);
    std::vector<int> truth;
    for (std::size_t i = 0; i < 2 * per_ring; ++i) {
        const int ring = i < per_ring ? 0 : 1;
        const double r = (ring == 0 ? 1.0 : 4.0) + 0.05 * rng.normal();
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        x(i, 0) = static_cast<float>(r * std::cos(a));
        x(i, 1) = static_cast<float>(r * std::sin(a));
        truth.push_back(ring);
    }
    OfflineLabelResult res = offline_pseudo_labels(x, 2, OfflineMethod::spectral, 4, 0.5);
    CHECK(hungarian_acc(res.pseudo.labels, truth, 2).acc >= 0.95);
}

TEST_CASE("rectified loss with unit weights reduces to summed CE") {
    Rng rng(5);
    const std::size_t n = 6, num_base = 2, k = 3, d = 4;
    Matrix snapshot = random_unit_rows(k, d, rng);
    std::vector<int> labels{0, 1, 2, 0, 1, 2};

    // features aligned exactly with their prototypes give weight 1
    Matrix feats(n, d);
    for (std::size_t i = 0; i < n; ++i) feats.set_row(i, snapshot.row(labels[i]));

    Matrix logits = random_matrix(n, num_base + k, rng);
    PseudoLabelSet pseudo = make_pseudo(snapshot, labels);
    RectifiedLossResult res = rectified_loss(logits, pseudo, feats, num_base);

    double ce = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        refm::dvec row(num_base + k);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = logits(i, j);
        ce -= refm::ref_log_softmax_at(row, num_base + labels[i]);
    }
    CHECK(res.loss == doctest::Approx(ce).epsilon(1e-5));
}

TEST_CASE("orthogonal feature contributes nothing") {
    Matrix snapshot(1, 3, {1.0f, 0.0f, 0.0f});
    Matrix feats(1, 3, {0.0f, 1.0f, 0.0f});
    Matrix logits(1, 3, {0.3f, -0.2f, 0.9f});
    PseudoLabelSet pseudo = make_pseudo(snapshot, {0});
    RectifiedLossResult res = rectified_loss(logits, pseudo, feats, 2);
    CHECK(res.loss == doctest::Approx(0.0));
    CHECK(res.weights[0] == 0.0f);
    for (float g : res.d_logits.data()) CHECK(g == 0.0f);
}

TEST_CASE("rectified loss gradient matches finite differences") {
    Rng rng(6);
    const std::size_t n = 5, num_base = 2, k = 3, d = 4, c_total = num_base + k;
    Matrix snapshot = random_unit_rows(k, d, rng);
    std::vector<int> labels{0, 2, 1, 0, 2};
    // bias features toward their prototypes so the weights stay positive
    Matrix feats(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            feats(i, j) = static_cast<float>(snapshot(labels[i], j) + 0.3 * rng.normal());
        }
    }
    Matrix logits = random_matrix(n, c_total, rng);
    PseudoLabelSet pseudo = make_pseudo(snapshot, labels);
    RectifiedLossResult res = rectified_loss(logits, pseudo, feats, num_base);

    // weights are detached: the FD loss keeps them frozen at the base point
    const refm::dvec weights = refm::ref_rect_weights(refm::from_matrix(feats),
                                                      refm::from_matrix(snapshot), labels);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(res.weights[i] == doctest::Approx(weights[i]).epsilon(1e-5));
    }
    refm::dvec flat;
    for (float x : logits.data()) flat.push_back(x);
    auto loss = [&](const refm::dvec& v) {
        refm::dmat lg(n, refm::dvec(c_total));
        std::size_t t = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c_total; ++j) lg[i][j] = v[t++];
        }
        return refm::ref_rect_sum(lg, weights, labels, num_base);
    };

    double max_rel = 0.0;
    std::size_t t = 0;
    for (float an : res.d_logits.data()) {
        const double fd = refm::central_diff(loss, flat, t++, 1e-3);
        if (std::fabs(fd) > 1e-6 || std::fabs(an) > 1e-6) {
            max_rel = std::max(max_rel, refm::rel_err(fd, an));
        }
    }
    CHECK(max_rel <= 1e-4);
}

TEST_CASE("stage2 loss composes portions") {
    Rng rng(7);
    const std::size_t num_base = 3, k = 2, d = 4, c_total = 5;
    Matrix snapshot = random_unit_rows(k, d, rng);

    // empty unlabelled portion: mean CE over the labelled batch
    Matrix lab_logits = random_matrix(4, c_total, rng);
    std::vector<int> lab_y{0, 1, 2, 1};
    PseudoLabelSet pseudo = make_pseudo(snapshot, {0, 1});
    Stage2LossResult only_lab = stage2_loss(lab_logits, lab_y, Matrix(0, c_total),
                                            Matrix(0, d), pseudo, {}, num_base);
    double ce = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        refm::dvec row(c_total);
        for (std::size_t j = 0; j < c_total; ++j) row[j] = lab_logits(i, j);
        ce -= refm::ref_log_softmax_at(row, lab_y[i]);
    }
    CHECK(only_lab.loss == doctest::Approx(ce / 4.0).epsilon(1e-6));

    // mixed batch equals the hand-assembled sum of parts
    Matrix unlab_logits = random_matrix(3, c_total, rng);
    Matrix unlab_feats(3, d);
    std::vector<std::size_t> rows{0, 1, 1};
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            unlab_feats(i, j) =
                static_cast<float>(snapshot(pseudo.labels[rows[i]], j) + 0.2 * rng.normal());
        }
    }
    Stage2LossResult mixed = stage2_loss(lab_logits, lab_y, unlab_logits, unlab_feats,
                                         pseudo, rows, num_base);
    std::vector<int> batch_labels{pseudo.labels[0], pseudo.labels[1], pseudo.labels[1]};
    const refm::dvec w = refm::ref_rect_weights(refm::from_matrix(unlab_feats),
                                                refm::from_matrix(snapshot), batch_labels);
    const double rect =
        refm::ref_rect_sum(refm::from_matrix(unlab_logits), w, batch_labels, num_base);
    CHECK(mixed.loss == doctest::Approx((ce + rect) / 7.0).epsilon(1e-5));

    CHECK_THROWS_AS(stage2_loss(Matrix(0, c_total), {}, Matrix(0, c_total), Matrix(0, d),
                                pseudo, {}, num_base),
                    EmptyBatch);
}

TEST_CASE("stage2 loss is invariant to within-portion sample order") {
    Rng rng(8);
    const std::size_t num_base = 2, k = 2, d = 3, c_total = 4;
    Matrix snapshot = random_unit_rows(k, d, rng);
    PseudoLabelSet pseudo = make_pseudo(snapshot, {0, 1, 1, 0});

    Matrix lab_logits = random_matrix(3, c_total, rng);
    std::vector<int> lab_y{0, 1, 0};
    Matrix unlab_logits = random_matrix(4, c_total, rng);
    Matrix unlab_feats = random_matrix(4, d, rng);
    std::vector<std::size_t> rows{0, 1, 2, 3};

    Stage2LossResult a = stage2_loss(lab_logits, lab_y, unlab_logits, unlab_feats, pseudo,
                                     rows, num_base);

    // reverse both portions
    Matrix lab_r(3, c_total), unlab_r(4, c_total), feats_r(4, d);
    std::vector<int> lab_y_r{lab_y[2], lab_y[1], lab_y[0]};
    for (std::size_t i = 0; i < 3; ++i) lab_r.set_row(i, lab_logits.row(2 - i));
    for (std::size_t i = 0; i < 4; ++i) {
        unlab_r.set_row(i, unlab_logits.row(3 - i));
        feats_r.set_row(i, unlab_feats.row(3 - i));
    }
    std::vector<std::size_t> rows_r{3, 2, 1, 0};
    Stage2LossResult b = stage2_loss(lab_r, lab_y_r, unlab_r, feats_r, pseudo, rows_r,
                                     num_base);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-6));
}

TEST_CASE("self_train: zero iterations leave the model unchanged") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.dataset.kind = "gaussians";
    cfg.dataset.n_base = 2;
    cfg.dataset.n_novel = 2;
    cfg.dataset.dim = 8;
    cfg.dataset.per_class = 20;
    cfg.dataset.separation = 8.0;
    cfg.hidden = {16};
    cfg.embed_dim = 8;
    DatasetSplit split = resolve_splits(cfg);

    Rng rng(9);
    Network net = make_network({8, 16, 8}, 2, 2, rng);
    Network before = net;
    SelfTrainOptions opts;
    opts.iterations = 0;
    opts.seed = 3;
    SelfTrainResult res = self_train(net, split, opts);
    REQUIRE(res.per_iteration.size() == 1);
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        CHECK(net.parameters()[p]->data() == before.parameters()[p]->data());
    }
    const SplitMetrics direct = eval_splits(before, split);
    CHECK(res.per_iteration[0].metrics.novel_train_acc ==
          doctest::Approx(direct.novel_train_acc));
}

TEST_CASE("self_train: snapshot is frozen within an iteration and lr 0 is a fixpoint") {
    // lr ~ 0 with fixed labels: metrics must not move between iterations
    RunConfig cfg;
    cfg.seed = 5;
    cfg.dataset.kind = "gaussians";
    cfg.dataset.n_base = 2;
    cfg.dataset.n_novel = 2;
    cfg.dataset.dim = 8;
    cfg.dataset.per_class = 30;
    cfg.dataset.separation = 9.0;
    cfg.hidden = {16};
    cfg.embed_dim = 8;
    DatasetSplit split = resolve_splits(cfg);

    Rng rng(10);
    Network net = make_network({8, 16, 8}, 2, 2, rng);
    SelfTrainOptions opts;
    opts.iterations = 3;
    opts.epochs_per_iter = 1;
    opts.lr = 1e-12;
    opts.seed = 5;
    opts.reinit_head = false;
    SelfTrainResult res = self_train(net, split, opts);
    REQUIRE(res.per_iteration.size() == 4);
    for (std::size_t i = 2; i < res.per_iteration.size(); ++i) {
        CHECK(res.per_iteration[i].metrics.novel_train_acc ==
              doctest::Approx(res.per_iteration[i - 1].metrics.novel_train_acc)
                  .epsilon(1e-9));
        CHECK(res.per_iteration[i].metrics.test_all_acc ==
              doctest::Approx(res.per_iteration[i - 1].metrics.test_all_acc).epsilon(1e-9));
    }
}

TEST_CASE("self_train on separable data is deterministic and accurate") {
    RunConfig cfg;
    cfg.seed = 11;
    cfg.dataset.kind = "gaussians";
    cfg.dataset.n_base = 3;
    cfg.dataset.n_novel = 3;
    cfg.dataset.dim = 16;
    cfg.dataset.per_class = 40;
    cfg.dataset.separation = 9.0;
    cfg.hidden = {};
    cfg.embed_dim = 16;
    DatasetSplit split = resolve_splits(cfg);

    auto run = [&]() {
        Rng rng(12);
        // identity feature map stands in for a trained stage-I extractor
        Network net = make_network({16, 16}, 3, 3, rng);
        net.layer_w[0] = Matrix(16, 16);
        for (int i = 0; i < 16; ++i) net.layer_w[0](i, i) = 1.0f;
        net.layer_b[0] = Matrix(1, 16);
        SelfTrainOptions opts;
        opts.iterations = 2;
        opts.epochs_per_iter = 2;
        opts.batch_size = 32;
        opts.lr = 0.05;
        opts.seed = 11;
        return self_train(net, split, opts);
    };
    SelfTrainResult a = run();
    SelfTrainResult b = run();
    REQUIRE(a.per_iteration.size() == 3);
    for (std::size_t i = 0; i < a.per_iteration.size(); ++i) {
        CHECK(a.per_iteration[i].metrics.novel_train_acc ==
              b.per_iteration[i].metrics.novel_train_acc);
        CHECK(a.per_iteration[i].mean_loss == b.per_iteration[i].mean_loss);
    }
    // raw features here are already separable, so self-training should land
    // near a perfect matching
    CHECK(a.per_iteration.back().metrics.novel_train_acc >= 0.9);
}
