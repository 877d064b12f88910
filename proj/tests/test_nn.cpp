#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ncd/checkpoint.hpp"
#include "ncd/network.hpp"
#include "ncd/optimizer.hpp"
#include "ref_math.hpp"

using namespace ncd;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (float& x : m.data()) x = static_cast<float>(scale * rng.normal());
    return m;
}

refm::dmat to_dmat(const Matrix& m) { return refm::from_matrix(m); }

} // namespace

TEST_CASE("forward trivial cases") {
    Rng rng(1);
    Network net = make_network({2, 3}, 2, 2, rng);
    for (Matrix* p : net.parameters()) {
        for (float& x : p->data()) x = 0.0f;
    }
    Matrix batch(2, 2, {1.0f, -2.0f, 0.5f, 3.0f});
    ForwardResult res = forward(net, batch);
    for (float x : res.logits.data()) CHECK(x == 0.0f);

    // identity single layer passes the input through
    Network id = make_network({2, 2}, 1, 1, rng);
    id.layer_w[0] = Matrix(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
    id.layer_b[0] = Matrix(1, 2);
    Matrix one(1, 2, {1.0f, 2.0f});
    ForwardResult r2 = forward(id, one);
    CHECK(r2.features(0, 0) == 1.0f);
    CHECK(r2.features(0, 1) == 2.0f);

    CHECK_THROWS_AS(forward(net, Matrix(1, 3)), ShapeMismatch);
}

TEST_CASE("forward matches the double-precision reference") {
    Rng rng(2);
    Network net = make_network({5, 8, 4}, 3, 2, rng);
    Matrix batch = random_matrix(6, 5, rng);

    ForwardResult res = forward(net, batch);
    refm::RefNetParams p = refm::ref_params(net);
    refm::dmat features, logits;
    refm::ref_forward(p, to_dmat(batch), &features, &logits);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::fabs(res.features(i, j) - features[i][j]) <= 1e-5);
        }
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(std::fabs(res.logits(i, j) - logits[i][j]) <= 1e-5);
        }
    }
}

TEST_CASE("backward trivial cases") {
    Rng rng(3);
    Network net = make_network({3, 4, 2}, 2, 1, rng);
    Matrix batch = random_matrix(4, 3, rng);
    ForwardResult res = forward(net, batch);

    Gradients g = backward(net, res.tape, Matrix(4, 2), Matrix(4, 3));
    for (Matrix* m : g.flat()) {
        for (float x : m->data()) CHECK(x == 0.0f);
    }

    // single linear layer, loss = sum of logits: dW = ones^T * features
    Network lin = make_network({2, 2}, 1, 1, rng);
    lin.layer_w[0] = Matrix(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
    lin.layer_b[0] = Matrix(1, 2);
    Matrix x(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
    ForwardResult fr = forward(lin, x);
    Gradients lg = backward(lin, fr.tape, Matrix(), Matrix(2, 2, {1.0f, 1.0f, 1.0f, 1.0f}));
    // dW_head(i, j) = sum over batch of features[., j]
    CHECK(lg.head_w(0, 0) == doctest::Approx(4.0));
    CHECK(lg.head_w(0, 1) == doctest::Approx(6.0));
    CHECK(lg.head_b(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("backward gradients match central finite differences") {
    Rng rng(4);
    Network net = make_network({4, 7, 5, 3}, 2, 2, rng);
    Matrix batch = random_matrix(3, 4, rng);

    // scalar loss: sum(sin-free quadratic) over features and logits keeps the
    // chain nontrivial on both upstream paths
    Matrix wf = random_matrix(3, 3, rng);
    Matrix wl = random_matrix(3, 4, rng);

    ForwardResult res = forward(net, batch);
    Matrix d_features(3, 3), d_logits(3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) d_features(i, j) = wf(i, j);
        for (std::size_t j = 0; j < 4; ++j) d_logits(i, j) = wl(i, j);
    }
    Gradients g = backward(net, res.tape, d_features, d_logits);

    refm::RefNetParams shape = refm::ref_params(net);
    const refm::dvec flat = refm::flatten(shape);
    const refm::dmat xin = to_dmat(batch);
    const refm::dmat wfd = to_dmat(wf);
    const refm::dmat wld = to_dmat(wl);
    auto loss = [&](const refm::dvec& v) {
        refm::RefNetParams p = refm::unflatten(shape, v);
        refm::dmat features, logits;
        refm::ref_forward(p, xin, &features, &logits);
        double acc = 0.0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            for (std::size_t j = 0; j < features[i].size(); ++j) {
                acc += wfd[i][j] * features[i][j];
            }
            for (std::size_t j = 0; j < logits[i].size(); ++j) {
                acc += wld[i][j] * logits[i][j];
            }
        }
        return acc;
    };

    std::vector<const Matrix*> analytic;
    Gradients* gp = &g;
    for (Matrix* m : gp->flat()) analytic.push_back(m);

    std::size_t t = 0;
    double max_rel = 0.0;
    for (const Matrix* m : analytic) {
        for (std::size_t e = 0; e < m->size(); ++e) {
            const double fd = refm::central_diff(loss, flat, t, 1e-3);
            const double an = m->data()[e];
            if (std::fabs(fd) > 1e-6 || std::fabs(an) > 1e-6) {
                max_rel = std::max(max_rel, refm::rel_err(fd, an));
            }
            ++t;
        }
    }
    CHECK(max_rel <= 1e-4);
}

TEST_CASE("optimizer trivial cases") {
    Rng rng(5);
    Matrix w(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
    Matrix w0 = w;
    Matrix g(2, 2);
    std::vector<Matrix*> params{&w};
    std::vector<Matrix*> grads{&g};

    OptimizerState adam = make_adamw(params, 0.0);
    optimizer_step(adam, params, grads, 0.1);
    for (std::size_t t = 0; t < w.size(); ++t) CHECK(w.data()[t] == w0.data()[t]);

    // SGD, momentum 0: params decrease by lr * grad
    Matrix w2(1, 2, {1.0f, -1.0f});
    Matrix g2(1, 2, {0.5f, 2.0f});
    std::vector<Matrix*> p2{&w2};
    std::vector<Matrix*> gr2{&g2};
    OptimizerState sgd = make_sgd(p2, 0.0, 0.0);
    optimizer_step(sgd, p2, gr2, 0.1);
    CHECK(w2(0, 0) == doctest::Approx(1.0 - 0.05));
    CHECK(w2(0, 1) == doctest::Approx(-1.0 - 0.2));
}

TEST_CASE("adamw single scalar matches the hand-computed trajectory") {
    // two steps with constant gradient 1, lr 0.1, defaults, no decay
    Matrix w(1, 1, {0.5f});
    Matrix g(1, 1, {1.0f});
    std::vector<Matrix*> params{&w};
    std::vector<Matrix*> grads{&g};
    OptimizerState adam = make_adamw(params, 0.0);

    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0.0, v = 0.0, x = 0.5;
    for (int step = 1; step <= 2; ++step) {
        m = b1 * m + (1 - b1) * 1.0;
        v = b2 * v + (1 - b2) * 1.0;
        const double mh = m / (1 - std::pow(b1, step));
        const double vh = v / (1 - std::pow(b2, step));
        x -= lr * mh / (std::sqrt(vh) + eps);
        optimizer_step(adam, params, grads, lr);
        CHECK(w(0, 0) == doctest::Approx(x).epsilon(1e-5));
    }
}

TEST_CASE("sgd momentum buffer") {
    Matrix w(1, 1, {0.0f});
    Matrix g(1, 1, {1.0f});
    std::vector<Matrix*> params{&w};
    std::vector<Matrix*> grads{&g};
    OptimizerState sgd = make_sgd(params, 0.9, 0.0);
    optimizer_step(sgd, params, grads, 0.1); // buf=1, w=-0.1
    optimizer_step(sgd, params, grads, 0.1); // buf=1.9, w=-0.29
    CHECK(w(0, 0) == doctest::Approx(-0.29).epsilon(1e-5));
}

TEST_CASE("lr schedule") {
    LrSchedule s{0.0005, 0.0, 10, 110};
    CHECK(lr_at(s, 0) == doctest::Approx(0.0005 / 10));
    CHECK(lr_at(s, 10) == doctest::Approx(0.0005));
    CHECK(lr_at(s, 110) == doctest::Approx(0.0));
    // closed form: base * 0.5 * (1 + cos(pi * 50 / 100))
    CHECK(lr_at(s, 60) == doctest::Approx(0.00025));

    // continuity at the junction
    CHECK(lr_at(s, 9) == doctest::Approx(lr_at(s, 10)).epsilon(1e-12));

    LrSchedule floor{0.1, 0.01, 0, 100};
    CHECK(lr_at(floor, 100) == doctest::Approx(0.01));
    for (int step = 0; step <= 100; ++step) CHECK(lr_at(floor, step) >= 0.0);
    CHECK_THROWS(lr_at(s, 111));
}

TEST_CASE("ema_params") {
    Rng rng(6);
    Network target = make_network({2, 3}, 1, 1, rng);
    Network source = make_network({2, 3}, 1, 1, rng);

    Network t0 = target;
    ema_params(target, source, 0.0);
    for (std::size_t p = 0; p < target.parameters().size(); ++p) {
        const Matrix* tp = target.parameters()[p];
        const Matrix* sp = source.parameters()[p];
        for (std::size_t t = 0; t < tp->size(); ++t) {
            CHECK(tp->data()[t] == doctest::Approx(sp->data()[t]));
        }
    }

    Network near = t0;
    ema_params(near, source, 0.9999);
    for (std::size_t p = 0; p < near.parameters().size(); ++p) {
        const Matrix* np = near.parameters()[p];
        const Matrix* op = t0.parameters()[p];
        for (std::size_t t = 0; t < np->size(); ++t) {
            CHECK(std::fabs(np->data()[t] - op->data()[t]) <= 1e-3);
        }
    }

    Matrix a(1, 1, {2.0f});
    Matrix b(1, 1, {0.0f});
    ema_matrix(a, b, 0.5);
    CHECK(a(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("training steps are deterministic under a fixed seed") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Network net = make_network({3, 5, 4}, 2, 2, rng);
        std::vector<Matrix*> params = net.parameters();
        OptimizerState opt = make_adamw(params, 0.01);
        Rng data_rng(seed, 99);
        for (int step = 0; step < 5; ++step) {
            Matrix batch = random_matrix(4, 3, data_rng);
            ForwardResult res = forward(net, batch);
            Matrix d_logits(4, 4, std::vector<float>(16, 0.25f));
            Gradients g = backward(net, res.tape, Matrix(), d_logits);
            std::vector<Matrix*> gp = g.flat();
            optimizer_step(opt, params, gp, 0.01);
        }
        return net;
    };
    Network a = run(77), b = run(77);
    for (std::size_t p = 0; p < a.parameters().size(); ++p) {
        const Matrix* ap = a.parameters()[p];
        const Matrix* bp = b.parameters()[p];
        for (std::size_t t = 0; t < ap->size(); ++t) {
            CHECK(ap->data()[t] == bp->data()[t]);
        }
    }
}

TEST_CASE("checkpoint round-trips the network") {
    Rng rng(8);
    Network net = make_network({4, 6, 3}, 2, 3, rng);
    Checkpoint ckpt;
    ckpt.student = net;
    ckpt.teacher = net;
    ckpt.student_head = make_distill_head(8, 3, 0.1, 0.04, 0.9, rng);
    ckpt.teacher_head = *ckpt.student_head;
    ckpt.bank = init_from_classifier(net.novel_head_rows(), 0.99);
    ckpt.config_hash = "deadbeef";
    ckpt.stage = "stage1";
    ckpt.step = 42;

    const auto dir = std::filesystem::temp_directory_path() / "ncd_ckpt_test";
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, ckpt);
    Checkpoint back = load_checkpoint(dir);
    CHECK(back.config_hash == "deadbeef");
    CHECK(back.stage == "stage1");
    CHECK(back.step == 42);
    REQUIRE(back.teacher.has_value());
    REQUIRE(back.student_head.has_value());
    REQUIRE(back.bank.has_value());
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        const Matrix* ap = back.student.parameters()[p];
        const Matrix* bp = net.parameters()[p];
        for (std::size_t t = 0; t < ap->size(); ++t) {
            CHECK(ap->data()[t] == bp->data()[t]);
        }
    }
    CHECK(back.bank->beta == doctest::Approx(0.99));

    CHECK_THROWS_AS(load_checkpoint(dir / "nope"), CheckpointMissing);
    std::filesystem::remove_all(dir);
}
