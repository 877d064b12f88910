#include "ncd/network.hpp"

#include <cmath>

namespace ncd {
namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (float& x : m.data()) x = static_cast<float>(rng.uniform(-bound, bound));
    return m;
}

Matrix relu(const Matrix& z) {
    Matrix a = z;
    for (float& x : a.data()) x = x > 0.0f ? x : 0.0f;
    return a;
}

// Gradient mask from the post-activation values (ReLU only).
void apply_relu_mask(Matrix& delta, const Matrix& post) {
    for (std::size_t t = 0; t < delta.size(); ++t) {
        if (post.data()[t] <= 0.0f) delta.data()[t] = 0.0f;
    }
}

} // namespace

std::vector<Matrix*> Network::parameters() {
    std::vector<Matrix*> params;
    for (std::size_t l = 0; l < layer_w.size(); ++l) {
        params.push_back(&layer_w[l]);
        params.push_back(&layer_b[l]);
    }
    params.push_back(&head_w);
    params.push_back(&head_b);
    return params;
}

std::vector<const Matrix*> Network::parameters() const {
    std::vector<const Matrix*> params;
    for (std::size_t l = 0; l < layer_w.size(); ++l) {
        params.push_back(&layer_w[l]);
        params.push_back(&layer_b[l]);
    }
    params.push_back(&head_w);
    params.push_back(&head_b);
    return params;
}

Matrix Network::novel_head_rows() const {
    Matrix out(num_novel, embed_dim());
    for (std::size_t c = 0; c < num_novel; ++c) {
        for (std::size_t j = 0; j < embed_dim(); ++j) {
            out(c, j) = head_w(num_base + c, j);
        }
    }
    return out;
}

Network make_network(const std::vector<std::size_t>& widths, std::size_t num_base,
                     std::size_t num_novel, Rng& rng) {
    if (widths.size() < 2) throw ShapeMismatch("make_network: need at least input and embedding widths");
    Network net;
    net.widths = widths;
    net.num_base = num_base;
    net.num_novel = num_novel;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        net.layer_w.push_back(uniform_matrix(widths[l + 1], widths[l], bound, rng));
        net.layer_b.push_back(Matrix(1, widths[l + 1]));
    }
    reinit_head(net, rng);
    return net;
}

void reinit_head(Network& net, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.embed_dim()));
    net.head_w = uniform_matrix(net.num_classes(), net.embed_dim(), bound, rng);
    net.head_b = Matrix(1, net.num_classes());
}

std::vector<Matrix*> Gradients::flat() {
    std::vector<Matrix*> out;
    for (std::size_t l = 0; l < layer_w.size(); ++l) {
        out.push_back(&layer_w[l]);
        out.push_back(&layer_b[l]);
    }
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
}

void Gradients::accumulate(const Gradients& other) {
    for (std::size_t l = 0; l < layer_w.size(); ++l) {
        add_in_place(layer_w[l], other.layer_w[l]);
        add_in_place(layer_b[l], other.layer_b[l]);
    }
    add_in_place(head_w, other.head_w);
    add_in_place(head_b, other.head_b);
}

void Gradients::scale_all(double s) {
    for (std::size_t l = 0; l < layer_w.size(); ++l) {
        layer_w[l] = scale(layer_w[l], s);
        layer_b[l] = scale(layer_b[l], s);
    }
    head_w = scale(head_w, s);
    head_b = scale(head_b, s);
}

Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.layer_w.size(); ++l) {
        g.layer_w.push_back(Matrix(net.layer_w[l].rows(), net.layer_w[l].cols()));
        g.layer_b.push_back(Matrix(1, net.layer_b[l].cols()));
    }
    g.head_w = Matrix(net.head_w.rows(), net.head_w.cols());
    g.head_b = Matrix(1, net.head_b.cols());
    return g;
}

ForwardResult forward(const Network& net, const Matrix& batch) {
    if (batch.cols() != net.input_dim()) {
        throw ShapeMismatch("forward: batch width " + std::to_string(batch.cols()) +
                            " != input width " + std::to_string(net.input_dim()));
    }
    ForwardResult res;
    res.tape.input = batch;
    Matrix a = batch;
    const std::size_t num_layers = net.layer_w.size();
    for (std::size_t l = 0; l < num_layers; ++l) {
        Matrix z = add_row_broadcast(matmul_nt(a, net.layer_w[l]), net.layer_b[l]);
        a = (l + 1 < num_layers) ? relu(z) : std::move(z);
        res.tape.activations.push_back(a);
    }
    res.features = a;
    res.logits = add_row_broadcast(matmul_nt(res.features, net.head_w), net.head_b);
    ensure_finite(res.logits, "forward logits");
    return res;
}

Matrix forward_features(const Network& net, const Matrix& batch) {
    if (batch.cols() != net.input_dim()) {
        throw ShapeMismatch("forward_features: batch width mismatch");
    }
    Matrix a = batch;
    const std::size_t num_layers = net.layer_w.size();
    for (std::size_t l = 0; l < num_layers; ++l) {
        Matrix z = add_row_broadcast(matmul_nt(a, net.layer_w[l]), net.layer_b[l]);
        a = (l + 1 < num_layers) ? relu(z) : std::move(z);
    }
    return a;
}

Gradients backward(const Network& net, const ForwardTape& tape, const Matrix& d_features,
                   const Matrix& d_logits) {
    const std::size_t n = tape.input.rows();
    const std::size_t num_layers = net.layer_w.size();
    if (tape.activations.size() != num_layers) {
        throw ShapeMismatch("backward: tape does not match network depth");
    }
    const Matrix& features = tape.activations.back();

    Gradients g = zero_gradients(net);

    Matrix delta(n, net.embed_dim());
    if (d_features.size() > 0) {
        if (d_features.rows() != n || d_features.cols() != net.embed_dim()) {
            throw ShapeMismatch("backward: d_features shape");
        }
        delta = d_features;
    }
    if (d_logits.size() > 0) {
        if (d_logits.rows() != n || d_logits.cols() != net.num_classes()) {
            throw ShapeMismatch("backward: d_logits shape");
        }
        g.head_w = matmul_tn(d_logits, features);
        g.head_b = col_sum(d_logits);
        add_in_place(delta, matmul(d_logits, net.head_w));
    }

    for (std::size_t l = num_layers; l-- > 0;) {
        if (l + 1 < num_layers) {
            apply_relu_mask(delta, tape.activations[l]);
        }
        const Matrix& below = (l == 0) ? tape.input : tape.activations[l - 1];
        g.layer_w[l] = matmul_tn(delta, below);
        g.layer_b[l] = col_sum(delta);
        if (l > 0) delta = matmul(delta, net.layer_w[l]);
    }
    return g;
}

void ema_params(Network& target, const Network& source, double momentum) {
    if (momentum < 0.0 || momentum >= 1.0) {
        throw Error("ema_params: momentum must be in [0, 1)");
    }
    if (target.widths != source.widths || target.num_classes() != source.num_classes()) {
        throw ShapeMismatch("ema_params: network shapes differ");
    }
    for (std::size_t l = 0; l < target.layer_w.size(); ++l) {
        ema_matrix(target.layer_w[l], source.layer_w[l], momentum);
        ema_matrix(target.layer_b[l], source.layer_b[l], momentum);
    }
    ema_matrix(target.head_w, source.head_w, momentum);
    ema_matrix(target.head_b, source.head_b, momentum);
}

} // namespace ncd
