#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncd/clustering.hpp"
#include "ncd/rng.hpp"

using namespace ncd;

namespace {

// Two Gaussian blobs around +/- center.
Matrix two_blobs(std::size_t per_blob, double center, double noise, Rng& rng,
                 std::vector<int>* truth) {
    Matrix x(2 * per_blob, 2);
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        const int blob = i < per_blob ? 0 : 1;
        const double cx = blob == 0 ? -center : center;
        x(i, 0) = static_cast<float>(cx + noise * rng.normal());
        x(i, 1) = static_cast<float>(noise * rng.normal());
        if (truth) truth->push_back(blob);
    }
    return x;
}

Matrix two_rings(std::size_t per_ring, double r_inner, double r_outer, double noise,
                 Rng& rng, std::vector<int>* truth) {
    Matrix x(2 * per_ring, 2);
    for (std::size_t i = 0; i < 2 * per_ring; ++i) {
        const int ring = i < per_ring ? 0 : 1;
        const double r = (ring == 0 ? r_inner : r_outer) + noise * rng.normal();
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        x(i, 0) = static_cast<float>(r * std::cos(a));
        x(i, 1) = static_cast<float>(r * std::sin(a));
        if (truth) truth->push_back(ring);
    }
    return x;
}

// Exhaustive best matching for small k.
double brute_force_acc(const std::vector<int>& pred, const std::vector<int>& truth,
                       std::size_t k) {
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (perm[pred[i]] == truth[i]) ++correct;
        }
        best = std::max(best, correct);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

} // namespace

TEST_CASE("kmeans trivial cases") {
    // k = 1: centroid is the mean
    Matrix x(4, 1, {0.0f, 2.0f, 4.0f, 6.0f});
    ClusterResult r = kmeans(x, 1, 0);
    CHECK(r.centroids(0, 0) == doctest::Approx(3.0));
    double inertia = 0.0;
    for (float v : x.data()) inertia += (v - 3.0) * (v - 3.0);
    CHECK(r.inertia == doctest::Approx(inertia));

    // k = n: every point its own centroid, inertia 0
    ClusterResult rn = kmeans(x, 4, 0);
    CHECK(rn.inertia == doctest::Approx(0.0));
    std::vector<int> sorted = rn.labels;
    std::sort(sorted.begin(), sorted.end());
    for (int c = 0; c < 4; ++c) CHECK(sorted[c] == c);

    CHECK_THROWS_AS(kmeans(x, 5, 0), DegenerateInput);
    CHECK_THROWS_AS(kmeans(x, 0, 0), DegenerateInput);
}

TEST_CASE("kmeans recovers the 1-D four-point partition") {
    Matrix x(4, 1, {0.0f, 0.1f, 10.0f, 10.1f});
    ClusterResult r = kmeans(x, 2, 7);
    CHECK(r.labels[0] == r.labels[1]);
    CHECK(r.labels[2] == r.labels[3]);
    CHECK(r.labels[0] != r.labels[2]);

    // brute force over all 2-partitions confirms the inertia optimum
    double best = 1e30;
    for (int mask = 1; mask < 15; ++mask) {
        double s0 = 0.0, s1 = 0.0;
        int n0 = 0, n1 = 0;
        for (int i = 0; i < 4; ++i) {
            if (mask & (1 << i)) {
                s0 += x(i, 0);
                ++n0;
            } else {
                s1 += x(i, 0);
                ++n1;
            }
        }
        const double m0 = s0 / n0, m1 = s1 / n1;
        double inertia = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double m = (mask & (1 << i)) ? m0 : m1;
            inertia += (x(i, 0) - m) * (x(i, 0) - m);
        }
        best = std::min(best, inertia);
    }
    CHECK(r.inertia == doctest::Approx(best).epsilon(1e-5));
}

TEST_CASE("kmeans inertia is non-increasing across Lloyd passes") {
    Rng rng(3);
    std::vector<int> truth;
    Matrix x = two_blobs(60, 2.0, 1.2, rng, &truth);
    ClusterResult r = kmeans(x, 4, 11, 300, 1);
    REQUIRE(r.inertia_history.size() >= 2);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
        CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-6);
    }
}

TEST_CASE("kmeans separates well-separated blobs") {
    Rng rng(4);
    std::vector<int> truth;
    Matrix x = two_blobs(80, 8.0, 0.5, rng, &truth);
    ClusterResult r = kmeans(x, 2, 5);
    CHECK(hungarian_acc(r.labels, truth, 2).acc == doctest::Approx(1.0));
}

TEST_CASE("spectral affinity and laplacian") {
    Rng rng(5);
    std::vector<int> truth;
    Matrix x = two_blobs(25, 4.0, 0.4, rng, &truth);
    Matrix a = spectral_affinity(x, 1.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        CHECK(a(i, i) == 0.0f);
        for (std::size_t j = 0; j < a.cols(); ++j) {
            CHECK(a(i, j) == a(j, i));
            CHECK(a(i, j) >= 0.0f);
            CHECK(a(i, j) <= 1.0f);
        }
    }
    Matrix l = normalized_laplacian(a);
    EighResult eig = sym_eigh(l);
    // symmetric-normalized Laplacian spectrum lies in [0, 2]
    CHECK(eig.eigenvalues.front() >= -1e-4);
    CHECK(eig.eigenvalues.back() <= 2.0 + 1e-4);

    CHECK_THROWS_AS(spectral_affinity(x, 0.0), DegenerateInput);
    Matrix far(2, 2, {0.0f, 0.0f, 1000.0f, 1000.0f});
    CHECK_THROWS_AS(normalized_laplacian(spectral_affinity(far, 0.1)), IsolatedPoint);
}

TEST_CASE("spectral recovers blobs and rings") {
    Rng rng(6);
    std::vector<int> blob_truth;
    Matrix blobs = two_blobs(40, 5.0, 0.4, rng, &blob_truth);
    ClusterResult rb = spectral(blobs, 2, 1.0, 3);
    CHECK(hungarian_acc(rb.labels, blob_truth, 2).acc == doctest::Approx(1.0));

    std::vector<int> ring_truth;
    Matrix rings = two_rings(80, 1.0, 4.0, 0.08, rng, &ring_truth);
    ClusterResult rr = spectral(rings, 2, 0.5, 3);
    const double spectral_acc = hungarian_acc(rr.labels, ring_truth, 2).acc;
    CHECK(spectral_acc >= 0.95);

    // raw-feature k-means cannot separate concentric rings
    ClusterResult km = kmeans(rings, 2, 3);
    const double kmeans_acc = hungarian_acc(km.labels, ring_truth, 2).acc;
    CHECK(kmeans_acc <= 0.75);

    // n = k: every point its own cluster
    Matrix tiny(3, 2, {0.0f, 0.0f, 1.0f, 0.0f, 0.0f, 1.0f});
    ClusterResult rt = spectral(tiny, 3, 1.0, 0);
    std::vector<int> sorted = rt.labels;
    std::sort(sorted.begin(), sorted.end());
    for (int c = 0; c < 3; ++c) CHECK(sorted[c] == c);
}

TEST_CASE("hungarian_acc hand cases") {
    AccReport rep = hungarian_acc({0, 0, 1, 1}, {1, 1, 0, 0}, 2);
    CHECK(rep.acc == doctest::Approx(1.0));
    CHECK(rep.matching[0] == 1);
    CHECK(rep.matching[1] == 0);

    AccReport same = hungarian_acc({0, 1, 2, 0}, {0, 1, 2, 0}, 3);
    CHECK(same.acc == doctest::Approx(1.0));
    for (int c = 0; c < 3; ++c) CHECK(same.matching[c] == c);

    CHECK_THROWS_AS(hungarian_acc({0, 3}, {0, 1}, 2), LabelOutOfRange);
}

TEST_CASE("hungarian_acc equals factorial brute force") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 2 + rng.below(5);  // up to 6
        const std::size_t n = k + rng.below(35); // up to ~40
        std::vector<int> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<int>(rng.below(k));
            truth[i] = static_cast<int>(rng.below(k));
        }
        const AccReport rep = hungarian_acc(pred, truth, k);
        CHECK(rep.acc == doctest::Approx(brute_force_acc(pred, truth, k)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian_acc is invariant to predicted label permutations") {
    Rng rng(8);
    const std::size_t k = 5, n = 60;
    std::vector<int> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        pred[i] = static_cast<int>(rng.below(k));
        truth[i] = static_cast<int>(rng.below(k));
    }
    const double base_acc = hungarian_acc(pred, truth, k).acc;

    // identity-mapping accuracy never beats the matched accuracy
    std::size_t ident = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred[i] == truth[i]) ++ident;
    }
    CHECK(base_acc >= static_cast<double>(ident) / n);

    std::vector<int> perm{3, 0, 4, 1, 2};
    std::vector<int> permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[i] = perm[pred[i]];
    CHECK(hungarian_acc(permuted, truth, k).acc == doctest::Approx(base_acc));
}

TEST_CASE("results export as JSON") {
    Matrix x(4, 1, {0.0f, 0.1f, 10.0f, 10.1f});
    ClusterResult r = kmeans(x, 2, 7);
    const std::string cj = cluster_result_json(r);
    CHECK(cj.find("inertia") != std::string::npos);
    CHECK(cj.find("centroids") != std::string::npos);

    AccReport rep = hungarian_acc({0, 0, 1, 1}, {1, 1, 0, 0}, 2);
    const std::string aj = acc_report_json(rep);
    CHECK(aj.find("\"acc\"") != std::string::npos);
    CHECK(aj.find("matching") != std::string::npos);
}

TEST_CASE("confusion matrix properties") {
    // perfect prediction: diagonal
    std::vector<int> y{0, 1, 2, 1, 0};
    auto cm = confusion_matrix(y, y, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) CHECK(cm[i][j] == 0);
        }
    }
    CHECK(cm[0][0] == 2);
    CHECK(cm[1][1] == 2);
    CHECK(cm[2][2] == 1);

    // constant prediction: one dense column
    std::vector<int> ones(5, 1);
    auto cm2 = confusion_matrix(ones, y, 3);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            total += cm2[i][j];
            if (j != 1) CHECK(cm2[i][j] == 0);
        }
    }
    CHECK(total == 5);

    // row sums are per-class counts
    Rng rng(9);
    std::vector<int> pred(40), truth(40);
    for (std::size_t i = 0; i < 40; ++i) {
        pred[i] = static_cast<int>(rng.below(4));
        truth[i] = static_cast<int>(rng.below(4));
    }
    auto cm3 = confusion_matrix(pred, truth, 4);
    for (std::size_t t = 0; t < 4; ++t) {
        std::int64_t row_sum = 0;
        for (std::size_t p = 0; p < 4; ++p) row_sum += cm3[t][p];
        std::int64_t count = std::count(truth.begin(), truth.end(), static_cast<int>(t));
        CHECK(row_sum == count);
    }
}
