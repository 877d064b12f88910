#include "ncd/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "ncd/rng.hpp"

namespace ncd {
namespace {

double sq_dist(const float* a, const float* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

// k-means++: first centroid uniform, the rest proportional to squared
// distance from the closest chosen centroid.
Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.rows();
    Matrix centroids(k, x.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    const std::size_t first = rng.below(n);
    centroids.set_row(0, x.row(first));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(x.row_ptr(i), centroids.row_ptr(c - 1), x.cols()));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        centroids.set_row(c, x.row(pick));
    }
    return centroids;
}

ClusterResult lloyd(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iters) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    ClusterResult res;
    res.centroids = kmeanspp_seed(x, k, rng);
    res.labels.assign(n, -1);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = sq_dist(x.row_ptr(i), res.centroids.row_ptr(0), d);
            for (std::size_t c = 1; c < k; ++c) {
                const double dist = sq_dist(x.row_ptr(i), res.centroids.row_ptr(c), d);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            if (res.labels[i] != static_cast<int>(best)) {
                res.labels[i] = static_cast<int>(best);
                changed = true;
            }
            inertia += best_d;
        }
        res.inertia = inertia;
        res.inertia_history.push_back(inertia);
        res.iterations = iter + 1;
        if (!changed && iter > 0) break;

        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = x.row_ptr(i);
            auto& s = sums[res.labels[i]];
            for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
            counts[res.labels[i]] += 1;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // re-seed an empty cluster to the point farthest from its
                // current centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dist =
                        sq_dist(x.row_ptr(i), res.centroids.row_ptr(res.labels[i]), d);
                    if (dist > far_d) {
                        far_d = dist;
                        far = i;
                    }
                }
                res.centroids.set_row(c, x.row(far));
                changed = true;
            } else {
                for (std::size_t j = 0; j < d; ++j) {
                    res.centroids(c, j) = static_cast<float>(sums[c][j] / counts[c]);
                }
            }
        }
        if (!changed) break;
    }
    return res;
}

} // namespace

ClusterResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed,
                     std::size_t max_iters, std::size_t restarts) {
    if (k < 1) throw DegenerateInput("kmeans: k must be >= 1");
    if (x.rows() < k) {
        throw DegenerateInput("kmeans: n=" + std::to_string(x.rows()) + " below k=" +
                              std::to_string(k));
    }
    if (restarts < 1) restarts = 1;
    ClusterResult best;
    bool have = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng(seed, 0x6b6d65616e73ULL + r);
        ClusterResult cur = lloyd(x, k, rng, max_iters);
        if (!have || cur.inertia < best.inertia) {
            best = std::move(cur);
            have = true;
        }
    }
    ensure_finite(best.centroids, "kmeans centroids");
    return best;
}

Matrix spectral_affinity(const Matrix& x, double sigma) {
    if (sigma <= 0.0) throw DegenerateInput("spectral_affinity: sigma must be > 0");
    const std::size_t n = x.rows();
    Matrix a(n, n);
    const double denom = 2.0 * sigma * sigma;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const float w = static_cast<float>(
                std::exp(-sq_dist(x.row_ptr(i), x.row_ptr(j), x.cols()) / denom));
            a(i, j) = w;
            a(j, i) = w;
        }
    }
    return a;
}

Matrix normalized_laplacian(const Matrix& affinity) {
    const std::size_t n = affinity.rows();
    if (affinity.cols() != n) throw ShapeMismatch("normalized_laplacian: square matrix expected");
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) deg[i] += affinity(i, j);
        if (deg[i] < 1e-12) {
            throw IsolatedPoint("normalized_laplacian: row " + std::to_string(i) +
                                " has no affinity mass");
        }
    }
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double norm = affinity(i, j) / std::sqrt(deg[i] * deg[j]);
            l(i, j) = static_cast<float>((i == j ? 1.0 : 0.0) - norm);
        }
    }
    return l;
}

double median_pairwise_distance(const Matrix& x) {
    const std::size_t n = x.rows();
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            dists.push_back(std::sqrt(sq_dist(x.row_ptr(i), x.row_ptr(j), x.cols())));
        }
    }
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    return dists[dists.size() / 2];
}

ClusterResult spectral(const Matrix& x, std::size_t k, double sigma, std::uint64_t seed) {
    if (k < 1) throw DegenerateInput("spectral: k must be >= 1");
    if (x.rows() < k) throw DegenerateInput("spectral: n below k");
    const Matrix a = spectral_affinity(x, sigma);
    const Matrix l = normalized_laplacian(a);
    const EighResult eig = sym_eigh(l);

    Matrix embed(x.rows(), k);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) embed(i, j) = eig.eigenvectors(i, j);
        const double norm = l2_norm(embed.row_ptr(i), k);
        if (norm > 1e-12) {
            for (std::size_t j = 0; j < k; ++j) {
                embed(i, j) = static_cast<float>(embed(i, j) / norm);
            }
        }
    }

    ClusterResult km = kmeans(embed, k, seed);
    ClusterResult res;
    res.labels = km.labels;
    res.inertia = km.inertia;
    res.iterations = km.iterations;
    res.inertia_history = km.inertia_history;
    res.centroids = cluster_means(x, res.labels, k);
    return res;
}

std::vector<int> hungarian_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != n) {
            throw ShapeMismatch("hungarian_assignment: square cost matrix expected");
        }
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

AccReport hungarian_acc(const std::vector<int>& pred, const std::vector<int>& truth,
                        std::size_t k) {
    if (pred.size() != truth.size()) throw ShapeMismatch("hungarian_acc: length mismatch");
    if (pred.empty()) throw EmptyBatch("hungarian_acc: empty labels");
    std::vector<std::vector<std::int64_t>> w(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= k) {
            throw LabelOutOfRange("hungarian_acc: pred label " + std::to_string(pred[i]));
        }
        if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= k) {
            throw LabelOutOfRange("hungarian_acc: true label " + std::to_string(truth[i]));
        }
        w[pred[i]][truth[i]] += 1;
    }
    std::vector<std::vector<double>> cost(k, std::vector<double>(k));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            cost[i][j] = -static_cast<double>(w[i][j]);
        }
    }
    AccReport rep;
    rep.matching = hungarian_assignment(cost);
    std::int64_t matched = 0;
    for (std::size_t c = 0; c < k; ++c) matched += w[c][rep.matching[c]];
    rep.acc = static_cast<double>(matched) / static_cast<double>(pred.size());

    std::vector<int> mapped(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) mapped[i] = rep.matching[pred[i]];
    rep.confusion = confusion_matrix(mapped, truth, k);
    return rep;
}

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& mapped_pred,
                                                        const std::vector<int>& truth,
                                                        std::size_t k) {
    if (mapped_pred.size() != truth.size()) {
        throw ShapeMismatch("confusion_matrix: length mismatch");
    }
    std::vector<std::vector<std::int64_t>> cm(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        cm[truth[i]][mapped_pred[i]] += 1;
    }
    return cm;
}

Matrix cluster_means(const Matrix& x, const std::vector<int>& labels, std::size_t k) {
    if (labels.size() != x.rows()) throw ShapeMismatch("cluster_means: label count");
    std::vector<std::vector<double>> sums(k, std::vector<double>(x.cols(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const int c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= k) {
            throw LabelOutOfRange("cluster_means: label " + std::to_string(c));
        }
        const float* row = x.row_ptr(i);
        for (std::size_t j = 0; j < x.cols(); ++j) sums[c][j] += row[j];
        counts[c] += 1;
    }
    Matrix means(k, x.cols());
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            means(c, j) = static_cast<float>(sums[c][j] / counts[c]);
        }
    }
    return means;
}

std::string cluster_result_json(const ClusterResult& result) {
    nlohmann::json j;
    j["labels"] = result.labels;
    j["inertia"] = result.inertia;
    j["iterations"] = result.iterations;
    std::vector<std::vector<float>> centroids(result.centroids.rows());
    for (std::size_t c = 0; c < result.centroids.rows(); ++c) {
        centroids[c].assign(result.centroids.row_ptr(c),
                            result.centroids.row_ptr(c) + result.centroids.cols());
    }
    j["centroids"] = centroids;
    return j.dump(2);
}

std::string acc_report_json(const AccReport& report) {
    nlohmann::json j;
    j["acc"] = report.acc;
    j["matching"] = report.matching;
    j["confusion"] = report.confusion;
    return j.dump(2);
}

} // namespace ncd
