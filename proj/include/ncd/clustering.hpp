#pragma once

#include <cstdint>
#include <vector>

#include "ncd/eigh.hpp"
#include "ncd/matrix.hpp"

namespace ncd {

struct ClusterResult {
    std::vector<int> labels;             // in [0, k)
    Matrix centroids;                    // k x D, input-space cluster means
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_history; // one entry per Lloyd assignment pass
};

// Lloyd iterations from k-means++ seeding until the assignment fixpoint or
// max_iters; best inertia over restarts. Empty clusters are re-seeded to the
// point farthest from its centroid.
ClusterResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed,
                     std::size_t max_iters = 300, std::size_t restarts = 10);

// Gaussian affinity with bandwidth sigma, zero diagonal.
Matrix spectral_affinity(const Matrix& x, double sigma);
// L = I - D^{-1/2} A D^{-1/2}; throws IsolatedPoint when a row of A sums
// below 1e-12.
Matrix normalized_laplacian(const Matrix& affinity);
// Median pairwise distance bandwidth heuristic.
double median_pairwise_distance(const Matrix& x);

// Row-normalized smallest-eigenvector embedding followed by k-means
// (the Ng-Jordan-Weiss construction). Centroids are input-space means of the
// final clusters; inertia is the embedding-space k-means inertia.
ClusterResult spectral(const Matrix& x, std::size_t k, double sigma, std::uint64_t seed);

struct AccReport {
    double acc = 0.0;
    std::vector<int> matching;                  // cluster id -> class id
    std::vector<std::vector<std::int64_t>> confusion; // [true class][mapped prediction]
};

// Maximum-weight perfect matching between predicted cluster ids and class
// ids over the k x k contingency matrix (Hungarian algorithm), then matched
// count / n.
AccReport hungarian_acc(const std::vector<int>& pred, const std::vector<int>& truth,
                        std::size_t k);

// Entry (t, p) counts samples of true class t predicted (after mapping) as p.
std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& mapped_pred,
                                                        const std::vector<int>& truth,
                                                        std::size_t k);

// Minimum-cost assignment over a square cost matrix; returns row -> column.
std::vector<int> hungarian_assignment(const std::vector<std::vector<double>>& cost);

// Input-space means of the points in each cluster.
Matrix cluster_means(const Matrix& x, const std::vector<int>& labels, std::size_t k);

std::string cluster_result_json(const ClusterResult& result);
std::string acc_report_json(const AccReport& report);

} // namespace ncd
