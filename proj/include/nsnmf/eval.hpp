#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace nsnmf {

/// sqrt(mean((actual - predicted)^2)). Throws on an empty list or non-finite values.
double rmse(std::span<const std::pair<double, double>> pairs);

struct KMeansOptions {
    std::size_t restarts = 20;
    std::size_t max_iters = 300;
};

struct ClusterResult {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // one per point
    Eigen::MatrixXd centroids;             // one centroid per column
    double objective = 0.0;                // sum of squared distances to the assigned centroid
    double wcss = 0.0;                     // pooled pairwise WCSS, see wcss()
    std::size_t iterations = 0;            // Lloyd iterations of the winning restart
    std::size_t restarts_used = 0;
    std::size_t best_restart = 0;
    std::uint64_t seed = 0;
    std::vector<double> objective_trace;   // objective after each Lloyd iteration of the winner
};

void to_json(nlohmann::json& j, const ClusterResult& r);

/**
 * Seeded k-means++ / Lloyd clustering of the columns of `points`.
 *
 * Each restart draws its own k-means++ seeding from one shared generator, iterates until the
 * assignment stops changing or `max_iters`, and the restart with the lowest objective wins
 * (ties go to the earlier restart). A cluster that empties is re-seeded at the point farthest
 * from its assigned centroid. `wcss` of the result is filled with the Euclidean pooled value.
 */
ClusterResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                     const KMeansOptions& options = {});

enum class WcssDistance { euclidean, squared };

/// sum over clusters r of 1/(2 n_r) * sum_{i,j in C_r} d(i, j), every ordered pair counted.
double wcss(const Eigen::MatrixXd& points, std::span<const std::size_t> assignments,
            WcssDistance distance = WcssDistance::euclidean);

}  // namespace nsnmf
