#include "nsnmf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "json_util.hpp"
#include "nsnmf/errors.hpp"
#include "nsnmf/random.hpp"

namespace nsnmf {

double rmse(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw DataError("RMSE of an empty evaluation set");
    double sum = 0.0;
    for (const auto& [actual, predicted] : pairs) {
        if (!std::isfinite(actual) || !std::isfinite(predicted))
            throw NumericDomainError("non-finite value in RMSE input");
        const double e = actual - predicted;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(pairs.size()));
}

void to_json(nlohmann::json& j, const ClusterResult& r) {
    j = nlohmann::json{{"k", r.k},
                       {"assignments", r.assignments},
                       {"centroids", detail::matrix_to_json(r.centroids)},
                       {"objective", r.objective},
                       {"wcss", r.wcss},
                       {"iterations", r.iterations},
                       {"restarts_used", r.restarts_used},
                       {"best_restart", r.best_restart},
                       {"seed", r.seed}};
}

namespace {

struct Run {
    std::vector<std::size_t> assignments;
    Eigen::MatrixXd centroids;
    double objective = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::vector<double> trace;
};

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index p, const Eigen::MatrixXd& centroids,
                        Eigen::Index c) {
    return (points.col(p) - centroids.col(c)).squaredNorm();
}

Eigen::MatrixXd kmeanspp(const Eigen::MatrixXd& points, std::size_t k, Rng& rng) {
    const Eigen::Index n = points.cols();
    Eigen::MatrixXd centroids(points.rows(), static_cast<Eigen::Index>(k));
    std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    Eigen::Index chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    for (std::size_t c = 0; c < k; ++c) {
        centroids.col(static_cast<Eigen::Index>(c)) = points.col(chosen);
        double total = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            const double d = squared_distance(points, p, centroids, static_cast<Eigen::Index>(c));
            auto& best = nearest[static_cast<std::size_t>(p)];
            best = std::min(best, d);
            total += best;
        }
        if (c + 1 == k) break;
        if (total <= 0.0) {
            // Every point coincides with a chosen centroid; fall back to a uniform draw.
            chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
            continue;
        }
        const double target = rng.uniform() * total;
        double acc = 0.0;
        chosen = n - 1;
        for (Eigen::Index p = 0; p < n; ++p) {
            acc += nearest[static_cast<std::size_t>(p)];
            if (acc > target) {
                chosen = p;
                break;
            }
        }
    }
    return centroids;
}

Run lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centroids, std::size_t max_iters) {
    const Eigen::Index n = points.cols();
    const Eigen::Index k = centroids.cols();
    Run run;
    run.assignments.assign(static_cast<std::size_t>(n), static_cast<std::size_t>(k));  // sentinel: unassigned
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (Eigen::Index p = 0; p < n; ++p) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < k; ++c) {
                const double d = squared_distance(points, p, centroids, c);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::size_t>(c);
                }
            }
            auto& slot = run.assignments[static_cast<std::size_t>(p)];
            if (slot != best) {
                slot = best;
                changed = true;
            }
            dist[static_cast<std::size_t>(p)] = best_d;
        }
        run.iterations = iter + 1;

        // Re-seed empty clusters at the point farthest from its centroid.
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (auto a : run.assignments) ++sizes[a];
        for (Eigen::Index c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            std::size_t far = dist.size();
            for (std::size_t p = 0; p < dist.size(); ++p) {
                if (sizes[run.assignments[p]] < 2) continue;
                if (far == dist.size() || dist[p] > dist[far]) far = p;
            }
            --sizes[run.assignments[far]];
            run.assignments[far] = static_cast<std::size_t>(c);
            ++sizes[static_cast<std::size_t>(c)];
            dist[far] = 0.0;
            changed = true;
        }

        centroids.setZero();
        for (Eigen::Index p = 0; p < n; ++p)
            centroids.col(static_cast<Eigen::Index>(run.assignments[static_cast<std::size_t>(p)])) += points.col(p);
        for (Eigen::Index c = 0; c < k; ++c)
            centroids.col(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);

        double objective = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            objective += squared_distance(points, p, centroids,
                                          static_cast<Eigen::Index>(run.assignments[static_cast<std::size_t>(p)]));
        run.trace.push_back(objective);
        run.objective = objective;
        if (!changed) break;
    }
    run.centroids = std::move(centroids);
    return run;
}

}  // namespace

ClusterResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(points.cols());
    if (k < 1) throw ConfigError("k must be at least 1");
    if (k > n) throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " points");
    if (options.restarts < 1 || options.max_iters < 1) throw ConfigError("restarts and max_iters must be positive");
    if (!points.allFinite()) throw NumericDomainError("non-finite coordinate in clustering input");

    Rng rng(seed);
    Run best;
    std::size_t best_restart = 0;
    for (std::size_t r = 0; r < options.restarts; ++r) {
        Run run = lloyd(points, kmeanspp(points, k, rng), options.max_iters);
        if (run.objective < best.objective) {
            best = std::move(run);
            best_restart = r;
        }
    }

    ClusterResult result;
    result.k = k;
    result.assignments = std::move(best.assignments);
    result.centroids = std::move(best.centroids);
    result.objective = best.objective;
    result.iterations = best.iterations;
    result.objective_trace = std::move(best.trace);
    result.restarts_used = options.restarts;
    result.best_restart = best_restart;
    result.seed = seed;
    result.wcss = wcss(points, result.assignments);
    return result;
}

double wcss(const Eigen::MatrixXd& points, std::span<const std::size_t> assignments, WcssDistance distance) {
    const auto n = static_cast<std::size_t>(points.cols());
    if (assignments.size() != n)
        throw ConfigError("assignments cover " + std::to_string(assignments.size()) + " of " + std::to_string(n) +
                          " points");
    std::size_t k = 0;
    for (auto a : assignments) k = std::max(k, a + 1);
    std::vector<std::vector<Eigen::Index>> members(k);
    for (std::size_t p = 0; p < n; ++p) members[assignments[p]].push_back(static_cast<Eigen::Index>(p));

    double total = 0.0;
    for (const auto& cluster : members) {
        if (cluster.empty()) continue;
        double pair_sum = 0.0;  // over unordered pairs; doubled below
        for (std::size_t a = 0; a < cluster.size(); ++a) {
            for (std::size_t b = a + 1; b < cluster.size(); ++b) {
                const double sq = (points.col(cluster[a]) - points.col(cluster[b])).squaredNorm();
                pair_sum += distance == WcssDistance::euclidean ? std::sqrt(sq) : sq;
            }
        }
        total += 2.0 * pair_sum / (2.0 * static_cast<double>(cluster.size()));
    }
    return total;
}

}  // namespace nsnmf
