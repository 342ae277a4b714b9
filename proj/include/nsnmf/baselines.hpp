#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nsnmf/data.hpp"

namespace nsnmf {

// ---------------------------------------------------------------------------------------------
// Neighborhood collaborative filtering

enum class NeighborhoodMode { user_based, item_based };

struct NeighborhoodConfig {
    NeighborhoodMode mode = NeighborhoodMode::user_based;
    std::size_t k = 40;
    double shrinkage = 25.0;
    bool clamp_predictions = true;
};

/**
 * User-user or item-item CF with shrunk Pearson similarities.
 *
 * sim(a, b) = pearson over co-rated entries * n_co / (n_co + shrinkage), zero when fewer than two
 * co-rated entries exist. A prediction is the target entity's mean plus the similarity-weighted
 * average of the mean-centred ratings of its K most similar positively correlated neighbours that
 * rated the other side of the pair. Fallbacks: entity mean, then the global mean.
 */
struct NeighborhoodModel {
    NeighborhoodConfig config;
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    double scale_min = 0.0;
    double scale_max = 0.0;
    double global_mean = 0.0;
    std::vector<std::vector<std::pair<Index, double>>> by_user;  // sorted by item
    std::vector<std::vector<std::pair<Index, double>>> by_item;  // sorted by user
    std::vector<double> user_mean;
    std::vector<double> item_mean;
    Eigen::MatrixXd similarity;  // between users (user-based) or items (item-based)
};

NeighborhoodModel fit_neighborhood(const RatingDataset& train, const NeighborhoodConfig& config);
double predict(const NeighborhoodModel& model, Index u, Index i);

// ---------------------------------------------------------------------------------------------
// Matrix factorization baselines

enum class MfVariant { svd, nmf, regularized_nmf };

MfVariant parse_mf_variant(std::string_view tag);
std::string_view mf_variant_name(MfVariant variant);

struct MfConfig {
    MfVariant variant = MfVariant::svd;
    std::size_t k = 8;
    double eta = 0.01;
    double lambda = 0.1;  // forced to 0 for plain nmf
    std::size_t epochs = 50;
    std::uint64_t seed = 42;
    bool clamp_predictions = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const MfConfig& c);
void from_json(const nlohmann::json& j, MfConfig& c);

/**
 * svd: mu + b_u + b_i + P[u,:] . Q[:,i], biased SGD on observed ratings.
 * nmf / regularized_nmf: P[u,:] . Q[:,i] with P, Q >= 0, projected SGD (negative entries are
 * truncated to zero after every update).
 */
struct MfModel {
    MfConfig config;
    double mu = 0.0;
    Eigen::VectorXd b_user;
    Eigen::VectorXd b_item;
    Eigen::MatrixXd P;  // n x k
    Eigen::MatrixXd Q;  // k x m
    double scale_min = 0.0;
    double scale_max = 0.0;
    std::vector<std::uint8_t> user_seen;
    std::vector<std::uint8_t> item_seen;
    std::vector<double> epoch_rmse;
};

MfModel fit_mf(const RatingDataset& train, const MfConfig& config);

/// Unclamped model output for a seen pair.
double predict_raw(const MfModel& model, Index u, Index i);

/// Same cold-start chain as the NSNMF model, clamped when configured.
double predict(const MfModel& model, Index u, Index i);

nlohmann::json to_checkpoint(const MfModel& model);
MfModel mf_from_checkpoint(const nlohmann::json& j);

/// Neighborhood checkpoints store the training ratings; similarities are recomputed on load.
nlohmann::json to_checkpoint(const NeighborhoodModel& model);
NeighborhoodModel neighborhood_from_checkpoint(const nlohmann::json& j);

}  // namespace nsnmf
