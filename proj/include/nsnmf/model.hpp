#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nsnmf/activation.hpp"
#include "nsnmf/data.hpp"

namespace nsnmf {

struct TrainConfig {
    double eta = 0.01;
    double lambda = 0.1;
    /// Layer widths [k, l, l2, ...]: P is n x k, S2 is k x l, S3 is l x l2, ..., the deepest
    /// item factor Q is dims.back() x m. Two entries give the two-layer model.
    std::vector<std::size_t> dims{8, 8};
    std::size_t epochs = 50;
    std::uint64_t seed = 42;
    Activation activation = Activation::relu;
    /// When false the prediction is P g(S Q) alone; mu is kept only as the cold-start fallback.
    bool use_bias = true;
    /// When false, plain SGD with step eta (diagnostic mode used by the single-step oracles).
    bool adagrad = true;
    double adagrad_epsilon = 1e-8;
    bool clamp_predictions = true;
    bool early_stopping = false;
    double early_stopping_fraction = 0.05;
    std::size_t patience = 5;
    double min_delta = 1e-4;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/**
 * Multilayer non-linear semi-NMF rating model
 *
 *     r_ui ~ mu + b_u + b_i + P[u,:] . g(S2 g(S3 ... g(Sf Q[:,i])))
 *
 * P and the S matrices are unconstrained; Q (the deepest item factor) stays non-negative.
 * The dense bias matrix is never materialized.
 */
struct NsnmfModel {
    TrainConfig config;
    double mu = 0.0;
    Eigen::VectorXd b_user;
    Eigen::VectorXd b_item;
    Eigen::MatrixXd P;
    std::vector<Eigen::MatrixXd> S;  // S[t] maps layer t+1 (dims[t+1]) to layer t (dims[t])
    Eigen::MatrixXd Q;
    double scale_min = 0.0;
    double scale_max = 0.0;
    std::vector<std::uint8_t> user_seen;
    std::vector<std::uint8_t> item_seen;

    std::size_t n_users() const { return static_cast<std::size_t>(P.rows()); }
    std::size_t n_items() const { return static_cast<std::size_t>(Q.cols()); }
    std::size_t n_layers() const { return S.size() + 1; }
};

/// Squared-gradient accumulators, one per trainable entry.
struct AdaGradState {
    Eigen::VectorXd b_user;
    Eigen::VectorXd b_item;
    Eigen::MatrixXd P;
    std::vector<Eigen::MatrixXd> S;
    Eigen::MatrixXd Q;
};

/// Forward pass through the item layers for one rating.
struct PredictionContext {
    double prediction = 0.0;  // unclamped
    double error = 0.0;       // r_ui - prediction
    std::vector<Eigen::VectorXd> pre;   // pre[t] = S[t] * post[t+1]
    std::vector<Eigen::VectorXd> post;  // post[L] = Q[:,i], post[t] = g(pre[t])
};

/**
 * Gradient of the per-sample loss
 *
 *     1/2 e^2 + lambda/2 (b_u^2 + b_i^2 + |P[u,:]|^2 + |Q[:,i]|^2 + sum_j |S_j|_F^2)
 *
 * restricted to the parameters one rating touches. Taking a step of -eta times this
 * gradient is exactly the classic per-rating update (bias terms drop out when the
 * model has no bias).
 */
struct SampleGradient {
    double error = 0.0;
    double b_user = 0.0;
    double b_item = 0.0;
    Eigen::VectorXd p;               // d/dP[u,:]
    std::vector<Eigen::MatrixXd> S;  // d/dS[t]
    Eigen::VectorXd q;               // d/dQ[:,i]
};

struct StepStats {
    double error = 0.0;
    std::size_t rejected_s = 0;
    std::size_t rejected_q = 0;
};

struct TrainReport {
    std::vector<double> epoch_rmse;       // training RMSE after each epoch (unclamped)
    std::vector<double> validation_rmse;  // only with early stopping
    std::vector<double> min_q;            // min entry of Q after each epoch
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    std::size_t rejected_s = 0;
    std::size_t rejected_q = 0;
    double wall_seconds = 0.0;
    TrainConfig config;
};

void to_json(nlohmann::json& j, const TrainReport& r);

/// Random uniform (0,1] initialization of P, S and Q in that order, each row-major; mu is the
/// training mean, biases and accumulators start at zero.
std::pair<NsnmfModel, AdaGradState> init(const TrainConfig& config, std::size_t n_users,
                                         std::size_t n_items, const RatingDataset& train);

PredictionContext forward(const NsnmfModel& model, Index u, Index i);

/// Unclamped prediction for a seen (user, item) pair; no cold-start handling.
double predict_raw(const NsnmfModel& model, Index u, Index i);

/// Prediction with cold-start fallback (unseen user -> mu + b_i, unseen item -> mu + b_u,
/// both -> mu) and clamping to the rating scale when configured.
double predict(const NsnmfModel& model, Index u, Index i);

SampleGradient sample_gradient(const NsnmfModel& model, const RatingTriple& r, double lambda);

/// One per-rating update in the order b_u, b_i, P row, S entries, Q column. All gradients are
/// taken at the entry values. An S entry is kept only if the activation it feeds stays positive
/// for this item; a Q entry is kept only if it stays positive.
StepStats sgd_step(NsnmfModel& model, AdaGradState& state, const RatingTriple& r, const TrainConfig& config);

struct TrainResult {
    NsnmfModel model;
    TrainReport report;
};

using EpochCallback = std::function<void(std::size_t epoch, const NsnmfModel& model)>;

TrainResult train(const RatingDataset& train, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// sum (r - r_hat)^2 + lambda (|b_user|^2 + |b_item|^2 + |P|^2 + |Q|^2 + sum |S_j|^2); mu is not penalized.
double regularized_objective(const NsnmfModel& model, const RatingDataset& data, double lambda);

struct ItemRepresentation {
    Eigen::MatrixXd deep;       // Q, dims.back() x m
    Eigen::MatrixXd activated;  // g(S2 g(... Q)), dims[0] x m
};

ItemRepresentation item_representation(const NsnmfModel& model);

nlohmann::json to_checkpoint(const NsnmfModel& model);
NsnmfModel nsnmf_from_checkpoint(const nlohmann::json& j);

}  // namespace nsnmf
