#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nsnmf/baselines.hpp"
#include "nsnmf/data.hpp"
#include "nsnmf/eval.hpp"
#include "nsnmf/model.hpp"
#include "nsnmf/report.hpp"

namespace nsnmf {

enum class Method { nsnmf_relu, nsnmf_softplus, nsnmf_relu_bias, svd, nmf, reg_nmf, user_cf, item_cf };

Method parse_method(std::string_view tag);
std::string_view method_name(Method method);
bool is_nsnmf(Method method);
const std::vector<Method>& all_methods();

/// Hyperparameters shared by every method; each method reads the subset it needs.
struct MethodSettings {
    std::size_t dim = 8;                  // latent width (k, and l for NSNMF)
    std::size_t layers = 2;               // NSNMF depth f
    std::vector<std::size_t> dims;        // explicit NSNMF widths; overrides dim/layers when set
    double eta = 0.01;
    double lambda = 0.1;
    std::size_t epochs = 50;
    std::uint64_t seed = 42;
    bool early_stopping = false;
    std::size_t neighbors = 40;
    double shrinkage = 25.0;
    bool clamp_predictions = true;
};

void to_json(nlohmann::json& j, const MethodSettings& s);
void from_json(const nlohmann::json& j, MethodSettings& s);

TrainConfig nsnmf_config(Method method, const MethodSettings& settings);
MfConfig mf_config(Method method, const MethodSettings& settings);
NeighborhoodConfig neighborhood_config(Method method, const MethodSettings& settings);

using TrainedModel = std::variant<NsnmfModel, MfModel, NeighborhoodModel>;

struct FitResult {
    TrainedModel model;
    std::optional<TrainReport> report;  // NSNMF only
};

FitResult fit_method(Method method, const MethodSettings& settings, const RatingDataset& train);

double predict(const TrainedModel& model, Index u, Index i);
double evaluate_rmse(const TrainedModel& model, const RatingDataset& test);

nlohmann::json to_checkpoint(const TrainedModel& model);
TrainedModel from_checkpoint(const nlohmann::json& j);
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

enum class Representation { activated, deep };

/// Item vectors (one per column) used for clustering: NSNMF activated features g(S2 ...) or the
/// deepest layer Q; factorization baselines return Q either way.
Eigen::MatrixXd item_features(const TrainedModel& model, Representation rep = Representation::activated);

// ---------------------------------------------------------------------------------------------
// Cross-validated grid search

struct CvGrid {
    std::vector<std::size_t> dims{4, 6, 8, 10, 15, 20};
    std::vector<double> etas{0.1, 0.01, 0.001};
    std::vector<double> lambdas{0.1, 0.01, 0.001};
};

struct CvPoint {
    std::size_t dim = 0;
    double eta = 0.0;
    double lambda = 0.0;
    std::vector<double> fold_rmse;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds
    bool failed = false;
    std::string error;
};

struct CvReport {
    Method method = Method::nsnmf_relu_bias;
    std::size_t n_folds = 0;
    std::uint64_t seed = 0;
    std::vector<CvPoint> points;  // grid order: dims outer, then etas, then lambdas
    std::optional<std::size_t> best;
};

void to_json(nlohmann::json& j, const CvReport& r);

/// Evaluates every grid point on every fold. The winner has the lowest mean validation RMSE;
/// ties go to the smaller dimension, then the larger lambda, then grid order. `jobs` > 1 runs
/// grid points on worker threads; results are merged in grid order.
CvReport run_cv(Method method, const MethodSettings& base, const RatingDataset& train, const CvGrid& grid,
                std::size_t n_folds, std::uint64_t seed, std::size_t jobs = 1);

/// Per-fold table as CSV: method,dim,eta,lambda,fold,rmse,status.
std::string cv_table_csv(const CvReport& report);

// ---------------------------------------------------------------------------------------------
// Clustering sweep

struct WcssPoint {
    std::size_t k = 0;
    double wcss = 0.0;
    double objective = 0.0;
};

std::vector<WcssPoint> wcss_sweep(const Eigen::MatrixXd& features, const std::vector<std::size_t>& ks,
                                  std::uint64_t seed, const KMeansOptions& options,
                                  WcssDistance distance = WcssDistance::euclidean);

// ---------------------------------------------------------------------------------------------
// End-to-end experiment configuration

struct DatasetSpec {
    std::string name;  // ml100k, filmtrust, amusic or free-form
    std::filesystem::path path;
    RatingFormat format = RatingFormat::automatic;
    std::size_t min_user_ratings = 20;
    std::size_t min_item_ratings = 0;
    std::optional<double> scale_min;
    std::optional<double> scale_max;
    std::optional<std::size_t> dim;  // final latent width for this dataset
};

/// Published per-dataset defaults (filters and final latent width) for known dataset names.
DatasetSpec dataset_defaults(const std::string& name, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const DatasetSpec& d);
void from_json(const nlohmann::json& j, DatasetSpec& d);

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    Method method = Method::nsnmf_relu_bias;
    std::vector<Method> methods;  // reproduce: methods to compare (all when empty)
    MethodSettings settings;
    std::uint64_t split_seed = 42;
    double train_fraction = 0.8;
    std::size_t folds = 10;
    CvGrid grid;
    std::size_t jobs = 1;
    std::vector<std::size_t> cluster_ks{2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<std::size_t> cluster_dims{3, 8};
    std::size_t restarts = 20;
    std::size_t max_iters = 300;
    bool squared_wcss = false;
    std::size_t deep_layers = 3;  // depth compared against the two-layer model
    bool save_checkpoints = false;
    std::filesystem::path out;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Prepares every dataset, trains every method with the final settings, evaluates test RMSE,
/// compares two-layer and deeper NSNMF, sweeps k-means over item representations and writes
/// metrics.csv/json, wcss_<dataset>.csv and wcss_<dataset>.svg under `config.out`. The returned
/// report holds computed rows followed by the published reference rows.
MetricsReport reproduce(const ExperimentConfig& config);

}  // namespace nsnmf
