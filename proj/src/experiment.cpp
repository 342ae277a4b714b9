#include "nsnmf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <mutex>
#include <thread>

#include "nsnmf/errors.hpp"
#include "nsnmf/format.hpp"

namespace nsnmf {

namespace {

struct MethodName {
    Method method;
    std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::nsnmf_relu, "nsnmf-relu"}, {Method::nsnmf_softplus, "nsnmf-softplus"},
    {Method::nsnmf_relu_bias, "nsnmf-relu-bias"}, {Method::svd, "svd"},
    {Method::nmf, "nmf"}, {Method::reg_nmf, "reg-nmf"},
    {Method::user_cf, "user-cf"}, {Method::item_cf, "item-cf"},
};

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Method parse_method(std::string_view tag) {
    for (const auto& [method, name] : kMethodNames)
        if (name == tag) return method;
    throw ConfigError("unknown method '" + std::string(tag) +
                      "' (nsnmf-relu|nsnmf-softplus|nsnmf-relu-bias|svd|nmf|reg-nmf|user-cf|item-cf)");
}

std::string_view method_name(Method method) {
    for (const auto& [m, name] : kMethodNames)
        if (m == method) return name;
    return "unknown";
}

bool is_nsnmf(Method method) {
    return method == Method::nsnmf_relu || method == Method::nsnmf_softplus || method == Method::nsnmf_relu_bias;
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::user_cf, Method::item_cf,         Method::svd,
                                             Method::nmf,     Method::reg_nmf,         Method::nsnmf_relu,
                                             Method::nsnmf_softplus, Method::nsnmf_relu_bias};
    return methods;
}

void to_json(nlohmann::json& j, const MethodSettings& s) {
    j = nlohmann::json{{"dim", s.dim},
                       {"layers", s.layers},
                       {"dims", s.dims},
                       {"eta", s.eta},
                       {"lambda", s.lambda},
                       {"epochs", s.epochs},
                       {"seed", s.seed},
                       {"early_stopping", s.early_stopping},
                       {"neighbors", s.neighbors},
                       {"shrinkage", s.shrinkage},
                       {"clamp_predictions", s.clamp_predictions}};
}

void from_json(const nlohmann::json& j, MethodSettings& s) {
    MethodSettings d;
    s.dim = j.value("dim", d.dim);
    s.layers = j.value("layers", d.layers);
    s.dims = j.value("dims", d.dims);
    s.eta = j.value("eta", d.eta);
    s.lambda = j.value("lambda", d.lambda);
    s.epochs = j.value("epochs", d.epochs);
    s.seed = j.value("seed", d.seed);
    s.early_stopping = j.value("early_stopping", d.early_stopping);
    s.neighbors = j.value("neighbors", d.neighbors);
    s.shrinkage = j.value("shrinkage", d.shrinkage);
    s.clamp_predictions = j.value("clamp_predictions", d.clamp_predictions);
}

TrainConfig nsnmf_config(Method method, const MethodSettings& s) {
    if (!is_nsnmf(method)) throw ConfigError(std::string(method_name(method)) + " is not an NSNMF method");
    if (s.dims.empty() && s.layers < 2) throw ConfigError("NSNMF needs at least 2 layers");
    TrainConfig c;
    c.dims = s.dims.empty() ? std::vector<std::size_t>(s.layers, s.dim) : s.dims;
    c.eta = s.eta;
    c.lambda = s.lambda;
    c.epochs = s.epochs;
    c.seed = s.seed;
    c.activation = method == Method::nsnmf_softplus ? Activation::softplus : Activation::relu;
    c.use_bias = method == Method::nsnmf_relu_bias;
    c.clamp_predictions = s.clamp_predictions;
    c.early_stopping = s.early_stopping;
    return c;
}

MfConfig mf_config(Method method, const MethodSettings& s) {
    MfConfig c;
    switch (method) {
        case Method::svd: c.variant = MfVariant::svd; break;
        case Method::nmf: c.variant = MfVariant::nmf; break;
        case Method::reg_nmf: c.variant = MfVariant::regularized_nmf; break;
        default: throw ConfigError(std::string(method_name(method)) + " is not a factorization baseline");
    }
    c.k = s.dim;
    c.eta = s.eta;
    c.lambda = s.lambda;
    c.epochs = s.epochs;
    c.seed = s.seed;
    c.clamp_predictions = s.clamp_predictions;
    return c;
}

NeighborhoodConfig neighborhood_config(Method method, const MethodSettings& s) {
    if (method != Method::user_cf && method != Method::item_cf)
        throw ConfigError(std::string(method_name(method)) + " is not a neighbourhood method");
    NeighborhoodConfig c;
    c.mode = method == Method::user_cf ? NeighborhoodMode::user_based : NeighborhoodMode::item_based;
    c.k = s.neighbors;
    c.shrinkage = s.shrinkage;
    c.clamp_predictions = s.clamp_predictions;
    return c;
}

FitResult fit_method(Method method, const MethodSettings& settings, const RatingDataset& train) {
    if (is_nsnmf(method)) {
        auto result = nsnmf::train(train, nsnmf_config(method, settings));
        return {std::move(result.model), std::move(result.report)};
    }
    if (method == Method::user_cf || method == Method::item_cf)
        return {fit_neighborhood(train, neighborhood_config(method, settings)), std::nullopt};
    return {fit_mf(train, mf_config(method, settings)), std::nullopt};
}

double predict(const TrainedModel& model, Index u, Index i) {
    return std::visit([u, i](const auto& m) { return nsnmf::predict(m, u, i); }, model);
}

double evaluate_rmse(const TrainedModel& model, const RatingDataset& test) {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(test.size());
    for (const auto& t : test.triples) pairs.emplace_back(t.rating, predict(model, t.user, t.item));
    return rmse(pairs);
}

nlohmann::json to_checkpoint(const TrainedModel& model) {
    return std::visit([](const auto& m) { return nsnmf::to_checkpoint(m); }, model);
}

TrainedModel from_checkpoint(const nlohmann::json& j) {
    const auto kind = j.value("kind", "");
    if (kind == "nsnmf") return nsnmf_from_checkpoint(j);
    if (kind == "mf") return mf_from_checkpoint(j);
    if (kind == "neighborhood") return neighborhood_from_checkpoint(j);
    throw DataError("unknown checkpoint kind '" + kind + "'");
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text(path, to_checkpoint(model).dump() + "\n");
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such checkpoint: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("checkpoint " + path.string() + " is not JSON: " + e.what());
    }
    return from_checkpoint(j);
}

Eigen::MatrixXd item_features(const TrainedModel& model, Representation rep) {
    return std::visit(overloaded{
                          [rep](const NsnmfModel& m) -> Eigen::MatrixXd {
                              auto r = item_representation(m);
                              return rep == Representation::activated ? r.activated : r.deep;
                          },
                          [](const MfModel& m) -> Eigen::MatrixXd { return m.Q; },
                          [](const NeighborhoodModel&) -> Eigen::MatrixXd {
                              throw ConfigError("neighbourhood models have no item representation");
                          },
                      },
                      model);
}

// ---------------------------------------------------------------------------------------------

void to_json(nlohmann::json& j, const CvReport& r) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points) {
        points.push_back({{"dim", p.dim},
                          {"eta", p.eta},
                          {"lambda", p.lambda},
                          {"fold_rmse", p.fold_rmse},
                          {"mean", p.mean},
                          {"stddev", p.stddev},
                          {"failed", p.failed},
                          {"error", p.error}});
    }
    j = nlohmann::json{{"method", std::string(method_name(r.method))},
                       {"folds", r.n_folds},
                       {"seed", r.seed},
                       {"points", std::move(points)}};
    if (r.best) {
        const auto& b = r.points[*r.best];
        j["best"] = {{"index", *r.best}, {"dim", b.dim}, {"eta", b.eta}, {"lambda", b.lambda}, {"mean", b.mean}};
    } else {
        j["best"] = nullptr;
    }
}

CvReport run_cv(Method method, const MethodSettings& base, const RatingDataset& train, const CvGrid& grid,
                std::size_t n_folds, std::uint64_t seed, std::size_t jobs) {
    if (grid.dims.empty() || grid.etas.empty() || grid.lambdas.empty()) throw ConfigError("empty CV grid");
    const auto plan = make_folds(train, n_folds, seed);

    CvReport report;
    report.method = method;
    report.n_folds = n_folds;
    report.seed = seed;
    const bool neighborhood = method == Method::user_cf || method == Method::item_cf;
    for (auto d : grid.dims) {
        for (auto eta : grid.etas) {
            for (auto lambda : grid.lambdas) {
                report.points.push_back({d, eta, lambda, {}, 0.0, 0.0, false, {}});
                if (neighborhood) break;  // no tunable parameters in this grid
            }
            if (neighborhood) break;
        }
        if (neighborhood) break;
    }

    auto evaluate = [&](CvPoint& point) {
        MethodSettings s = base;
        s.dim = point.dim;
        s.dims.clear();
        s.eta = point.eta;
        s.lambda = point.lambda;
        try {
            for (const auto& [fit, validation] : plan.folds)
                point.fold_rmse.push_back(evaluate_rmse(fit_method(method, s, fit).model, validation));
        } catch (const DivergenceError& e) {
            point.failed = true;
            point.error = e.what();
            return;
        }
        double sum = 0.0;
        for (double v : point.fold_rmse) sum += v;
        point.mean = sum / static_cast<double>(point.fold_rmse.size());
        double ss = 0.0;
        for (double v : point.fold_rmse) ss += (v - point.mean) * (v - point.mean);
        point.stddev = point.fold_rmse.size() > 1 ? std::sqrt(ss / static_cast<double>(point.fold_rmse.size() - 1)) : 0.0;
        if (!std::isfinite(point.mean)) {
            point.failed = true;
            point.error = "non-finite validation RMSE";
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, report.points.size());
    if (workers == 1) {
        for (auto& p : report.points) evaluate(p);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t idx; (idx = next.fetch_add(1)) < report.points.size();) {
                    try {
                        evaluate(report.points[idx]);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    for (std::size_t idx = 0; idx < report.points.size(); ++idx) {
        const auto& p = report.points[idx];
        if (p.failed) continue;
        if (!report.best) {
            report.best = idx;
            continue;
        }
        const auto& b = report.points[*report.best];
        const bool better = p.mean < b.mean || (p.mean == b.mean && (p.dim < b.dim || (p.dim == b.dim && p.lambda > b.lambda)));
        if (better) report.best = idx;
    }
    return report;
}

std::string cv_table_csv(const CvReport& report) {
    std::string out = "method,dim,eta,lambda,fold,rmse,status\n";
    const std::string method(method_name(report.method));
    for (const auto& p : report.points) {
        const std::string prefix = method + ',' + std::to_string(p.dim) + ',' + format_double(p.eta) + ',' +
                                   format_double(p.lambda) + ',';
        if (p.failed) {
            out += prefix + ",," + csv_field(p.error) + '\n';
            continue;
        }
        for (std::size_t f = 0; f < p.fold_rmse.size(); ++f)
            out += prefix + std::to_string(f) + ',' + format_double(p.fold_rmse[f]) + ",ok\n";
    }
    return out;
}

std::vector<WcssPoint> wcss_sweep(const Eigen::MatrixXd& features, const std::vector<std::size_t>& ks,
                                  std::uint64_t seed, const KMeansOptions& options, WcssDistance distance) {
    std::vector<WcssPoint> curve;
    for (auto k : ks) {
        const auto result = kmeans(features, k, seed, options);
        curve.push_back({k, wcss(features, result.assignments, distance), result.objective});
    }
    return curve;
}

// ---------------------------------------------------------------------------------------------

DatasetSpec dataset_defaults(const std::string& name, const std::filesystem::path& path) {
    DatasetSpec d;
    d.name = name;
    d.path = path;
    if (name == "ml100k") {
        d.dim = 8;
    } else if (name == "filmtrust") {
        d.dim = 4;
    } else if (name == "amusic") {
        d.dim = 6;
        d.min_item_ratings = 2;
    }
    return d;
}

void to_json(nlohmann::json& j, const DatasetSpec& d) {
    j = nlohmann::json{{"name", d.name},
                       {"path", d.path.string()},
                       {"format", std::string(format_name(d.format))},
                       {"min_user_ratings", d.min_user_ratings},
                       {"min_item_ratings", d.min_item_ratings}};
    j["scale_min"] = d.scale_min ? nlohmann::json(*d.scale_min) : nlohmann::json(nullptr);
    j["scale_max"] = d.scale_max ? nlohmann::json(*d.scale_max) : nlohmann::json(nullptr);
    j["dim"] = d.dim ? nlohmann::json(*d.dim) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, DatasetSpec& d) {
    d = dataset_defaults(j.value("name", std::string("dataset")), j.at("path").get<std::string>());
    d.format = parse_format(j.value("format", std::string("auto")));
    d.min_user_ratings = j.value("min_user_ratings", d.min_user_ratings);
    d.min_item_ratings = j.value("min_item_ratings", d.min_item_ratings);
    if (j.contains("scale_min") && !j["scale_min"].is_null()) d.scale_min = j["scale_min"].get<double>();
    if (j.contains("scale_max") && !j["scale_max"].is_null()) d.scale_max = j["scale_max"].get<double>();
    if (j.contains("dim") && !j["dim"].is_null()) d.dim = j["dim"].get<std::size_t>();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    std::vector<std::string> methods;
    for (auto m : c.methods) methods.emplace_back(method_name(m));
    j = nlohmann::json{{"datasets", c.datasets},
                       {"method", std::string(method_name(c.method))},
                       {"methods", methods},
                       {"settings", c.settings},
                       {"split_seed", c.split_seed},
                       {"train_fraction", c.train_fraction},
                       {"folds", c.folds},
                       {"grid", {{"dims", c.grid.dims}, {"etas", c.grid.etas}, {"lambdas", c.grid.lambdas}}},
                       {"jobs", c.jobs},
                       {"cluster_ks", c.cluster_ks},
                       {"cluster_dims", c.cluster_dims},
                       {"restarts", c.restarts},
                       {"max_iters", c.max_iters},
                       {"squared_wcss", c.squared_wcss},
                       {"deep_layers", c.deep_layers},
                       {"save_checkpoints", c.save_checkpoints},
                       {"out", c.out.string()}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    ExperimentConfig d;
    c.datasets = j.value("datasets", d.datasets);
    c.method = parse_method(j.value("method", std::string(method_name(d.method))));
    c.methods.clear();
    for (const auto& m : j.value("methods", std::vector<std::string>{})) c.methods.push_back(parse_method(m));
    c.settings = j.value("settings", d.settings);
    c.split_seed = j.value("split_seed", d.split_seed);
    c.train_fraction = j.value("train_fraction", d.train_fraction);
    c.folds = j.value("folds", d.folds);
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        c.grid.dims = g.value("dims", d.grid.dims);
        c.grid.etas = g.value("etas", d.grid.etas);
        c.grid.lambdas = g.value("lambdas", d.grid.lambdas);
    }
    c.jobs = j.value("jobs", d.jobs);
    c.cluster_ks = j.value("cluster_ks", d.cluster_ks);
    c.cluster_dims = j.value("cluster_dims", d.cluster_dims);
    c.restarts = j.value("restarts", d.restarts);
    c.max_iters = j.value("max_iters", d.max_iters);
    c.squared_wcss = j.value("squared_wcss", d.squared_wcss);
    c.deep_layers = j.value("deep_layers", d.deep_layers);
    c.save_checkpoints = j.value("save_checkpoints", d.save_checkpoints);
    c.out = j.value("out", std::string());
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string wcss_csv(const std::vector<std::pair<std::string, std::vector<WcssPoint>>>& curves) {
    std::string out = "representation,k,wcss,kmeans_objective\n";
    for (const auto& [label, curve] : curves)
        for (const auto& p : curve)
            out += csv_field(label) + ',' + std::to_string(p.k) + ',' + format_double(p.wcss) + ',' +
                   format_double(p.objective) + '\n';
    return out;
}

}  // namespace

MetricsReport reproduce(const ExperimentConfig& config) {
    if (config.datasets.empty()) throw ConfigError("reproduce needs at least one dataset");
    if (config.out.empty()) throw ConfigError("reproduce needs an output directory");
    std::filesystem::create_directories(config.out);
    write_text(config.out / "config.json", nlohmann::json(config).dump(2) + "\n");

    const auto& methods = config.methods.empty() ? all_methods() : config.methods;
    const KMeansOptions kmeans_options{config.restarts, config.max_iters};
    const auto distance = config.squared_wcss ? WcssDistance::squared : WcssDistance::euclidean;

    MetricsReport report;
    report.metadata["started"] = utc_timestamp();
    report.metadata["seed"] = config.settings.seed;
    report.metadata["split_seed"] = config.split_seed;
    report.metadata["config_digest"] = config_digest(nlohmann::json(config));

    for (const auto& spec : config.datasets) {
        LoadOptions load{spec.format, spec.scale_min, spec.scale_max};
        const auto prepared = prepare(spec.path, load, spec.min_user_ratings, spec.min_item_ratings,
                                      config.train_fraction, config.split_seed);
        const auto dataset_dir = config.out / spec.name;
        write_prepared(dataset_dir / "split", prepared);
        report.metadata["datasets"][spec.name] = prepared.manifest;

        MethodSettings settings = config.settings;
        settings.dim = spec.dim.value_or(settings.dim);
        settings.dims.clear();
        const auto& train = prepared.split.train;
        const auto& test = prepared.split.test;

        std::map<std::string, TrainedModel> trained;
        auto record = [&](const std::string& label, Method method, const MethodSettings& s) -> const TrainedModel& {
            auto fit = fit_method(method, s, train);
            const nlohmann::json echo{{"method", method_name(method)}, {"settings", s}};
            report.add(label, spec.name, config_digest(echo), "test_rmse", evaluate_rmse(fit.model, test));
            if (fit.report) report.add(label, spec.name, config_digest(echo), "epochs_run",
                                       static_cast<double>(fit.report->epochs_run));
            if (config.save_checkpoints) save_checkpoint(fit.model, dataset_dir / "checkpoints" / (label + ".json"));
            return trained.emplace(label, std::move(fit.model)).first->second;
        };

        for (auto method : methods) record(std::string(method_name(method)), method, settings);

        // Depth comparison on the plain ReLU model.
        MethodSettings two = settings;
        two.layers = 2;
        MethodSettings deep = settings;
        deep.layers = config.deep_layers;
        record("nsnmf-relu-2layer", Method::nsnmf_relu, two);
        record("nsnmf-relu-" + std::to_string(config.deep_layers) + "layer", Method::nsnmf_relu, deep);

        // Item-representation clustering.
        std::vector<std::pair<std::string, std::vector<WcssPoint>>> curves;
        for (auto d : config.cluster_dims) {
            MethodSettings s = settings;
            s.dim = d;
            s.layers = 2;
            for (auto method : {Method::nsnmf_relu, Method::nmf}) {
                const std::string label = std::string(method_name(method)) + "-" + std::to_string(d) + "d";
                auto fit = fit_method(method, s, train);
                auto curve = wcss_sweep(item_features(fit.model), config.cluster_ks, config.settings.seed,
                                        kmeans_options, distance);
                const nlohmann::json echo{{"method", method_name(method)}, {"settings", s}};
                for (const auto& p : curve)
                    report.add(label, spec.name, config_digest(echo), "wcss_k" + std::to_string(p.k), p.wcss);
                curves.emplace_back(label, std::move(curve));
            }
        }
        if (!curves.empty()) {
            write_text(dataset_dir / ("wcss_" + spec.name + ".csv"), wcss_csv(curves));
            std::vector<Curve> series;
            for (const auto& [label, curve] : curves) {
                Curve c{label, {}};
                for (const auto& p : curve) c.points.emplace_back(static_cast<double>(p.k), p.wcss);
                if (c.points.size() >= 2) series.push_back(std::move(c));
            }
            if (!series.empty()) plot_wcss(series, dataset_dir / ("wcss_" + spec.name + ".svg"));
        }
    }

    for (const auto& row : MetricsReport::published_reference().rows) report.rows.push_back(row);
    report.metadata["finished"] = utc_timestamp();
    write_metrics(report, config.out / "metrics.csv");
    return report;
}

}  // namespace nsnmf
