// nsnmf command-line driver: prepare, train, eval, cv, cluster, reproduce.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nsnmf/errors.hpp"
#include "nsnmf/experiment.hpp"
#include "nsnmf/format.hpp"

namespace fs = std::filesystem;
using namespace nsnmf;

namespace {

struct Options {
    std::string config_file;
    std::string out;
    std::vector<std::string> datasets;
    std::string name;
    std::string format;
    std::string method;
    std::vector<std::string> methods;
    std::vector<std::size_t> dims;
    std::size_t layers = 0;
    double eta = 0.0;
    double lambda = 0.0;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.0;
    std::size_t min_user = 0;
    std::size_t min_item = 0;
    std::size_t folds = 0;
    std::size_t jobs = 0;
    bool early_stopping = false;
    std::vector<std::size_t> grid_dims;
    std::vector<double> grid_etas;
    std::vector<double> grid_lambdas;
    std::vector<std::size_t> ks;
    std::vector<std::size_t> cluster_dims;
    std::size_t restarts = 0;
    std::size_t max_iters = 0;
    bool squared_wcss = false;
    bool deep_features = false;
    std::string model;
    std::string split = "test";
    std::string data_dir = "data";
    bool save_checkpoints = false;
};

bool given(const CLI::App& app, const std::string& flag) {
    const CLI::Option* opt = app.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
}

/// Writes land in a hidden sibling directory and move into place only when the command succeeds.
class StagedOutput {
public:
    explicit StagedOutput(fs::path out) : out_(std::move(out)) {
        if (out_.empty()) throw ConfigError("no output directory");
        stage_ = out_.parent_path() / ("." + out_.filename().string() + ".partial");
        fs::remove_all(stage_);
        fs::create_directories(stage_);
    }
    StagedOutput(const StagedOutput&) = delete;
    StagedOutput& operator=(const StagedOutput&) = delete;
    ~StagedOutput() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(stage_, ec);
        }
    }

    const fs::path& dir() const { return stage_; }
    const fs::path& final_dir() const { return out_; }

    void commit() {
        fs::create_directories(out_);
        for (const auto& entry : fs::directory_iterator(stage_)) {
            const auto target = out_ / entry.path().filename();
            fs::remove_all(target);
            fs::rename(entry.path(), target);
        }
        fs::remove_all(stage_);
        committed_ = true;
    }

private:
    fs::path out_;
    fs::path stage_;
    bool committed_ = false;
};

std::string guess_dataset_name(const fs::path& path) {
    std::string s = path.string();
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s.find("filmtrust") != std::string::npos) return "filmtrust";
    if (s.find("amusic") != std::string::npos || s.find("amazon") != std::string::npos) return "amusic";
    if (s.find("ml-100k") != std::string::npos || s.find("ml100k") != std::string::npos ||
        s.find("movielens") != std::string::npos || s.find("ml-latest-small") != std::string::npos)
        return "ml100k";
    const auto stem = path.has_stem() ? path.stem().string() : std::string("dataset");
    return stem.empty() ? "dataset" : stem;
}

/// "name=path" or a bare path.
DatasetSpec dataset_spec(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq != std::string::npos && eq > 0) return dataset_defaults(arg.substr(0, eq), arg.substr(eq + 1));
    return dataset_defaults(guess_dataset_name(arg), arg);
}

ExperimentConfig load_config(const std::string& file) {
    ExperimentConfig config;
    if (file.empty()) return config;
    if (!fs::exists(file)) throw IoError("no such config file: " + file);
    try {
        config = nlohmann::json::parse(read_text(file)).get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad config file " + file + ": " + e.what());
    }
    return config;
}

/// Config file first, explicit flags on top.
ExperimentConfig resolve(const CLI::App& app, const Options& o, const std::string& command) {
    ExperimentConfig c = load_config(o.config_file);
    auto& s = c.settings;

    if (given(app, "--dataset")) {
        c.datasets.clear();
        for (const auto& d : o.datasets) c.datasets.push_back(dataset_spec(d));
    }
    for (auto& d : c.datasets) {
        if (given(app, "--name") && c.datasets.size() == 1) {
            const auto path = d.path;
            d = dataset_defaults(o.name, path);
        }
        if (given(app, "--format")) d.format = parse_format(o.format);
        if (given(app, "--min-user")) d.min_user_ratings = o.min_user;
        if (given(app, "--min-item")) d.min_item_ratings = o.min_item;
    }
    if (given(app, "--method")) c.method = parse_method(o.method);
    if (given(app, "--methods")) {
        c.methods.clear();
        for (const auto& m : o.methods) c.methods.push_back(parse_method(m));
    }
    if (given(app, "--dims")) {
        if (o.dims.size() == 1) {
            s.dim = o.dims[0];
            s.dims.clear();
            for (auto& d : c.datasets) d.dim.reset();
        } else {
            s.dims = o.dims;
            s.dim = o.dims[0];
        }
    }
    if (given(app, "--layers")) {
        s.layers = o.layers;
        if (!given(app, "--dims") || o.dims.size() == 1) s.dims.clear();
    }
    if (given(app, "--eta")) s.eta = o.eta;
    if (given(app, "--lambda")) s.lambda = o.lambda;
    if (given(app, "--epochs")) s.epochs = o.epochs;
    if (given(app, "--seed")) s.seed = o.seed;
    if (given(app, "--early-stopping")) s.early_stopping = o.early_stopping;
    if (given(app, "--split-seed")) c.split_seed = o.split_seed;
    if (given(app, "--train-fraction")) c.train_fraction = o.train_fraction;
    if (given(app, "--folds")) c.folds = o.folds;
    if (given(app, "--jobs")) c.jobs = o.jobs;
    if (given(app, "--grid-dims")) c.grid.dims = o.grid_dims;
    if (given(app, "--grid-etas")) c.grid.etas = o.grid_etas;
    if (given(app, "--grid-lambdas")) c.grid.lambdas = o.grid_lambdas;
    if (given(app, "--ks")) c.cluster_ks = o.ks;
    if (given(app, "--cluster-dims")) c.cluster_dims = o.cluster_dims;
    if (given(app, "--restarts")) c.restarts = o.restarts;
    if (given(app, "--max-iters")) c.max_iters = o.max_iters;
    if (given(app, "--squared-wcss")) c.squared_wcss = o.squared_wcss;
    if (given(app, "--save-checkpoints")) c.save_checkpoints = o.save_checkpoints;

    if (given(app, "--out")) {
        c.out = o.out;
    } else if (c.out.empty()) {
        const char* root = std::getenv("NSNMF_OUT");
        c.out = fs::path(root && *root ? root : "runs") / command;
    }
    return c;
}

const DatasetSpec& single_dataset(const ExperimentConfig& c) {
    if (c.datasets.empty()) throw ConfigError("--dataset is required");
    if (c.datasets.size() > 1) throw ConfigError("this command takes a single --dataset");
    return c.datasets.front();
}

/// A prepared directory (manifest.json present) is read as is; a raw file is prepared in memory.
PreparedData obtain(const DatasetSpec& spec, const ExperimentConfig& c) {
    if (fs::is_directory(spec.path)) {
        if (!fs::exists(spec.path / "manifest.json"))
            throw IoError(spec.path.string() + " is a directory without manifest.json");
        return read_prepared(spec.path);
    }
    if (!fs::exists(spec.path)) throw IoError("no such dataset: " + spec.path.string());
    LoadOptions load{spec.format, spec.scale_min, spec.scale_max};
    return prepare(spec.path, load, spec.min_user_ratings, spec.min_item_ratings, c.train_fraction, c.split_seed);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

MethodSettings settings_for(const ExperimentConfig& c, const DatasetSpec& spec) {
    MethodSettings s = c.settings;
    if (spec.dim && s.dims.empty()) s.dim = *spec.dim;
    return s;
}

// ---------------------------------------------------------------------------------------------

int cmd_prepare(const ExperimentConfig& c) {
    const auto& spec = single_dataset(c);
    if (fs::is_directory(spec.path)) throw ConfigError("prepare expects a raw ratings file");
    StagedOutput out(c.out);
    const auto prepared = obtain(spec, c);
    write_prepared(out.dir(), prepared);
    const auto& m = prepared.manifest;
    out.commit();
    std::cout << "prepared " << spec.name << ": " << m.ratings << " ratings, " << m.users << " users, " << m.items
              << " items (train " << m.train_size << ", test " << m.test_size << ") -> " << c.out.string() << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& c) {
    const auto& spec = single_dataset(c);
    const auto prepared = obtain(spec, c);
    const auto settings = settings_for(c, spec);
    StagedOutput out(c.out);
    auto run = c;
    run.out = out.final_dir();
    write_json(out.dir() / "config.json", run);

    auto fit = fit_method(c.method, settings, prepared.split.train);
    save_checkpoint(fit.model, out.dir() / "model.json");
    if (fit.report) write_json(out.dir() / "train_report.json", *fit.report);

    MetricsReport report;
    const nlohmann::json echo{{"method", method_name(c.method)}, {"settings", settings}};
    const auto digest = config_digest(echo);
    const std::string method(method_name(c.method));
    if (!prepared.split.train.empty())
        report.add(method, spec.name, digest, "train_rmse", evaluate_rmse(fit.model, prepared.split.train));
    if (!prepared.split.test.empty())
        report.add(method, spec.name, digest, "test_rmse", evaluate_rmse(fit.model, prepared.split.test));
    report.metadata["dataset"] = prepared.manifest;
    write_metrics(report, out.dir() / "metrics.csv");
    out.commit();

    for (const auto& row : report.rows) std::cout << row.metric << " " << format_double(row.value) << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& c, const Options& o) {
    if (o.model.empty()) throw ConfigError("--model is required");
    const auto& spec = single_dataset(c);
    const auto prepared = obtain(spec, c);
    const auto model = load_checkpoint(o.model);
    const RatingDataset* data = nullptr;
    if (o.split == "test") data = &prepared.split.test;
    else if (o.split == "train") data = &prepared.split.train;
    else if (o.split == "all") data = &prepared.full;
    else throw ConfigError("--split must be train, test or all");

    StagedOutput out(c.out);
    const double value = evaluate_rmse(model, *data);
    MetricsReport report;
    const std::string label = std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NsnmfModel>) return "nsnmf-" + std::string(activation_name(m.config.activation));
            else if constexpr (std::is_same_v<T, MfModel>) return std::string(mf_variant_name(m.config.variant));
            else return m.config.mode == NeighborhoodMode::user_based ? "user-cf" : "item-cf";
        },
        model);
    report.add(label, spec.name, config_digest(to_checkpoint(model).value("config", nlohmann::json::object())),
               o.split + "_rmse", value);
    report.metadata["model"] = fs::absolute(o.model).string();
    write_metrics(report, out.dir() / "metrics.csv");
    out.commit();
    std::cout << o.split << "_rmse " << format_double(value) << "\n";
    return 0;
}

int cmd_cv(const ExperimentConfig& c) {
    const auto& spec = single_dataset(c);
    const auto prepared = obtain(spec, c);
    StagedOutput out(c.out);
    auto run = c;
    run.out = out.final_dir();
    write_json(out.dir() / "config.json", run);

    const auto report = run_cv(c.method, c.settings, prepared.split.train, c.grid, c.folds, c.split_seed, c.jobs);
    write_json(out.dir() / "cv.json", report);
    write_text(out.dir() / "cv_folds.csv", cv_table_csv(report));
    out.commit();

    std::size_t failed = 0;
    for (const auto& p : report.points) failed += p.failed ? 1 : 0;
    if (report.best) {
        const auto& b = report.points[*report.best];
        std::cout << "best dim=" << b.dim << " eta=" << format_double(b.eta) << " lambda=" << format_double(b.lambda)
                  << " mean_rmse=" << format_double(b.mean) << " sd=" << format_double(b.stddev) << "\n";
    } else {
        std::cout << "every grid point failed\n";
    }
    if (failed > 0) std::cerr << failed << " grid point(s) failed; see cv.json\n";
    return 0;
}

int cmd_cluster(const ExperimentConfig& c, const Options& o) {
    const auto& spec = single_dataset(c);
    const KMeansOptions options{c.restarts, c.max_iters};
    const auto distance = c.squared_wcss ? WcssDistance::squared : WcssDistance::euclidean;
    const auto rep = o.deep_features ? Representation::deep : Representation::activated;

    std::vector<std::pair<std::string, TrainedModel>> models;
    if (!o.model.empty()) {
        models.emplace_back(fs::path(o.model).stem().string(), load_checkpoint(o.model));
    } else {
        const auto prepared = obtain(spec, c);
        const auto methods = c.methods.empty() ? std::vector<Method>{Method::nsnmf_relu, Method::nmf} : c.methods;
        for (auto d : c.cluster_dims) {
            MethodSettings s = c.settings;
            s.dim = d;
            s.dims.clear();
            for (auto m : methods)
                models.emplace_back(std::string(method_name(m)) + "-" + std::to_string(d) + "d",
                                    fit_method(m, s, prepared.split.train).model);
        }
    }

    StagedOutput out(c.out);
    auto run = c;
    run.out = out.final_dir();
    write_json(out.dir() / "config.json", run);

    std::string csv = "representation,k,wcss,kmeans_objective\n";
    nlohmann::json results = nlohmann::json::object();
    std::vector<Curve> curves;
    for (const auto& [label, model] : models) {
        const auto features = item_features(model, rep);
        Curve curve{label, {}};
        for (auto k : c.cluster_ks) {
            auto result = kmeans(features, k, c.settings.seed, options);
            if (distance == WcssDistance::squared) result.wcss = wcss(features, result.assignments, distance);
            results[label][std::to_string(k)] = result;
            curve.points.emplace_back(static_cast<double>(k), result.wcss);
            csv += csv_field(label) + ',' + std::to_string(k) + ',' + format_double(result.wcss) + ',' +
                   format_double(result.objective) + '\n';
        }
        curves.push_back(std::move(curve));
    }
    write_text(out.dir() / "wcss.csv", csv);
    write_json(out.dir() / "clusters.json", results);
    plot_wcss(curves, out.dir() / "wcss.svg");
    out.commit();
    std::cout << csv;
    return 0;
}

int cmd_reproduce(ExperimentConfig c, const Options& o) {
    if (c.datasets.empty()) {
        const fs::path root = o.data_dir;
        const std::pair<const char*, const char*> known[] = {
            {"ml100k", "ml-100k/ratings.tsv"}, {"filmtrust", "filmtrust/ratings.txt"}, {"amusic", "amusic/ratings.csv"}};
        for (const auto& [name, rel] : known) {
            if (fs::exists(root / rel))
                c.datasets.push_back(dataset_defaults(name, root / rel));
            else
                std::cerr << "skipping " << name << ": " << (root / rel).string() << " not found\n";
        }
        if (c.datasets.empty()) throw IoError("no datasets found under " + root.string());
    }
    StagedOutput out(c.out);
    auto staged = c;
    staged.out = out.dir();
    const auto report = reproduce(staged);
    write_json(out.dir() / "config.json", c);
    out.commit();

    for (const auto& row : report.select(Provenance::computed))
        if (row.metric == "test_rmse")
            std::cout << row.dataset << " " << row.method << " " << format_double(row.value) << "\n";
    std::cout << "wrote " << c.out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilayer non-linear semi-NMF for explicit ratings"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_file, "JSON experiment config; flags override its values");
        sub->add_option("--out", o.out, "Output directory (default $NSNMF_OUT/<command> or runs/<command>)");
        sub->add_option("--dataset", o.datasets, "Raw ratings file, prepared directory, or name=path");
        sub->add_option("--name", o.name, "Dataset name (ml100k, filmtrust, amusic, ...)");
        sub->add_option("--format", o.format, "auto|csv|tsv|dcolon|ws");
        sub->add_option("--min-user", o.min_user, "Minimum ratings per user");
        sub->add_option("--min-item", o.min_item, "Minimum ratings per item");
        sub->add_option("--split-seed", o.split_seed, "Train/test split seed");
        sub->add_option("--train-fraction", o.train_fraction, "Train share of the split");
    };
    auto model_flags = [&o](CLI::App* sub) {
        sub->add_option("--method", o.method,
                        "nsnmf-relu|nsnmf-softplus|nsnmf-relu-bias|svd|nmf|reg-nmf|user-cf|item-cf");
        sub->add_option("--dims", o.dims, "Latent width, or explicit NSNMF widths")->delimiter(',');
        sub->add_option("--layers", o.layers, "NSNMF depth when --dims is a single width");
        sub->add_option("--eta", o.eta, "Learning rate");
        sub->add_option("--lambda", o.lambda, "Regularization weight");
        sub->add_option("--epochs", o.epochs, "Training epochs");
        sub->add_option("--seed", o.seed, "Model seed");
        sub->add_flag("--early-stopping", o.early_stopping, "Stop on a held-out slice of the training split");
        sub->add_option("--jobs", o.jobs, "Worker threads");
    };

    auto* prepare_cmd = app.add_subcommand("prepare", "Filter, split and write a dataset with its manifest");
    common(prepare_cmd);

    auto* train_cmd = app.add_subcommand("train", "Train one method and report train/test RMSE");
    common(train_cmd);
    model_flags(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a prepared split");
    common(eval_cmd);
    eval_cmd->add_option("--model", o.model, "Checkpoint written by train")->required();
    eval_cmd->add_option("--split", o.split, "train|test|all");

    auto* cv_cmd = app.add_subcommand("cv", "Cross-validated grid search on the training split");
    common(cv_cmd);
    model_flags(cv_cmd);
    cv_cmd->add_option("--folds", o.folds, "Number of folds");
    cv_cmd->add_option("--grid-dims", o.grid_dims, "Latent widths to try")->delimiter(',');
    cv_cmd->add_option("--grid-etas", o.grid_etas, "Learning rates to try")->delimiter(',');
    cv_cmd->add_option("--grid-lambdas", o.grid_lambdas, "Regularization weights to try")->delimiter(',');

    auto* cluster_cmd = app.add_subcommand("cluster", "k-means WCSS sweep over item representations");
    common(cluster_cmd);
    model_flags(cluster_cmd);
    cluster_cmd->add_option("--methods", o.methods, "Methods to train and cluster")->delimiter(',');
    cluster_cmd->add_option("--model", o.model, "Cluster a checkpoint instead of training");
    cluster_cmd->add_option("--ks", o.ks, "Cluster counts")->delimiter(',');
    cluster_cmd->add_option("--cluster-dims", o.cluster_dims, "Latent widths to train")->delimiter(',');
    cluster_cmd->add_option("--restarts", o.restarts, "k-means restarts");
    cluster_cmd->add_option("--max-iters", o.max_iters, "Lloyd iterations per restart");
    cluster_cmd->add_flag("--squared-wcss", o.squared_wcss, "Use squared distances in WCSS");
    cluster_cmd->add_flag("--deep", o.deep_features, "Cluster the deepest item factor instead of activated features");

    auto* reproduce_cmd = app.add_subcommand("reproduce", "Full experiment suite on every available dataset");
    common(reproduce_cmd);
    model_flags(reproduce_cmd);
    reproduce_cmd->add_option("--methods", o.methods, "Methods to compare")->delimiter(',');
    reproduce_cmd->add_option("--data-dir", o.data_dir, "Where to look for datasets when --dataset is absent");
    reproduce_cmd->add_option("--ks", o.ks, "Cluster counts")->delimiter(',');
    reproduce_cmd->add_option("--cluster-dims", o.cluster_dims, "Latent widths for the clustering study")
        ->delimiter(',');
    reproduce_cmd->add_option("--restarts", o.restarts, "k-means restarts");
    reproduce_cmd->add_flag("--squared-wcss", o.squared_wcss, "Use squared distances in WCSS");
    reproduce_cmd->add_flag("--save-checkpoints", o.save_checkpoints, "Keep every trained model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(Error::Kind::config);
    }

    try {
        for (auto* sub : app.get_subcommands()) {
            const auto name = sub->get_name();
            const auto config = resolve(*sub, o, name);
            if (name == "prepare") return cmd_prepare(config);
            if (name == "train") return cmd_train(config);
            if (name == "eval") return cmd_eval(config, o);
            if (name == "cv") return cmd_cv(config);
            if (name == "cluster") return cmd_cluster(config, o);
            if (name == "reproduce") return cmd_reproduce(config, o);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(Error::Kind::io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
