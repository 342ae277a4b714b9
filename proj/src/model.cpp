#include "nsnmf/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "json_util.hpp"
#include "nsnmf/errors.hpp"
#include "nsnmf/random.hpp"

namespace nsnmf {

void TrainConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (dims.size() < 2) throw ConfigError("dims needs at least two layer widths (k, l)");
    for (auto d : dims)
        if (d < 1) throw ConfigError("layer widths must be at least 1");
    if (!(adagrad_epsilon >= 0.0)) throw ConfigError("adagrad epsilon must be non-negative");
    if (early_stopping && !(early_stopping_fraction > 0.0 && early_stopping_fraction < 1.0))
        throw ConfigError("early stopping fraction must lie in (0, 1)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"eta", c.eta},
                       {"lambda", c.lambda},
                       {"dims", c.dims},
                       {"epochs", c.epochs},
                       {"seed", c.seed},
                       {"activation", std::string(activation_name(c.activation))},
                       {"use_bias", c.use_bias},
                       {"adagrad", c.adagrad},
                       {"adagrad_epsilon", c.adagrad_epsilon},
                       {"clamp_predictions", c.clamp_predictions},
                       {"early_stopping", c.early_stopping},
                       {"early_stopping_fraction", c.early_stopping_fraction},
                       {"patience", c.patience},
                       {"min_delta", c.min_delta}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    c.eta = j.value("eta", d.eta);
    c.lambda = j.value("lambda", d.lambda);
    c.dims = j.value("dims", d.dims);
    c.epochs = j.value("epochs", d.epochs);
    c.seed = j.value("seed", d.seed);
    c.activation = parse_activation(j.value("activation", std::string(activation_name(d.activation))));
    c.use_bias = j.value("use_bias", d.use_bias);
    c.adagrad = j.value("adagrad", d.adagrad);
    c.adagrad_epsilon = j.value("adagrad_epsilon", d.adagrad_epsilon);
    c.clamp_predictions = j.value("clamp_predictions", d.clamp_predictions);
    c.early_stopping = j.value("early_stopping", d.early_stopping);
    c.early_stopping_fraction = j.value("early_stopping_fraction", d.early_stopping_fraction);
    c.patience = j.value("patience", d.patience);
    c.min_delta = j.value("min_delta", d.min_delta);
}

void to_json(nlohmann::json& j, const TrainReport& r) {
    j = nlohmann::json{{"epoch_rmse", r.epoch_rmse},
                       {"validation_rmse", r.validation_rmse},
                       {"min_q", r.min_q},
                       {"epochs_run", r.epochs_run},
                       {"best_epoch", r.best_epoch},
                       {"rejected_s", r.rejected_s},
                       {"rejected_q", r.rejected_q},
                       {"wall_seconds", r.wall_seconds},
                       {"config", r.config},
                       {"seed", r.config.seed}};
}

namespace {

void fill_uniform(Eigen::MatrixXd& m, Rng& rng) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform_open_zero();
}

void check_indices(const NsnmfModel& model, Index u, Index i) {
    if (u >= model.n_users() || i >= model.n_items())
        throw IndexError("rating (" + std::to_string(u) + ", " + std::to_string(i) + ") outside a " +
                         std::to_string(model.n_users()) + " x " + std::to_string(model.n_items()) + " model");
}

double bias_part(const NsnmfModel& model, Index u, Index i) {
    return model.config.use_bias ? model.mu + model.b_user[u] + model.b_item[i] : 0.0;
}

// Reusable buffers so the training loop does not allocate per rating.
struct Workspace {
    PredictionContext ctx;
    std::vector<Eigen::VectorXd> delta;  // delta[t] = d r_hat / d pre[t]
    Eigen::VectorXd p_grad;
    Eigen::VectorXd q_grad;

    explicit Workspace(const NsnmfModel& model) {
        const auto& dims = model.config.dims;
        const std::size_t layers = model.S.size();
        ctx.pre.resize(layers);
        ctx.post.resize(layers + 1);
        delta.resize(layers);
        for (std::size_t t = 0; t < layers; ++t) {
            ctx.pre[t].resize(static_cast<Eigen::Index>(dims[t]));
            delta[t].resize(static_cast<Eigen::Index>(dims[t]));
        }
        for (std::size_t t = 0; t <= layers; ++t) ctx.post[t].resize(static_cast<Eigen::Index>(dims[t]));
    }
};

void forward_into(const NsnmfModel& model, Index u, Index i, PredictionContext& ctx) {
    const std::size_t layers = model.S.size();
    const Activation g = model.config.activation;
    ctx.post[layers] = model.Q.col(i);
    for (std::size_t t = layers; t-- > 0;) {
        ctx.pre[t].noalias() = model.S[t] * ctx.post[t + 1];
        for (Eigen::Index k = 0; k < ctx.pre[t].size(); ++k)
            ctx.post[t][k] = detail::apply_unchecked(g, ctx.pre[t][k]);
    }
    ctx.prediction = bias_part(model, u, i) + model.P.row(u).dot(ctx.post[0]);
}

// d r_hat / d pre[t] for every layer, then d r_hat / d Q[:,i] into ws.q_grad.
void backward_into(const NsnmfModel& model, Index u, Workspace& ws) {
    const Activation g = model.config.activation;
    Eigen::VectorXd upstream = model.P.row(u).transpose();
    for (std::size_t t = 0; t < model.S.size(); ++t) {
        for (Eigen::Index k = 0; k < upstream.size(); ++k)
            ws.delta[t][k] = upstream[k] * detail::derivative_unchecked(g, ws.ctx.pre[t][k]);
        upstream = model.S[t].transpose() * ws.delta[t];
    }
    ws.q_grad = std::move(upstream);
}

[[noreturn]] void diverged(const std::string& where) {
    throw DivergenceError(where, "non-finite gradient");
}

double adagrad_step(double grad, double& accumulator, const TrainConfig& config) {
    if (!config.adagrad) return config.eta * grad;
    accumulator += grad * grad;
    return config.eta * grad / (std::sqrt(accumulator) + config.adagrad_epsilon);
}

StepStats step_impl(NsnmfModel& model, AdaGradState& state, const RatingTriple& r, const TrainConfig& config,
                    Workspace& ws) {
    const Index u = r.user;
    const Index i = r.item;
    const double lambda = config.lambda;
    const Activation g = model.config.activation;
    const std::size_t layers = model.S.size();

    forward_into(model, u, i, ws.ctx);
    const double e = r.rating - ws.ctx.prediction;
    if (!std::isfinite(e)) diverged("residual");
    backward_into(model, u, ws);

    StepStats stats;
    stats.error = e;

    // Gradients at entry values. P and Q gradients are fully formed before anything moves;
    // S gradients only need delta and the cached layer inputs, which stay fixed below.
    ws.p_grad = -e * ws.ctx.post[0] + lambda * model.P.row(u).transpose();
    ws.q_grad = -e * ws.q_grad + lambda * model.Q.col(i);

    if (model.config.use_bias) {
        const double gu = -e + lambda * model.b_user[u];
        const double gi = -e + lambda * model.b_item[i];
        if (!std::isfinite(gu)) diverged("b_user[" + std::to_string(u) + "]");
        if (!std::isfinite(gi)) diverged("b_item[" + std::to_string(i) + "]");
        model.b_user[u] -= adagrad_step(gu, state.b_user[u], config);
        model.b_item[i] -= adagrad_step(gi, state.b_item[i], config);
    }

    for (Eigen::Index k = 0; k < ws.p_grad.size(); ++k) {
        const double grad = ws.p_grad[k];
        if (!std::isfinite(grad)) diverged("P(" + std::to_string(u) + "," + std::to_string(k) + ")");
        model.P(u, k) -= adagrad_step(grad, state.P(u, k), config);
    }

    for (std::size_t t = 0; t < layers; ++t) {
        auto& S = model.S[t];
        auto& G = state.S[t];
        const auto& input = ws.ctx.post[t + 1];
        Eigen::VectorXd& pre = ws.ctx.pre[t];  // tracks accepted changes row by row
        for (Eigen::Index row = 0; row < S.rows(); ++row) {
            for (Eigen::Index col = 0; col < S.cols(); ++col) {
                const double grad = -e * ws.delta[t][row] * input[col] + lambda * S(row, col);
                if (!std::isfinite(grad))
                    diverged("S" + std::to_string(t + 2) + "(" + std::to_string(row) + "," + std::to_string(col) + ")");
                const double candidate = S(row, col) - adagrad_step(grad, G(row, col), config);
                const double moved = pre[row] + (candidate - S(row, col)) * input[col];
                if (detail::apply_unchecked(g, moved) > 0.0) {
                    S(row, col) = candidate;
                    pre[row] = moved;
                } else {
                    ++stats.rejected_s;
                }
            }
        }
    }

    for (Eigen::Index h = 0; h < ws.q_grad.size(); ++h) {
        const double grad = ws.q_grad[h];
        if (!std::isfinite(grad)) diverged("Q(" + std::to_string(h) + "," + std::to_string(i) + ")");
        const double candidate = model.Q(h, i) - adagrad_step(grad, state.Q(h, i), config);
        if (candidate > 0.0)
            model.Q(h, i) = candidate;
        else
            ++stats.rejected_q;
    }
    return stats;
}

double training_rmse(const NsnmfModel& model, const RatingDataset& data, Workspace& ws) {
    double sum = 0.0;
    for (const auto& t : data.triples) {
        forward_into(model, t.user, t.item, ws.ctx);
        const double e = t.rating - ws.ctx.prediction;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(data.size()));
}

double validation_rmse(const NsnmfModel& model, const RatingDataset& data) {
    double sum = 0.0;
    for (const auto& t : data.triples) {
        const double e = t.rating - predict(model, t.user, t.item);
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(data.size()));
}

}  // namespace

std::pair<NsnmfModel, AdaGradState> init(const TrainConfig& config, std::size_t n_users, std::size_t n_items,
                                         const RatingDataset& train) {
    config.validate();
    if (train.empty()) throw EmptyDatasetError("cannot initialize from an empty training set");
    for (const auto& t : train.triples)
        if (t.user >= n_users || t.item >= n_items)
            throw ConfigError("training triple outside a " + std::to_string(n_users) + " x " +
                              std::to_string(n_items) + " model");

    const auto& dims = config.dims;
    const auto n = static_cast<Eigen::Index>(n_users);
    const auto m = static_cast<Eigen::Index>(n_items);

    NsnmfModel model;
    model.config = config;
    model.mu = train.mean_rating();
    model.b_user = Eigen::VectorXd::Zero(n);
    model.b_item = Eigen::VectorXd::Zero(m);
    model.P.resize(n, static_cast<Eigen::Index>(dims[0]));
    for (std::size_t t = 0; t + 1 < dims.size(); ++t)
        model.S.emplace_back(static_cast<Eigen::Index>(dims[t]), static_cast<Eigen::Index>(dims[t + 1]));
    model.Q.resize(static_cast<Eigen::Index>(dims.back()), m);
    model.scale_min = train.scale_min;
    model.scale_max = train.scale_max;

    Rng rng(config.seed);
    fill_uniform(model.P, rng);
    for (auto& s : model.S) fill_uniform(s, rng);
    fill_uniform(model.Q, rng);

    model.user_seen.assign(n_users, 0);
    model.item_seen.assign(n_items, 0);
    for (const auto& t : train.triples) {
        model.user_seen[t.user] = 1;
        model.item_seen[t.item] = 1;
    }

    AdaGradState state;
    state.b_user = Eigen::VectorXd::Zero(n);
    state.b_item = Eigen::VectorXd::Zero(m);
    state.P = Eigen::MatrixXd::Zero(model.P.rows(), model.P.cols());
    for (const auto& s : model.S) state.S.push_back(Eigen::MatrixXd::Zero(s.rows(), s.cols()));
    state.Q = Eigen::MatrixXd::Zero(model.Q.rows(), model.Q.cols());
    return {std::move(model), std::move(state)};
}

PredictionContext forward(const NsnmfModel& model, Index u, Index i) {
    check_indices(model, u, i);
    Workspace ws(model);
    forward_into(model, u, i, ws.ctx);
    return std::move(ws.ctx);
}

double predict_raw(const NsnmfModel& model, Index u, Index i) { return forward(model, u, i).prediction; }

double predict(const NsnmfModel& model, Index u, Index i) {
    check_indices(model, u, i);
    const bool user_known = model.user_seen.empty() || model.user_seen[u];
    const bool item_known = model.item_seen.empty() || model.item_seen[i];
    const bool bias = model.config.use_bias;
    double value = 0.0;
    if (user_known && item_known) {
        Workspace ws(model);
        forward_into(model, u, i, ws.ctx);
        value = ws.ctx.prediction;
    } else if (item_known) {
        value = model.mu + (bias ? model.b_item[i] : 0.0);
    } else if (user_known) {
        value = model.mu + (bias ? model.b_user[u] : 0.0);
    } else {
        value = model.mu;
    }
    if (model.config.clamp_predictions) value = std::clamp(value, model.scale_min, model.scale_max);
    return value;
}

SampleGradient sample_gradient(const NsnmfModel& model, const RatingTriple& r, double lambda) {
    check_indices(model, r.user, r.item);
    Workspace ws(model);
    forward_into(model, r.user, r.item, ws.ctx);
    const double e = r.rating - ws.ctx.prediction;
    backward_into(model, r.user, ws);

    SampleGradient grad;
    grad.error = e;
    if (model.config.use_bias) {
        grad.b_user = -e + lambda * model.b_user[r.user];
        grad.b_item = -e + lambda * model.b_item[r.item];
    }
    grad.p = -e * ws.ctx.post[0] + lambda * model.P.row(r.user).transpose();
    for (std::size_t t = 0; t < model.S.size(); ++t)
        grad.S.push_back(-e * ws.delta[t] * ws.ctx.post[t + 1].transpose() + lambda * model.S[t]);
    grad.q = -e * ws.q_grad + lambda * model.Q.col(r.item);
    return grad;
}

StepStats sgd_step(NsnmfModel& model, AdaGradState& state, const RatingTriple& r, const TrainConfig& config) {
    check_indices(model, r.user, r.item);
    Workspace ws(model);
    return step_impl(model, state, r, config, ws);
}

TrainResult train(const RatingDataset& train, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train.empty()) throw EmptyDatasetError("empty training set");
    const auto started = std::chrono::steady_clock::now();

    RatingDataset fit = train;
    RatingDataset holdout;
    if (config.early_stopping) {
        auto plan = split(train, 1.0 - config.early_stopping_fraction, config.seed ^ 0x9e3779b97f4a7c15ULL);
        fit = std::move(plan.train);
        holdout = std::move(plan.test);
    }

    auto [model, state] = init(config, train.n_users, train.n_items, fit);
    Workspace ws(model);
    Rng rng(config.seed + 1);
    std::vector<std::size_t> order(fit.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainReport report;
    report.config = config;
    NsnmfModel best;
    double best_validation = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t k = 0; k < order.size(); ++k) {
            try {
                const auto stats = step_impl(model, state, fit.triples[order[k]], config, ws);
                report.rejected_s += stats.rejected_s;
                report.rejected_q += stats.rejected_q;
            } catch (const DivergenceError& err) {
                throw DivergenceError(err.where(), "diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                                                       std::to_string(k + 1));
            }
        }
        report.epoch_rmse.push_back(training_rmse(model, fit, ws));
        report.min_q.push_back(model.Q.size() > 0 ? model.Q.minCoeff() : 0.0);
        report.epochs_run = epoch + 1;
        if (on_epoch) on_epoch(epoch + 1, model);

        if (config.early_stopping) {
            const double v = validation_rmse(model, holdout);
            report.validation_rmse.push_back(v);
            if (v < best_validation - config.min_delta) {
                best_validation = v;
                best = model;
                report.best_epoch = epoch + 1;
                stale = 0;
            } else if (++stale >= config.patience) {
                break;
            }
        }
    }
    if (config.early_stopping && report.best_epoch > 0) model = std::move(best);
    if (!config.early_stopping) report.best_epoch = report.epochs_run;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(model), std::move(report)};
}

double regularized_objective(const NsnmfModel& model, const RatingDataset& data, double lambda) {
    double loss = 0.0;
    for (const auto& t : data.triples) {
        const double e = t.rating - predict_raw(model, t.user, t.item);
        loss += e * e;
    }
    double penalty = model.P.squaredNorm() + model.Q.squaredNorm();
    if (model.config.use_bias) penalty += model.b_user.squaredNorm() + model.b_item.squaredNorm();
    for (const auto& s : model.S) penalty += s.squaredNorm();
    return loss + lambda * penalty;
}

ItemRepresentation item_representation(const NsnmfModel& model) {
    ItemRepresentation rep;
    rep.deep = model.Q;
    Eigen::MatrixXd z = model.Q;
    for (std::size_t t = model.S.size(); t-- > 0;) {
        Eigen::MatrixXd a = model.S[t] * z;
        z = a.unaryExpr([g = model.config.activation](double x) { return detail::apply_unchecked(g, x); });
    }
    rep.activated = std::move(z);
    return rep;
}

nlohmann::json to_checkpoint(const NsnmfModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& s : model.S) layers.push_back(detail::matrix_to_json(s));
    return {{"format", "nsnmf-checkpoint"},
            {"version", 1},
            {"kind", "nsnmf"},
            {"config", model.config},
            {"mu", model.mu},
            {"scale", {model.scale_min, model.scale_max}},
            {"b_user", detail::vector_to_json(model.b_user)},
            {"b_item", detail::vector_to_json(model.b_item)},
            {"P", detail::matrix_to_json(model.P)},
            {"S", std::move(layers)},
            {"Q", detail::matrix_to_json(model.Q)},
            {"user_seen", model.user_seen},
            {"item_seen", model.item_seen}};
}

NsnmfModel nsnmf_from_checkpoint(const nlohmann::json& j) {
    detail::check_header(j, "nsnmf");
    NsnmfModel model;
    try {
        model.config = j.at("config").get<TrainConfig>();
        model.mu = j.at("mu").get<double>();
        model.scale_min = j.at("scale").at(0).get<double>();
        model.scale_max = j.at("scale").at(1).get<double>();
        model.b_user = detail::vector_from_json(j.at("b_user"));
        model.b_item = detail::vector_from_json(j.at("b_item"));
        model.P = detail::matrix_from_json(j.at("P"));
        for (const auto& s : j.at("S")) model.S.push_back(detail::matrix_from_json(s));
        model.Q = detail::matrix_from_json(j.at("Q"));
        model.user_seen = j.at("user_seen").get<std::vector<std::uint8_t>>();
        model.item_seen = j.at("item_seen").get<std::vector<std::uint8_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed nsnmf checkpoint: ") + e.what());
    }
    const auto& dims = model.config.dims;
    bool ok = dims.size() == model.S.size() + 1 && static_cast<std::size_t>(model.P.cols()) == dims[0] &&
              static_cast<std::size_t>(model.Q.rows()) == dims.back() && model.b_user.size() == model.P.rows() &&
              model.b_item.size() == model.Q.cols();
    for (std::size_t t = 0; ok && t < model.S.size(); ++t)
        ok = static_cast<std::size_t>(model.S[t].rows()) == dims[t] &&
             static_cast<std::size_t>(model.S[t].cols()) == dims[t + 1];
    if (!ok) throw DataError("checkpoint dimensions do not chain");
    return model;
}

}  // namespace nsnmf
