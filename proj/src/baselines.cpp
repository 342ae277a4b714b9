#include "nsnmf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "json_util.hpp"
#include "nsnmf/errors.hpp"
#include "nsnmf/random.hpp"

namespace nsnmf {

namespace {

using Profile = std::vector<std::pair<Index, double>>;

double pearson(const Profile& a, const Profile& b, double shrinkage) {
    std::vector<std::pair<double, double>> co;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->first < ib->first)
            ++ia;
        else if (ib->first < ia->first)
            ++ib;
        else {
            co.emplace_back(ia->second, ib->second);
            ++ia;
            ++ib;
        }
    }
    if (co.size() < 2) return 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : co) {
        mx += x;
        my += y;
    }
    const auto n = static_cast<double>(co.size());
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (const auto& [x, y] : co) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    return r * n / (n + shrinkage);
}

Eigen::MatrixXd similarity_matrix(const std::vector<Profile>& profiles, double shrinkage) {
    const auto n = static_cast<Eigen::Index>(profiles.size());
    Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        if (!profiles[static_cast<std::size_t>(a)].empty()) sim(a, a) = 1.0;
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double s = pearson(profiles[static_cast<std::size_t>(a)], profiles[static_cast<std::size_t>(b)], shrinkage);
            sim(a, b) = s;
            sim(b, a) = s;
        }
    }
    return sim;
}

std::vector<double> means(const std::vector<Profile>& profiles, double fallback) {
    std::vector<double> out(profiles.size(), fallback);
    for (std::size_t e = 0; e < profiles.size(); ++e) {
        if (profiles[e].empty()) continue;
        double sum = 0.0;
        for (const auto& [_, r] : profiles[e]) sum += r;
        out[e] = sum / static_cast<double>(profiles[e].size());
    }
    return out;
}

// Neighbourhood estimate for `target` (an entity on the similarity side) from the raters of
// `other` (entities on the same side that rated the opposite member of the pair).
double neighborhood_estimate(const Eigen::MatrixXd& sim, const std::vector<double>& mean, Index target,
                             const Profile& raters, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> candidates;  // (similarity, position in raters)
    for (std::size_t pos = 0; pos < raters.size(); ++pos) {
        const Index other = raters[pos].first;
        if (other == target) continue;
        const double s = sim(target, other);
        if (s > 0.0) candidates.emplace_back(s, pos);
    }
    if (candidates.empty()) return mean[target];
    const auto cmp = [&raters](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return raters[a.second].first < raters[b.second].first;
    };
    if (candidates.size() > k) {
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), cmp);
        candidates.resize(k);
    } else {
        std::sort(candidates.begin(), candidates.end(), cmp);
    }
    double num = 0.0;
    double den = 0.0;
    for (const auto& [s, pos] : candidates) {
        const auto& [other, rating] = raters[pos];
        num += s * (rating - mean[other]);
        den += s;
    }
    return mean[target] + num / den;
}

void check_range(std::size_t n_users, std::size_t n_items, Index u, Index i) {
    if (u >= n_users || i >= n_items)
        throw IndexError("rating (" + std::to_string(u) + ", " + std::to_string(i) + ") outside a " +
                         std::to_string(n_users) + " x " + std::to_string(n_items) + " model");
}

}  // namespace

NeighborhoodModel fit_neighborhood(const RatingDataset& train, const NeighborhoodConfig& config) {
    if (train.empty()) throw EmptyDatasetError("empty training set");
    if (config.k < 1) throw ConfigError("neighbourhood size must be at least 1");
    if (!(config.shrinkage >= 0.0)) throw ConfigError("shrinkage must be non-negative");

    NeighborhoodModel model;
    model.config = config;
    model.n_users = train.n_users;
    model.n_items = train.n_items;
    model.scale_min = train.scale_min;
    model.scale_max = train.scale_max;
    model.by_user.resize(train.n_users);
    model.by_item.resize(train.n_items);
    for (const auto& t : train.triples) {
        model.by_user[t.user].emplace_back(t.item, t.rating);
        model.by_item[t.item].emplace_back(t.user, t.rating);
    }
    for (auto& p : model.by_user) std::sort(p.begin(), p.end());
    for (auto& p : model.by_item) std::sort(p.begin(), p.end());
    // Summed in profile order so a model rebuilt from a checkpoint gets the same bits.
    double total = 0.0;
    for (const auto& p : model.by_user)
        for (const auto& [_, r] : p) total += r;
    model.global_mean = total / static_cast<double>(train.size());
    model.user_mean = means(model.by_user, model.global_mean);
    model.item_mean = means(model.by_item, model.global_mean);
    model.similarity = similarity_matrix(
        config.mode == NeighborhoodMode::user_based ? model.by_user : model.by_item, config.shrinkage);
    return model;
}

double predict(const NeighborhoodModel& model, Index u, Index i) {
    check_range(model.n_users, model.n_items, u, i);
    const bool user_known = !model.by_user[u].empty();
    const bool item_known = !model.by_item[i].empty();
    double value = model.global_mean;
    if (model.config.mode == NeighborhoodMode::user_based) {
        if (user_known)
            value = neighborhood_estimate(model.similarity, model.user_mean, u, model.by_item[i], model.config.k);
        else if (item_known)
            value = model.item_mean[i];
    } else {
        if (item_known)
            value = neighborhood_estimate(model.similarity, model.item_mean, i, model.by_user[u], model.config.k);
        else if (user_known)
            value = model.user_mean[u];
    }
    if (model.config.clamp_predictions) value = std::clamp(value, model.scale_min, model.scale_max);
    return value;
}

MfVariant parse_mf_variant(std::string_view tag) {
    if (tag == "svd") return MfVariant::svd;
    if (tag == "nmf") return MfVariant::nmf;
    if (tag == "reg-nmf" || tag == "regularized-nmf") return MfVariant::regularized_nmf;
    throw ConfigError("unknown factorization variant '" + std::string(tag) + "'");
}

std::string_view mf_variant_name(MfVariant variant) {
    switch (variant) {
        case MfVariant::svd: return "svd";
        case MfVariant::nmf: return "nmf";
        case MfVariant::regularized_nmf: return "reg-nmf";
    }
    return "svd";
}

void MfConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
}

void to_json(nlohmann::json& j, const MfConfig& c) {
    j = nlohmann::json{{"variant", std::string(mf_variant_name(c.variant))},
                       {"k", c.k},
                       {"eta", c.eta},
                       {"lambda", c.lambda},
                       {"epochs", c.epochs},
                       {"seed", c.seed},
                       {"clamp_predictions", c.clamp_predictions}};
}

void from_json(const nlohmann::json& j, MfConfig& c) {
    MfConfig d;
    c.variant = parse_mf_variant(j.value("variant", std::string(mf_variant_name(d.variant))));
    c.k = j.value("k", d.k);
    c.eta = j.value("eta", d.eta);
    c.lambda = j.value("lambda", d.lambda);
    c.epochs = j.value("epochs", d.epochs);
    c.seed = j.value("seed", d.seed);
    c.clamp_predictions = j.value("clamp_predictions", d.clamp_predictions);
}

double predict_raw(const MfModel& model, Index u, Index i) {
    check_range(static_cast<std::size_t>(model.P.rows()), static_cast<std::size_t>(model.Q.cols()), u, i);
    double value = model.P.row(u).dot(model.Q.col(i));
    if (model.config.variant == MfVariant::svd) value += model.mu + model.b_user[u] + model.b_item[i];
    return value;
}

double predict(const MfModel& model, Index u, Index i) {
    check_range(static_cast<std::size_t>(model.P.rows()), static_cast<std::size_t>(model.Q.cols()), u, i);
    const bool user_known = model.user_seen.empty() || model.user_seen[u];
    const bool item_known = model.item_seen.empty() || model.item_seen[i];
    const bool bias = model.config.variant == MfVariant::svd;
    double value = model.mu;
    if (user_known && item_known)
        value = predict_raw(model, u, i);
    else if (item_known)
        value = model.mu + (bias ? model.b_item[i] : 0.0);
    else if (user_known)
        value = model.mu + (bias ? model.b_user[u] : 0.0);
    if (model.config.clamp_predictions) value = std::clamp(value, model.scale_min, model.scale_max);
    return value;
}

MfModel fit_mf(const RatingDataset& train, const MfConfig& config) {
    config.validate();
    if (train.empty()) throw EmptyDatasetError("empty training set");
    const bool nonneg = config.variant != MfVariant::svd;
    const double lambda = config.variant == MfVariant::nmf ? 0.0 : config.lambda;
    const auto n = static_cast<Eigen::Index>(train.n_users);
    const auto m = static_cast<Eigen::Index>(train.n_items);
    const auto k = static_cast<Eigen::Index>(config.k);

    MfModel model;
    model.config = config;
    model.mu = train.mean_rating();
    model.scale_min = train.scale_min;
    model.scale_max = train.scale_max;
    model.b_user = Eigen::VectorXd::Zero(n);
    model.b_item = Eigen::VectorXd::Zero(m);
    model.P.resize(n, k);
    model.Q.resize(k, m);

    // svd: small symmetric noise around zero. nmf: U(0, c] with k c^2 / 4 = mu so the initial
    // inner products sit at the mean rating.
    Rng rng(config.seed);
    const double c = nonneg ? 2.0 * std::sqrt(std::max(model.mu, 1e-12) / static_cast<double>(k)) : 0.1;
    auto draw = [&] { return nonneg ? c * rng.uniform_open_zero() : rng.uniform(-c, c); };
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index h = 0; h < k; ++h) model.P(r, h) = draw();
    for (Eigen::Index h = 0; h < k; ++h)
        for (Eigen::Index col = 0; col < m; ++col) model.Q(h, col) = draw();

    model.user_seen.assign(train.n_users, 0);
    model.item_seen.assign(train.n_items, 0);
    for (const auto& t : train.triples) {
        model.user_seen[t.user] = 1;
        model.item_seen[t.item] = 1;
    }

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(config.seed + 1);
    Eigen::VectorXd p_old(k);
    const double eta = config.eta;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffler.shuffle(std::span<std::size_t>(order));
        double sse = 0.0;
        for (const auto idx : order) {
            const auto& t = train.triples[idx];
            const double e = t.rating - predict_raw(model, t.user, t.item);
            if (!std::isfinite(e))
                throw DivergenceError("residual", "non-finite residual at epoch " + std::to_string(epoch + 1));
            sse += e * e;
            if (!nonneg) {
                model.b_user[t.user] += eta * (e - lambda * model.b_user[t.user]);
                model.b_item[t.item] += eta * (e - lambda * model.b_item[t.item]);
            }
            p_old = model.P.row(t.user).transpose();
            auto p = model.P.row(t.user);
            auto q = model.Q.col(t.item);
            p += eta * (e * q.transpose() - lambda * p);
            q += eta * (e * p_old - lambda * q);
            if (nonneg) {
                p = p.cwiseMax(0.0);
                q = q.cwiseMax(0.0);
            }
        }
        model.epoch_rmse.push_back(std::sqrt(sse / static_cast<double>(train.size())));
    }
    return model;
}

nlohmann::json to_checkpoint(const MfModel& model) {
    return {{"format", "nsnmf-checkpoint"},
            {"version", 1},
            {"kind", "mf"},
            {"variant", std::string(mf_variant_name(model.config.variant))},
            {"config", model.config},
            {"mu", model.mu},
            {"scale", {model.scale_min, model.scale_max}},
            {"b_user", detail::vector_to_json(model.b_user)},
            {"b_item", detail::vector_to_json(model.b_item)},
            {"P", detail::matrix_to_json(model.P)},
            {"Q", detail::matrix_to_json(model.Q)},
            {"user_seen", model.user_seen},
            {"item_seen", model.item_seen}};
}

MfModel mf_from_checkpoint(const nlohmann::json& j) {
    detail::check_header(j, "mf");
    MfModel model;
    try {
        model.config = j.at("config").get<MfConfig>();
        model.mu = j.at("mu").get<double>();
        model.scale_min = j.at("scale").at(0).get<double>();
        model.scale_max = j.at("scale").at(1).get<double>();
        model.b_user = detail::vector_from_json(j.at("b_user"));
        model.b_item = detail::vector_from_json(j.at("b_item"));
        model.P = detail::matrix_from_json(j.at("P"));
        model.Q = detail::matrix_from_json(j.at("Q"));
        model.user_seen = j.at("user_seen").get<std::vector<std::uint8_t>>();
        model.item_seen = j.at("item_seen").get<std::vector<std::uint8_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed mf checkpoint: ") + e.what());
    }
    if (model.P.cols() != model.Q.rows()) throw DataError("checkpoint factor shapes disagree");
    return model;
}

nlohmann::json to_checkpoint(const NeighborhoodModel& model) {
    nlohmann::json ratings = nlohmann::json::array();
    for (std::size_t u = 0; u < model.by_user.size(); ++u)
        for (const auto& [i, r] : model.by_user[u]) ratings.push_back({u, i, r});
    return {{"format", "nsnmf-checkpoint"},
            {"version", 1},
            {"kind", "neighborhood"},
            {"variant", model.config.mode == NeighborhoodMode::user_based ? "user-cf" : "item-cf"},
            {"k", model.config.k},
            {"shrinkage", model.config.shrinkage},
            {"clamp_predictions", model.config.clamp_predictions},
            {"n_users", model.n_users},
            {"n_items", model.n_items},
            {"scale", {model.scale_min, model.scale_max}},
            {"ratings", std::move(ratings)}};
}

NeighborhoodModel neighborhood_from_checkpoint(const nlohmann::json& j) {
    detail::check_header(j, "neighborhood");
    NeighborhoodConfig config;
    RatingDataset train;
    try {
        config.mode = j.at("variant").get<std::string>() == "user-cf" ? NeighborhoodMode::user_based
                                                                      : NeighborhoodMode::item_based;
        config.k = j.at("k");
        config.shrinkage = j.at("shrinkage");
        config.clamp_predictions = j.at("clamp_predictions");
        train.n_users = j.at("n_users");
        train.n_items = j.at("n_items");
        train.scale_min = j.at("scale").at(0);
        train.scale_max = j.at("scale").at(1);
        for (const auto& r : j.at("ratings"))
            train.triples.push_back({r.at(0).get<Index>(), r.at(1).get<Index>(), r.at(2).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed neighborhood checkpoint: ") + e.what());
    }
    return fit_neighborhood(train, config);
}

}  // namespace nsnmf
