#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "reference_model.hpp"
#include "nsnmf/errors.hpp"
#include "nsnmf/model.hpp"

using namespace nsnmf;
using namespace oracle;

namespace {

/// One-user, one-item model with every factor equal to 1 and no offsets.
NsnmfModel unit_model(const TrainConfig& config) {
    auto ds = testutil::make_dataset({{0, 0, 2.0}}, -10.0, 10.0);
    auto [model, state] = init(config, 1, 1, ds);
    model.mu = 0.0;
    model.P.setOnes();
    for (auto& s : model.S) s.setOnes();
    model.Q.setOnes();
    return model;
}

NsnmfModel random_model(std::size_t n, std::size_t m, std::vector<std::size_t> dims, Activation a, std::uint64_t seed,
                        bool bias = true) {
    TrainConfig c;
    c.dims = std::move(dims);
    c.activation = a;
    c.use_bias = bias;
    c.clamp_predictions = false;
    auto ds = testutil::random_dataset(n, m, 1.0, seed);
    auto [model, state] = init(c, n, m, ds);
    Rng rng(seed * 7 + 1);
    model.mu = rng.uniform(1.0, 5.0);
    for (Eigen::Index u = 0; u < model.b_user.size(); ++u) model.b_user[u] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < model.b_item.size(); ++i) model.b_item[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index k = 0; k < model.P.size(); ++k) model.P.data()[k] = rng.uniform(-1.0, 1.0);
    for (auto& s : model.S)
        for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index k = 0; k < model.Q.size(); ++k) model.Q.data()[k] = rng.uniform_open_zero();
    return model;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("bias-only prediction") {
    TrainConfig c;
    c.dims = {2, 2};
    c.clamp_predictions = false;
    auto ds = testutil::make_dataset({{0, 0, 3.0}});
    auto [model, state] = init(c, 1, 1, ds);
    model.P.setZero();
    model.mu = 3.5;
    model.b_user[0] = 0.3;
    model.b_item[0] = -0.1;
    CHECK(predict(model, 0, 0) == doctest::Approx(3.7).epsilon(1e-15));
}

TEST_CASE("hand arithmetic: 2 * relu(0.5 * 3) = 3") {
    TrainConfig c;
    c.dims = {1, 1};
    c.clamp_predictions = false;
    auto ds = testutil::make_dataset({{0, 0, 3.0}});
    auto [model, state] = init(c, 1, 1, ds);
    model.mu = 0.0;
    model.P(0, 0) = 2.0;
    model.S[0](0, 0) = 0.5;
    model.Q(0, 0) = 3.0;
    CHECK(predict(model, 0, 0) == 3.0);
}

TEST_CASE("prediction matches the dense reconstruction B + P g(S Q)") {
    auto model = random_model(4, 5, {3, 2}, Activation::softplus, 11);
    const Eigen::MatrixXd SQ = model.S[0] * model.Q;
    const Eigen::MatrixXd G = SQ.unaryExpr([](double x) { return std::log1p(std::exp(x)); });
    const Eigen::MatrixXd PG = model.P * G;
    for (Index u = 0; u < 4; ++u)
        for (Index i = 0; i < 5; ++i) {
            const double dense = model.mu + model.b_user[u] + model.b_item[i] + PG(u, i);
            CHECK(std::abs(predict_raw(model, u, i) - dense) < 1e-10);
        }
}

TEST_CASE("cold start fallbacks") {
    TrainConfig c;
    c.dims = {2, 2};
    c.clamp_predictions = false;
    auto ds = testutil::make_dataset({{0, 0, 4.0}, {1, 1, 2.0}});
    auto [model, state] = init(c, 3, 3, ds);
    model.b_user[0] = 0.25;
    model.b_item[1] = -0.5;
    CHECK(predict(model, 2, 1) == model.mu - 0.5);
    CHECK(predict(model, 0, 2) == model.mu + 0.25);
    CHECK(predict(model, 2, 2) == model.mu);
    CHECK_THROWS_AS(predict(model, 3, 0), IndexError);
}

TEST_CASE("clamping to the rating scale") {
    TrainConfig c;
    c.dims = {2, 2};
    auto ds = testutil::make_dataset({{0, 0, 4.0}});
    auto [model, state] = init(c, 1, 1, ds);
    model.P.setConstant(10.0);
    CHECK(predict(model, 0, 0) == 5.0);
    model.P.setConstant(-10.0);
    CHECK(predict(model, 0, 0) == 1.0);
}

TEST_CASE("init: determinism, mean rating, moment of the uniform draw") {
    TrainConfig c;
    auto ds = testutil::make_dataset({{0, 0, 4.0}, {1, 1, 4.0}, {2, 0, 4.0}});
    auto a = init(c, 1250, 2, ds);
    auto b = init(c, 1250, 2, ds);
    CHECK(a.first.P == b.first.P);
    CHECK(a.first.S[0] == b.first.S[0]);
    CHECK(a.first.Q == b.first.Q);
    CHECK(a.first.mu == 4.0);
    CHECK(a.first.P.size() >= 10000);
    CHECK(std::abs(a.first.P.mean() - 0.5) < 0.02);
    CHECK(a.first.P.minCoeff() > 0.0);
    CHECK(a.first.P.maxCoeff() <= 1.0);
    CHECK(a.first.b_user.isZero());
    CHECK(a.second.P.isZero());
}

TEST_CASE("init draws P, then S, then Q row-major from the seeded generator") {
    TrainConfig c;
    c.dims = {2, 3};
    auto ds = testutil::make_dataset({{0, 0, 4.0}, {1, 1, 2.0}});
    auto [model, state] = init(c, 2, 2, ds);
    Rng rng(c.seed);
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 2; ++k) CHECK(model.P(r, k) == rng.uniform_open_zero());
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 3; ++k) CHECK(model.S[0](r, k) == rng.uniform_open_zero());
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 2; ++k) CHECK(model.Q(r, k) == rng.uniform_open_zero());
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.eta = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.dims = {8};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.dims = {8, 0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    auto ds = testutil::make_dataset({{0, 0, 4.0}});
    c = {};
    c.epochs = 0;
    CHECK_THROWS_AS(train(ds, c), ConfigError);
}

TEST_CASE("single step, accept branch, hand computed") {
    // r = 2, every factor 1, offsets 0: prediction 1, e = 1.
    // b: 0 + 0.1 * (1 - 0.1 * 0) = 0.1; p, s, q: 1 + 0.1 * (1 - 0.1 * 1) = 1.09.
    TrainConfig c;
    c.dims = {1, 1};
    c.eta = 0.1;
    c.lambda = 0.1;
    c.adagrad = false;
    c.clamp_predictions = false;
    auto model = unit_model(c);
    auto state = init(c, 1, 1, testutil::make_dataset({{0, 0, 2.0}})).second;
    const auto stats = sgd_step(model, state, {0, 0, 2.0}, c);
    CHECK(stats.error == 1.0);
    CHECK(stats.rejected_s == 0);
    CHECK(stats.rejected_q == 0);
    CHECK(model.b_user[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(model.b_item[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(model.P(0, 0) == doctest::Approx(1.09).epsilon(1e-15));
    CHECK(model.S[0](0, 0) == doctest::Approx(1.09).epsilon(1e-15));
    CHECK(model.Q(0, 0) == doctest::Approx(1.09).epsilon(1e-15));
}

TEST_CASE("single step, reject branches, hand computed") {
    // r = -5: prediction 1, e = -6, eta 0.5, lambda 0.
    // b: 0 + 0.5 * (-6) = -3; p: 1 + 0.5 * (-6 * relu(1)) = -2.
    // s candidate 1 + 0.5 * (-6 * 1 * 1 * 1) = -2 makes relu(-2) = 0 -> rejected, stays 1.
    // q candidate 1 + 0.5 * (-6 * 1 * 1 * 1) = -2 <= 0 -> rejected, stays 1.
    TrainConfig c;
    c.dims = {1, 1};
    c.eta = 0.5;
    c.lambda = 0.0;
    c.adagrad = false;
    c.clamp_predictions = false;
    auto model = unit_model(c);
    auto state = init(c, 1, 1, testutil::make_dataset({{0, 0, 2.0}})).second;
    const auto stats = sgd_step(model, state, {0, 0, -5.0}, c);
    CHECK(stats.error == -6.0);
    CHECK(stats.rejected_s == 1);
    CHECK(stats.rejected_q == 1);
    CHECK(model.b_user[0] == -3.0);
    CHECK(model.b_item[0] == -3.0);
    CHECK(model.P(0, 0) == -2.0);
    CHECK(model.S[0](0, 0) == 1.0);
    CHECK(model.Q(0, 0) == 1.0);
}

TEST_CASE("single step with AdaGrad: first step is eta * g / (|g| + eps)") {
    TrainConfig c;
    c.dims = {1, 1};
    c.eta = 0.1;
    c.lambda = 0.1;
    c.clamp_predictions = false;
    auto model = unit_model(c);
    auto state = init(c, 1, 1, testutil::make_dataset({{0, 0, 2.0}})).second;
    sgd_step(model, state, {0, 0, 2.0}, c);
    const double eps = c.adagrad_epsilon;
    const double step_b = 0.1 * -1.0 / (1.0 + eps);
    const double step_f = 0.1 * -0.9 / (0.9 + eps);
    CHECK(model.b_user[0] == doctest::Approx(-step_b).epsilon(1e-15));
    CHECK(model.P(0, 0) == doctest::Approx(1.0 - step_f).epsilon(1e-15));
    CHECK(model.S[0](0, 0) == doctest::Approx(1.0 - step_f).epsilon(1e-15));
    CHECK(model.Q(0, 0) == doctest::Approx(1.0 - step_f).epsilon(1e-15));
    CHECK(state.b_user[0] == 1.0);
    CHECK(state.P(0, 0) == doctest::Approx(0.81).epsilon(1e-15));
}

TEST_CASE("zero residual and zero lambda leave every parameter unchanged") {
    auto model = random_model(3, 4, {3, 2}, Activation::relu, 5);
    TrainConfig c = model.config;
    c.lambda = 0.0;
    auto state = init(c, 3, 4, testutil::random_dataset(3, 4, 1.0, 5)).second;
    const auto before = model;
    const double r = predict_raw(model, 1, 2);
    const auto stats = sgd_step(model, state, {1, 2, r}, c);
    CHECK(stats.error == 0.0);
    CHECK(model.P == before.P);
    CHECK(model.S[0] == before.S[0]);
    CHECK(model.Q == before.Q);
    CHECK(model.b_user == before.b_user);
    CHECK(model.b_item == before.b_item);
}

TEST_CASE("analytic gradients match central finite differences") {
    const double h = 1e-6;
    for (double lambda : {0.0, 0.1}) {
        for (std::vector<std::size_t> dims : {std::vector<std::size_t>{3, 2}, std::vector<std::size_t>{3, 2, 2}}) {
            for (std::uint64_t point = 0; point < 100; ++point) {
                auto model = random_model(3, 4, dims, Activation::softplus, 1000 + point);
                Rng pick(point);
                const RatingTriple r{static_cast<Index>(pick.below(3)), static_cast<Index>(pick.below(4)),
                                     static_cast<double>(1 + pick.below(5))};
                const auto grad = sample_gradient(model, r, lambda);
                auto w = extract(model, r.user, r.item);
                auto fd = [&](double& slot) {
                    const double keep = slot;
                    slot = keep + h;
                    const double up = reference_loss(w, Activation::softplus, true, r.rating, lambda);
                    slot = keep - h;
                    const double down = reference_loss(w, Activation::softplus, true, r.rating, lambda);
                    slot = keep;
                    return (up - down) / (2 * h);
                };
                CHECK(close_rel(grad.b_user, fd(w.bu), 1e-4));
                CHECK(close_rel(grad.b_item, fd(w.bi), 1e-4));
                for (std::size_t k = 0; k < w.p.size(); ++k) CHECK(close_rel(grad.p[k], fd(w.p[k]), 1e-4));
                for (std::size_t t = 0; t < w.S.size(); ++t)
                    for (std::size_t a = 0; a < w.S[t].size(); ++a)
                        for (std::size_t b = 0; b < w.S[t][a].size(); ++b)
                            CHECK(close_rel(grad.S[t](a, b), fd(w.S[t][a][b]), 1e-4));
                for (std::size_t k = 0; k < w.q.size(); ++k) CHECK(close_rel(grad.q[k], fd(w.q[k]), 1e-4));
            }
        }
    }
}

TEST_CASE("sgd_step applies exactly the sample gradient when nothing is rejected") {
    auto model = random_model(3, 4, {3, 2}, Activation::softplus, 77);
    TrainConfig c = model.config;
    c.adagrad = false;
    c.eta = 1e-3;
    c.lambda = 0.1;
    auto state = init(c, 3, 4, testutil::random_dataset(3, 4, 1.0, 77)).second;
    const RatingTriple r{2, 1, 4.0};
    const auto grad = sample_gradient(model, r, c.lambda);
    const auto before = model;
    const auto stats = sgd_step(model, state, r, c);
    REQUIRE(stats.rejected_q == 0);
    CHECK(stats.rejected_s == 0);  // softplus keeps every activation positive
    CHECK(model.b_user[2] == before.b_user[2] - c.eta * grad.b_user);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(model.P(2, k) == before.P(2, k) - c.eta * grad.p[k]);
    for (Eigen::Index a = 0; a < 3; ++a)
        for (Eigen::Index b = 0; b < 2; ++b)
            CHECK(model.S[0](a, b) == before.S[0](a, b) - c.eta * grad.S[0](a, b));
    for (Eigen::Index k = 0; k < 2; ++k) CHECK(model.Q(k, 1) == before.Q(k, 1) - c.eta * grad.q[k]);
}

TEST_CASE("Q updates: rejected candidates are non-positive, accepted ones stored exactly") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto model = random_model(3, 4, {3, 2}, Activation::relu, 300 + seed);
        TrainConfig c = model.config;
        c.eta = 0.5;
        c.lambda = 0.1;
        auto state = init(c, 3, 4, testutil::random_dataset(3, 4, 1.0, 300 + seed)).second;
        Rng rng(seed);
        for (Eigen::Index k = 0; k < state.Q.size(); ++k) state.Q.data()[k] = rng.uniform(0.0, 0.5);
        const RatingTriple r{static_cast<Index>(rng.below(3)), static_cast<Index>(rng.below(4)),
                             static_cast<double>(1 + rng.below(5))};
        const auto grad = sample_gradient(model, r, c.lambda);
        const auto before = model;
        const auto G = state.Q;
        sgd_step(model, state, r, c);
        for (Eigen::Index h = 0; h < 2; ++h) {
            const double acc = G(h, r.item) + grad.q[h] * grad.q[h];
            const double candidate = before.Q(h, r.item) - c.eta * grad.q[h] / (std::sqrt(acc) + c.adagrad_epsilon);
            if (candidate > 0.0)
                CHECK(model.Q(h, r.item) == candidate);
            else
                CHECK(model.Q(h, r.item) == before.Q(h, r.item));
            CHECK(state.Q(h, r.item) == acc);
        }
        CHECK(model.Q.minCoeff() > 0.0);
    }
}

TEST_CASE("S updates keep the fed activation positive for the current item") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto model = random_model(3, 4, {3, 3}, Activation::relu, 500 + seed);
        TrainConfig c = model.config;
        c.eta = 0.3;
        auto state = init(c, 3, 4, testutil::random_dataset(3, 4, 1.0, 500 + seed)).second;
        const RatingTriple r{static_cast<Index>(seed % 3), static_cast<Index>(seed % 4), 1.0 + seed % 5};
        const auto before = forward(model, r.user, r.item);
        const auto S0 = model.S[0];
        sgd_step(model, state, r, c);
        const Eigen::VectorXd pre = model.S[0] * before.post[1];
        for (Eigen::Index row = 0; row < 3; ++row) {
            if (S0.row(row) == model.S[0].row(row)) continue;
            CHECK(pre[row] > 0.0);
        }
    }
}

TEST_CASE("AdaGrad accumulators never decrease") {
    auto ds = testutil::random_dataset(6, 7, 0.6, 3);
    TrainConfig c;
    c.dims = {3, 2};
    auto [model, state] = init(c, ds.n_users, ds.n_items, ds);
    for (int pass = 0; pass < 5; ++pass) {
        for (const auto& t : ds.triples) {
            const auto prev = state;
            sgd_step(model, state, t, c);
            CHECK((state.P.array() >= prev.P.array()).all());
            CHECK((state.Q.array() >= prev.Q.array()).all());
            CHECK((state.S[0].array() >= prev.S[0].array()).all());
            CHECK((state.b_user.array() >= prev.b_user.array()).all());
            CHECK((state.b_item.array() >= prev.b_item.array()).all());
        }
    }
}

TEST_CASE("one epoch on a single triple reduces its squared error") {
    auto ds = testutil::make_dataset({{0, 0, 3.0}});
    TrainConfig c;
    c.dims = {2, 2};
    c.epochs = 1;
    c.lambda = 0.0;
    c.eta = 0.01;
    c.adagrad = false;
    c.clamp_predictions = false;
    const auto start = init(c, 1, 1, ds).first;
    const double before = std::pow(3.0 - predict_raw(start, 0, 0), 2);
    const auto result = train(ds, c);
    const double after = std::pow(3.0 - predict_raw(result.model, 0, 0), 2);
    CHECK(after < before);
}

TEST_CASE("training is deterministic and keeps Q non-negative after every epoch") {
    auto ds = testutil::random_dataset(20, 15, 0.4, 9);
    for (auto act : {Activation::relu, Activation::softplus}) {
        TrainConfig c;
        c.dims = {4, 3};
        c.epochs = 8;
        c.activation = act;
        std::size_t violations = 0;
        auto a = train(ds, c, [&](std::size_t, const NsnmfModel& m) { violations += m.Q.minCoeff() < 0.0; });
        auto b = train(ds, c);
        CHECK(violations == 0);
        CHECK(a.model.P == b.model.P);
        CHECK(a.model.Q == b.model.Q);
        CHECK(a.model.S[0] == b.model.S[0]);
        CHECK(a.report.epoch_rmse == b.report.epoch_rmse);
        CHECK(a.report.epoch_rmse.size() == 8);
        CHECK(a.report.epochs_run == 8);
        for (double q : a.report.min_q) CHECK(q >= 0.0);
    }
}

TEST_CASE("training RMSE decreases on a learnable problem") {
    auto ds = testutil::random_dataset(30, 20, 0.5, 21);
    TrainConfig c;
    c.dims = {4, 4};
    c.epochs = 30;
    c.eta = 0.05;
    c.lambda = 0.01;
    const auto result = train(ds, c);
    CHECK(result.report.epoch_rmse.back() < result.report.epoch_rmse.front());
}

TEST_CASE("early stopping restores the best validation epoch") {
    auto ds = testutil::random_dataset(40, 30, 0.5, 4);
    TrainConfig c;
    c.dims = {3, 3};
    c.epochs = 60;
    c.eta = 0.1;
    c.lambda = 0.0;
    c.early_stopping = true;
    const auto result = train(ds, c);
    REQUIRE(!result.report.validation_rmse.empty());
    CHECK(result.report.validation_rmse.size() == result.report.epochs_run);
    CHECK(result.report.epochs_run <= 60);
    const auto& v = result.report.validation_rmse;
    REQUIRE(result.report.best_epoch >= 1);
    CHECK(v[result.report.best_epoch - 1] <= *std::min_element(v.begin(), v.end()) + c.min_delta);
}

TEST_CASE("diagnostic sweep does not increase the objective") {
    auto ds = testutil::make_dataset({{0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 2, 5.0}, {2, 1, 1.0}});
    TrainConfig c;
    c.dims = {2, 2};
    c.activation = Activation::softplus;
    c.adagrad = false;
    c.eta = 1e-4;
    c.lambda = 0.0;
    auto [model, state] = init(c, ds.n_users, ds.n_items, ds);
    const double before = regularized_objective(model, ds, 0.0);
    for (const auto& t : ds.triples) sgd_step(model, state, t, c);
    CHECK(regularized_objective(model, ds, 0.0) <= before + 1e-12);
}

TEST_CASE("regularized objective") {
    SUBCASE("perfect model with only mu is zero") {
        auto ds = testutil::make_dataset({{0, 0, 3.0}, {1, 1, 3.0}});
        TrainConfig c;
        c.dims = {2, 2};
        auto [model, state] = init(c, 2, 2, ds);
        model.P.setZero();
        for (auto& s : model.S) s.setZero();
        model.Q.setZero();
        CHECK(regularized_objective(model, ds, 0.7) == 0.0);
    }
    SUBCASE("lambda 0 is the residual sum of squares; brute force otherwise") {
        auto model = random_model(3, 4, {3, 2}, Activation::relu, 8);
        auto ds = testutil::random_dataset(3, 4, 0.7, 8);
        double ssr = 0.0;
        for (const auto& t : ds.triples) {
            const double e = t.rating - reference_prediction(extract(model, t.user, t.item), Activation::relu, true);
            ssr += e * e;
        }
        CHECK(regularized_objective(model, ds, 0.0) == doctest::Approx(ssr).epsilon(1e-12));
        double reg = 0.0;
        for (Eigen::Index k = 0; k < model.b_user.size(); ++k) reg += model.b_user[k] * model.b_user[k];
        for (Eigen::Index k = 0; k < model.b_item.size(); ++k) reg += model.b_item[k] * model.b_item[k];
        for (Eigen::Index k = 0; k < model.P.size(); ++k) reg += model.P.data()[k] * model.P.data()[k];
        for (Eigen::Index k = 0; k < model.Q.size(); ++k) reg += model.Q.data()[k] * model.Q.data()[k];
        for (Eigen::Index k = 0; k < model.S[0].size(); ++k) reg += model.S[0].data()[k] * model.S[0].data()[k];
        CHECK(regularized_objective(model, ds, 0.3) == doctest::Approx(ssr + 0.3 * reg).epsilon(1e-12));
    }
}

TEST_CASE("item representation") {
    auto relu = random_model(3, 6, {4, 3}, Activation::relu, 2);
    const auto r = item_representation(relu);
    CHECK(r.activated.rows() == 4);
    CHECK(r.activated.cols() == 6);
    CHECK(r.deep.rows() == 3);
    CHECK(r.activated.minCoeff() >= 0.0);

    auto lin = random_model(3, 6, {4, 3}, Activation::identity, 2);
    const auto l = item_representation(lin);
    CHECK(l.activated == lin.S[0] * lin.Q);
    CHECK(l.deep == lin.Q);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    auto ds = testutil::random_dataset(8, 9, 0.5, 31);
    TrainConfig c;
    c.dims = {3, 2, 2};
    c.epochs = 3;
    c.activation = Activation::softplus;
    const auto model = train(ds, c).model;
    const auto json = to_checkpoint(model);
    const auto back = nsnmf_from_checkpoint(nlohmann::json::parse(json.dump()));
    for (Index u = 0; u < model.n_users(); ++u)
        for (Index i = 0; i < model.n_items(); ++i) CHECK(predict(back, u, i) == predict(model, u, i));
    CHECK(back.P == model.P);
    CHECK(back.Q == model.Q);
    CHECK(back.S.size() == 2);
    CHECK(back.config.activation == Activation::softplus);
    auto bad = json;
    bad["format"] = "other";
    CHECK_THROWS_AS(nsnmf_from_checkpoint(bad), DataError);
}

}  // TEST_SUITE
