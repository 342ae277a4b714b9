#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nsnmf/model.hpp"

namespace oracle {

using nsnmf::Activation;
using nsnmf::Index;
using nsnmf::NsnmfModel;

// Independent scalar re-implementation of the per-sample loss, used as the finite-difference
// target. Written with plain loops and std:: math only.
struct Params {
    double mu = 0.0, bu = 0.0, bi = 0.0;
    std::vector<double> p;                       // k
    std::vector<std::vector<std::vector<double>>> S;  // S[t][row][col]
    std::vector<double> q;                       // last width
};

inline double g_of(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0 ? x : 0.0;
        case Activation::softplus: return x > 30 ? x + std::log1p(std::exp(-x)) : std::log(1.0 + std::exp(x));
        default: return x;
    }
}

inline double reference_prediction(const Params& w, Activation a, bool bias) {
    std::vector<double> h = w.q;
    for (std::size_t t = w.S.size(); t-- > 0;) {
        std::vector<double> next(w.S[t].size(), 0.0);
        for (std::size_t r = 0; r < w.S[t].size(); ++r) {
            double z = 0.0;
            for (std::size_t c = 0; c < h.size(); ++c) z += w.S[t][r][c] * h[c];
            next[r] = g_of(a, z);
        }
        h = next;
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) dot += w.p[k] * h[k];
    return bias ? w.mu + w.bu + w.bi + dot : dot;
}

inline double reference_loss(const Params& w, Activation a, bool bias, double r, double lambda) {
    const double e = r - reference_prediction(w, a, bias);
    double reg = 0.0;
    if (bias) reg += w.bu * w.bu + w.bi * w.bi;
    for (double v : w.p) reg += v * v;
    for (double v : w.q) reg += v * v;
    for (const auto& s : w.S)
        for (const auto& row : s)
            for (double v : row) reg += v * v;
    return 0.5 * e * e + 0.5 * lambda * reg;
}

inline Params extract(const NsnmfModel& m, Index u, Index i) {
    Params w;
    w.mu = m.mu;
    w.bu = m.b_user[u];
    w.bi = m.b_item[i];
    for (Eigen::Index k = 0; k < m.P.cols(); ++k) w.p.push_back(m.P(u, k));
    for (const auto& s : m.S) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            std::vector<double> row;
            for (Eigen::Index c = 0; c < s.cols(); ++c) row.push_back(s(r, c));
            rows.push_back(row);
        }
        w.S.push_back(rows);
    }
    for (Eigen::Index h = 0; h < m.Q.rows(); ++h) w.q.push_back(m.Q(h, i));
    return w;
}

inline bool close_rel(double analytic, double numeric, double tol) {
    return std::abs(analytic - numeric) <= tol * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

}  // namespace oracle
