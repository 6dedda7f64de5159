#pragma once

// Shared oracles for the test suites. Everything here is independent of the
// library code paths it checks: finite differences for gradients, brute-force
// graph aggregation, numeric integration for distribution tails.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "codegaze/tensor.hpp"

namespace testutil {

// Central finite differences of a scalar-valued function with respect to one
// parameter tensor. `forward` must rebuild the computation from scratch.
inline std::vector<double> finite_diff(const std::function<double()>& forward,
                                       codegaze::nd::Tensor param, double eps = 1e-5) {
    std::vector<double> grad(param.value().size(), 0.0);
    for (size_t i = 0; i < grad.size(); ++i) {
        double keep = param.value()[i];
        param.value()[i] = keep + eps;
        double up = forward();
        param.value()[i] = keep - eps;
        double down = forward();
        param.value()[i] = keep;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

// Max relative error between analytic and numeric gradients, with an absolute
// floor so near-zero entries do not explode the ratio.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric,
                          double floor = 1e-6) {
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), floor});
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

// Random tree on n nodes: node 0 is the root, each later node picks an
// earlier parent. Returns the edge list.
inline std::vector<std::pair<int, int>> random_tree(int n, std::mt19937_64& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int c = 1; c < n; ++c) edges.emplace_back(static_cast<int>(rng() % c), c);
    return edges;
}

// Brute-force one round of degree-normalized message passing + linear + tanh,
// with zero-degree rows forced to zero. Independent of the tensor library.
inline std::vector<double> naive_gnn_hop(const std::vector<double>& states, int m, int d,
                                         const std::vector<double>& adj,
                                         const std::vector<double>& W,
                                         const std::vector<double>& b) {
    std::vector<double> out(static_cast<size_t>(m) * d, 0.0);
    for (int i = 0; i < m; ++i) {
        double deg = 0.0;
        for (int j = 0; j < m; ++j) deg += adj[static_cast<size_t>(i) * m + j];
        if (deg == 0.0) continue;
        std::vector<double> agg(d, 0.0);
        for (int j = 0; j < m; ++j) {
            double w = adj[static_cast<size_t>(i) * m + j] / deg;
            if (w == 0.0) continue;
            for (int k = 0; k < d; ++k) agg[k] += w * states[static_cast<size_t>(j) * d + k];
        }
        for (int k = 0; k < d; ++k) {
            double acc = 0.0;
            for (int l = 0; l < d; ++l) acc += agg[l] * W[static_cast<size_t>(l) * d + k];
            out[static_cast<size_t>(i) * d + k] = std::tanh(acc + b[k]);
        }
    }
    return out;
}

// Adaptive Simpson integration for the t-distribution oracle.
inline double simpson(const std::function<double(double)>& f, double a, double b, int steps) {
    double h = (b - a) / steps;
    double acc = f(a) + f(b);
    for (int i = 1; i < steps; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Two-sided p-value for Student's t by numeric integration of the density
// over the finite body [0, |t|]; avoids truncating the heavy tails.
inline double t_two_sided_p_numeric(double t, double df) {
    double lg = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                0.5 * std::log(df * M_PI);
    auto pdf = [&](double x) {
        return std::exp(lg - (df + 1.0) / 2.0 * std::log1p(x * x / df));
    };
    double body = simpson(pdf, 0.0, std::fabs(t), 100000);
    return 1.0 - 2.0 * body;
}

}  // namespace testutil
