#pragma once

// Shared test fixtures: degenerate and analytically solvable networks.

#include <cmath>
#include <vector>

#include "hpgan/models.hpp"

namespace hpgan::testing {

inline MlpParams<Tensor> make_zero_mlp(std::size_t input_dim, std::size_t h1, std::size_t h2) {
    MlpParams<Tensor> p;
    p.input_dim = input_dim;
    p.h1 = h1;
    p.h2 = h2;
    p.w1 = Tensor::zeros({h1, input_dim});
    p.b1 = Tensor::zeros({h1});
    p.w2 = Tensor::zeros({h2, h1});
    p.b2 = Tensor::zeros({h2});
    p.w3 = Tensor::zeros({1, h2});
    p.b3 = Tensor::zeros({1});
    return p;
}

// An MLP whose leaky-relu layers cancel analytically so the whole network
// computes w·v + bias: lrelu(v) - lrelu(-v) = 1.2 v for slope 0.2.
inline MlpParams<Tensor> make_linear_mlp(const std::vector<double>& w, double bias) {
    const std::size_t n = w.size();
    MlpParams<Tensor> p = make_zero_mlp(n, 2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        p.w1(i, i) = 1.0;
        p.w1(n + i, i) = -1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        p.w2(i, i) = 1.0 / 1.2;
        p.w2(i, n + i) = -1.0 / 1.2;
        p.w2(n + i, i) = -1.0 / 1.2;
        p.w2(n + i, n + i) = 1.0 / 1.2;
    }
    for (std::size_t i = 0; i < n; ++i) {
        p.w3(0, i) = w[i] / 1.2;
        p.w3(0, n + i) = -w[i] / 1.2;
    }
    p.b3[0] = bias;
    return p;
}

inline GeneratorParams<Tensor> make_zero_generator(std::size_t pose_dim, std::size_t hidden, std::size_t z_dim,
                                                   std::size_t layers) {
    Rng rng(0);
    GeneratorParams<Tensor> g = init_generator(pose_dim, hidden, z_dim, layers, rng);
    g.visit("g", [](const std::string&, Tensor& t) {
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.0;
    });
    return g;
}

inline std::vector<std::vector<double>> random_poses(std::size_t count, std::size_t dim, Rng& rng, double lo = -1.0,
                                                     double hi = 1.0) {
    std::vector<std::vector<double>> out(count, std::vector<double>(dim));
    for (auto& pose : out)
        for (double& v : pose) v = rng.uniform(lo, hi);
    return out;
}

// Reference GRU step written independently of the autodiff stack.
// Gates first (the candidate needs the whole reset vector), then the cell.
inline std::vector<double> hand_gru_step(const GruCellParams<Tensor>& p, const std::vector<double>& x,
                                         const std::vector<double>& h) {
    const std::size_t H = p.hidden_dim, I = p.input_dim;
    auto sig = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
    std::vector<double> out(H);
    std::vector<double> u(H), r(H);
    for (std::size_t i = 0; i < H; ++i) {
        double su = p.b_u[i], sr = p.b_r[i];
        for (std::size_t j = 0; j < I; ++j) {
            su += p.w_u[i * I + j] * x[j];
            sr += p.w_r[i * I + j] * x[j];
        }
        for (std::size_t j = 0; j < H; ++j) {
            su += p.u_u[i * H + j] * h[j];
            sr += p.u_r[i * H + j] * h[j];
        }
        u[i] = sig(su);
        r[i] = sig(sr);
    }
    for (std::size_t i = 0; i < H; ++i) {
        double sc = p.b_h[i];
        for (std::size_t j = 0; j < I; ++j) sc += p.w_h[i * I + j] * x[j];
        for (std::size_t j = 0; j < H; ++j) sc += p.u_h[i * H + j] * (r[j] * h[j]);
        out[i] = (1.0 - u[i]) * h[i] + u[i] * std::tanh(sc);
    }
    return out;
}

}  // namespace hpgan::testing
