#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "salign/error.hpp"

namespace salign {

// Driving regression target, both components rescaled to [0, 1] upstream.
struct DriveLabel {
    double yaw = 0.0;
    double translation = 0.0;
};

struct HeadTrainConfig {
    int epochs = 5;
    int batch_size = 8;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
    // Optional explicit initialization; defaults to seeded uniform weights
    // in [-r, r] with r = sqrt(6 / (fan_in + fan_out)) and zero bias.
    std::optional<std::vector<double>> init_weights;
    std::optional<std::vector<double>> init_bias;
};

struct HeadTrainResult {
    std::vector<double> weights;     // (in, out) row-major
    std::vector<double> bias;        // out
    std::vector<double> loss_trace;  // full-dataset loss after each epoch
};

// Mean squared error averaged over samples and output components.
inline double head_loss(const std::vector<double>& weights, const std::vector<double>& bias,
                        const std::vector<std::vector<double>>& features,
                        const std::vector<std::vector<double>>& targets) {
    size_t n = features.size();
    size_t out_dim = bias.size();
    double loss = 0.0;
    for (size_t s = 0; s < n; ++s) {
        for (size_t j = 0; j < out_dim; ++j) {
            double p = bias[j];
            for (size_t i = 0; i < features[s].size(); ++i)
                p += features[s][i] * weights[i * out_dim + j];
            double d = p - targets[s][j];
            loss += d * d;
        }
    }
    return loss / (static_cast<double>(n) * out_dim);
}

// Analytic gradient of head_loss over the given sample subset.
inline void head_gradient(const std::vector<double>& weights, const std::vector<double>& bias,
                          const std::vector<std::vector<double>>& features,
                          const std::vector<std::vector<double>>& targets,
                          const std::vector<size_t>& batch, std::vector<double>& grad_w,
                          std::vector<double>& grad_b) {
    size_t out_dim = bias.size();
    size_t in_dim = weights.size() / out_dim;
    grad_w.assign(weights.size(), 0.0);
    grad_b.assign(bias.size(), 0.0);
    double scale = 2.0 / (static_cast<double>(batch.size()) * out_dim);
    for (size_t s : batch) {
        const auto& x = features[s];
        for (size_t j = 0; j < out_dim; ++j) {
            double p = bias[j];
            for (size_t i = 0; i < in_dim; ++i) p += x[i] * weights[i * out_dim + j];
            double e = scale * (p - targets[s][j]);
            grad_b[j] += e;
            for (size_t i = 0; i < in_dim; ++i) grad_w[i * out_dim + j] += e * x[i];
        }
    }
}

// Minibatch gradient descent on the dense head; upstream features are frozen.
// Deterministic: init and per-epoch shuffle both derive from config.seed.
inline HeadTrainResult train_head_raw(const std::vector<std::vector<double>>& features,
                                      const std::vector<std::vector<double>>& targets,
                                      size_t out_dim, const HeadTrainConfig& cfg) {
    if (features.empty()) throw DataError("train_head: empty dataset");
    if (features.size() != targets.size())
        throw DataError("train_head: feature/target count mismatch");
    size_t in_dim = features[0].size();
    for (const auto& f : features)
        if (f.size() != in_dim) throw DataError("train_head: inconsistent feature dimension");
    for (const auto& t : targets)
        if (t.size() != out_dim) throw DataError("train_head: inconsistent target dimension");
    if (cfg.epochs < 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0)
        throw DataError("train_head: invalid hyperparameters");

    std::mt19937_64 rng(cfg.seed);
    HeadTrainResult res;
    if (cfg.init_weights) {
        if (cfg.init_weights->size() != in_dim * out_dim)
            throw DataError("train_head: init weight size mismatch");
        res.weights = *cfg.init_weights;
    } else {
        double r = std::sqrt(6.0 / (static_cast<double>(in_dim) + out_dim));
        std::uniform_real_distribution<double> u(-r, r);
        res.weights.resize(in_dim * out_dim);
        for (double& w : res.weights) w = u(rng);
    }
    if (cfg.init_bias) {
        if (cfg.init_bias->size() != out_dim) throw DataError("train_head: init bias size mismatch");
        res.bias = *cfg.init_bias;
    } else {
        res.bias.assign(out_dim, 0.0);
    }

    std::vector<size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> gw, gb;
    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<size_t> batch(order.begin() + start, order.begin() + end);
            head_gradient(res.weights, res.bias, features, targets, batch, gw, gb);
            for (size_t i = 0; i < res.weights.size(); ++i)
                res.weights[i] -= cfg.learning_rate * gw[i];
            for (size_t j = 0; j < res.bias.size(); ++j) res.bias[j] -= cfg.learning_rate * gb[j];
        }
        res.loss_trace.push_back(head_loss(res.weights, res.bias, features, targets));
    }
    return res;
}

inline HeadTrainResult train_head(const std::vector<std::vector<double>>& features,
                                  const std::vector<DriveLabel>& labels,
                                  const HeadTrainConfig& cfg = {}) {
    std::vector<std::vector<double>> targets;
    targets.reserve(labels.size());
    for (const auto& l : labels) targets.push_back({l.yaw, l.translation});
    return train_head_raw(features, targets, 2, cfg);
}

}  // namespace salign
