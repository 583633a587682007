#pragma once

#include "mousesim/detail/network.hpp"
#include "mousesim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gradcheck {

struct Result {
    std::size_t n_params = 0;
    std::size_t worst_index = 0;
    double worst = 0.0;  // largest relative error
    double analytic = 0.0, numeric = 0.0;  // at worst_index
};

inline mousesim::model::ModelConfig tiny_config() {
    mousesim::model::ModelConfig cfg;
    cfg.conv_channels = {2, 2, 2};
    cfg.conv_kernel = 3;
    cfg.recurrent_hidden = 3;
    cfg.head_widths = {4, 3};
    cfg.seq_len = 8;
    cfg.dropout = 0.25;
    return cfg;
}

// Compares the analytic gradient of the double-precision network with central
// differences over every parameter. Relative error uses max(|a|, |n|, floor)
// as the scale.
inline Result run(const mousesim::model::ModelConfig& cfg, std::uint64_t seed, double h = 1e-5,
                  double floor = 1e-6) {
    using namespace mousesim::model::detail;
    Network<double> net(cfg);
    net.init(seed);
    // Zero-initialized biases would park some units exactly on the ReLU
    // kink, where central differences see half the slope.
    mousesim::Rng rng(seed ^ 0x5eed);
    for (auto& p : net.params()) p += 0.05 * rng.normal();

    std::vector<std::vector<float>> inputs(4, std::vector<float>(cfg.seq_len * cfg.input_features));
    for (auto& in : inputs)
        for (auto& v : in) v = static_cast<float>(rng.normal());
    PairBatch batch;
    for (const auto& in : inputs) batch.inputs.push_back(in.data());
    batch.a = {0, 1, 2};
    batch.b = {1, 2, 3};
    batch.labels = {1.0, 0.0, 1.0};
    const std::uint64_t dropout_seed = seed + 1;

    std::vector<double> grad;
    net.train_loss(batch, dropout_seed, &grad, false);

    Result r;
    r.n_params = grad.size();
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double saved = net.params()[i];
        net.params()[i] = saved + h;
        const double up = net.train_loss(batch, dropout_seed, nullptr, false);
        net.params()[i] = saved - h;
        const double down = net.train_loss(batch, dropout_seed, nullptr, false);
        net.params()[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(grad[i]), floor});
        const double rel = std::abs(numeric - grad[i]) / scale;
        if (rel > r.worst) r = {r.n_params, i, rel, grad[i], numeric};
    }
    return r;
}

}  // namespace gradcheck
