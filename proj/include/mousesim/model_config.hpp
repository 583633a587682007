#pragma once

#include <json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>

namespace mousesim::model {

struct ModelConfig {
    std::array<std::size_t, 3> conv_channels{32, 64, 64};
    std::size_t conv_kernel = 5;
    std::size_t recurrent_hidden = 64;
    std::size_t recurrent_layers = 2;
    std::array<std::size_t, 2> head_widths{256, 64};
    double dropout = 0.3;
    double learning_rate = 1e-5;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::size_t seq_len = 256;
    std::size_t input_features = 4;
    bool swap_augment = false;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;

    // 200 epochs at 1e-5 with the default widths.
    static ModelConfig full();
    // Narrower network, 50 epochs at 1e-4 and small batches: the desk-scale
    // setting used by the synthetic experiments.
    static ModelConfig fast();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace mousesim::model
