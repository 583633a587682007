#pragma once

// Shared-weight embedding network and pair head with hand-written backward
// passes. Instantiated for float (production) and double (gradient checks).

#include "mousesim/model_config.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mousesim::model::detail {

struct TensorSlot {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
};

// Flat parameter order (also the on-disk order), column-major tensors:
//   for l in 0..2: conv<l>.weight [(kernel*c_in) x c_out], bn<l>.gamma, bn<l>.beta
//   for l in 0..1: lstm<l>.w_input [in x 4H], lstm<l>.w_hidden [H x 4H], lstm<l>.bias [4H]
//   for l in 0..2: head<l>.weight [in x out], head<l>.bias [out]
// LSTM gate blocks are ordered input, forget, cell, output.
// Buffers: bn{0,1,2}.running_mean, bn{0,1,2}.running_var.
struct Layout {
    std::array<TensorSlot, 3> conv_w, bn_gamma, bn_beta, bn_mean, bn_var;
    std::array<TensorSlot, 2> lstm_wx, lstm_wh, lstm_b;
    std::array<TensorSlot, 3> head_w, head_b;
    std::size_t n_params = 0;
    std::size_t n_buffers = 0;
    std::size_t embedding_dim = 0;

    static Layout build(const ModelConfig& cfg);
    std::vector<TensorSlot> param_slots() const;
    // Slots belonging to the embedding branch (everything before the head).
    std::size_t embedding_param_end() const { return head_w[0].offset; }
};

struct PairBatch {
    std::vector<const float*> inputs;  // each seq_len x input_features, row-major
    std::vector<std::size_t> a;        // per pair, index into inputs
    std::vector<std::size_t> b;
    std::vector<double> labels;        // 1 = same user
};

template <typename S>
class Network {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    explicit Network(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    const Layout& layout() const { return layout_; }
    std::vector<S>& params() { return params_; }
    const std::vector<S>& params() const { return params_; }
    std::vector<S>& buffers() { return buffers_; }
    const std::vector<S>& buffers() const { return buffers_; }

    void init(std::uint64_t seed);

    // Inference-mode embeddings, one row per input.
    Mat embed(std::span<const float* const> inputs) const;

    // Inference-mode head logits for row-aligned embedding pairs.
    Vec head_logits(const Mat& ea, const Mat& eb) const;

    // Training-mode mean binary cross-entropy over the batch's pairs. Batch
    // normalization uses batch statistics over the batch's inputs and dropout
    // masks come from `dropout_seed`. Writes the gradient when `grad` is set
    // and refreshes running statistics when `update_running_stats` is true.
    S train_loss(const PairBatch& batch, std::uint64_t dropout_seed, std::vector<S>* grad,
                 bool update_running_stats);

private:
    ModelConfig cfg_;
    Layout layout_;
    std::vector<S> params_;
    std::vector<S> buffers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace mousesim::model::detail
