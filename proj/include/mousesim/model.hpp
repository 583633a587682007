#pragma once

#include "mousesim/model_config.hpp"
#include "mousesim/pairs.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mousesim {
class SampleStore;
}

namespace mousesim::model {

namespace detail {
template <typename S>
class Network;
struct Layout;
}  // namespace detail

using Embedding = std::vector<float>;

// Shared-weight pair scorer: both samples go through the same convolutional
// and recurrent embedding branches, and a feedforward head maps the
// concatenated embeddings to P(same user). Immutable once trained; const
// member functions are safe to call from several threads.
class EmbeddingModel {
public:
    explicit EmbeddingModel(const ModelConfig& cfg);
    EmbeddingModel(const EmbeddingModel& other);
    EmbeddingModel& operator=(const EmbeddingModel& other);
    EmbeddingModel(EmbeddingModel&&) noexcept;
    EmbeddingModel& operator=(EmbeddingModel&&) noexcept;
    ~EmbeddingModel();

    const ModelConfig& config() const;
    std::size_t embedding_dim() const;
    std::size_t input_size() const;  // seq_len * input_features

    Embedding embed(std::span<const float> sample) const;
    std::vector<Embedding> embed_batch(const std::vector<std::span<const float>>& samples) const;

    // P(same user) for the ordered pair (a, b), strictly inside (0, 1).
    double score_pair(std::span<const float> a, std::span<const float> b) const;
    // Head only, for callers that cache embeddings.
    double score_embeddings(const Embedding& a, const Embedding& b) const;
    std::vector<double> score_embedding_pairs(const std::vector<const Embedding*>& a,
                                              const std::vector<const Embedding*>& b) const;

    std::vector<float>& parameters();
    const std::vector<float>& parameters() const;
    const std::vector<float>& buffers() const;
    const detail::Layout& layout() const;

    detail::Network<float>& network();
    const detail::Network<float>& network() const;

    // Free-form text stored alongside the config block (run hashes, notes).
    const std::string& metadata() const { return metadata_; }
    void set_metadata(std::string text) { metadata_ = std::move(text); }

    void save(const std::filesystem::path& path) const;
    static EmbeddingModel load(const std::filesystem::path& path);
    void write(std::ostream& out) const;
    static EmbeddingModel read(std::istream& in);

private:
    std::unique_ptr<detail::Network<float>> net_;
    std::string metadata_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;   // NaN when no validation set was given
    double val_auc = 0.0;    // NaN when undefined
    double wall_time_s = 0.0;
    std::size_t steps = 0;   // optimizer steps taken this epoch
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t total_steps = 0;
};

void to_json(nlohmann::json& j, const TrainHistory& h);

struct TrainOptions {
    std::function<void(const EpochRecord&)> on_epoch;
    bool validate_each_epoch = true;
};

struct TrainResult {
    EmbeddingModel model;
    TrainHistory history;
};

// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on binary cross-entropy
// for exactly cfg.epochs epochs, reshuffling the training instances each
// epoch with a seeded generator. Returns the final-epoch model.
TrainResult train(const ModelConfig& cfg, const std::vector<pairs::Instance>& train_instances,
                  const std::vector<pairs::Instance>& val_instances, const SampleStore& store,
                  const TrainOptions& options = {});

// Inference scores for instances, embedding each distinct sample once.
std::vector<double> score_instances(const EmbeddingModel& model, const std::vector<pairs::Instance>& instances,
                                    const SampleStore& store);

double bce(double p, double label);

}  // namespace mousesim::model
