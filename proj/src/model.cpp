#include "mousesim/model.hpp"

#include "mousesim/detail/network.hpp"
#include "mousesim/error.hpp"
#include "mousesim/eval.hpp"
#include "mousesim/rng.hpp"
#include "mousesim/sample_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace mousesim::model {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'I', 'M', 'M', 'O', 'D', 'L'};
constexpr double kProbFloor = 1e-7;
constexpr std::size_t kInferenceChunk = 32;

double to_probability(double logit) {
    const double p = 1.0 / (1.0 + std::exp(-logit));
    return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

template <typename T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}

    template <typename T>
    T get() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void floats(std::vector<float>& out, std::size_t n) {
        need(n * sizeof(float));
        out.resize(n);
        std::memcpy(out.data(), data_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Error(ErrorCode::CorruptModelFile, "truncated model file");
    }

    const std::string& data_;
    std::size_t pos_ = 0;
};

}  // namespace

void ModelConfig::validate() const {
    for (auto c : conv_channels)
        if (c == 0) throw Error(ErrorCode::InvalidConfig, "conv channel count must be positive");
    if (conv_kernel == 0) throw Error(ErrorCode::InvalidConfig, "conv_kernel must be positive");
    if (recurrent_hidden == 0) throw Error(ErrorCode::InvalidConfig, "recurrent_hidden must be positive");
    if (recurrent_layers != 2) throw Error(ErrorCode::InvalidConfig, "the recurrent stack has exactly 2 layers");
    for (auto w : head_widths)
        if (w == 0) throw Error(ErrorCode::InvalidConfig, "head widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be at least 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be at least 1");
    if (seq_len < 1 || input_features < 1) throw Error(ErrorCode::InvalidConfig, "input shape must be non-empty");
}

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::fast() {
    ModelConfig c;
    c.conv_channels = {16, 32, 32};
    c.recurrent_hidden = 32;
    c.head_widths = {64, 32};
    c.learning_rate = 1e-4;
    c.epochs = 50;
    c.batch_size = 8;
    return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"conv_channels", c.conv_channels},
                       {"conv_kernel", c.conv_kernel},
                       {"recurrent_hidden", c.recurrent_hidden},
                       {"recurrent_layers", c.recurrent_layers},
                       {"head_widths", c.head_widths},
                       {"dropout", c.dropout},
                       {"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"seed", c.seed},
                       {"seq_len", c.seq_len},
                       {"input_features", c.input_features},
                       {"swap_augment", c.swap_augment}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.conv_channels = j.value("conv_channels", d.conv_channels);
    c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
    c.recurrent_hidden = j.value("recurrent_hidden", d.recurrent_hidden);
    c.recurrent_layers = j.value("recurrent_layers", d.recurrent_layers);
    c.head_widths = j.value("head_widths", d.head_widths);
    c.dropout = j.value("dropout", d.dropout);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.seed = j.value("seed", d.seed);
    c.seq_len = j.value("seq_len", d.seq_len);
    c.input_features = j.value("input_features", d.input_features);
    c.swap_augment = j.value("swap_augment", d.swap_augment);
}

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
    cfg.validate();
    return cfg;
}

}  // namespace

EmbeddingModel::EmbeddingModel(const ModelConfig& cfg)
    : net_(std::make_unique<detail::Network<float>>(validated(cfg))) {
    net_->init(derive_seed(cfg.seed, "init"));
}

EmbeddingModel::EmbeddingModel(const EmbeddingModel& other)
    : net_(std::make_unique<detail::Network<float>>(*other.net_)), metadata_(other.metadata_) {}

EmbeddingModel& EmbeddingModel::operator=(const EmbeddingModel& other) {
    if (this != &other) {
        net_ = std::make_unique<detail::Network<float>>(*other.net_);
        metadata_ = other.metadata_;
    }
    return *this;
}

EmbeddingModel::EmbeddingModel(EmbeddingModel&&) noexcept = default;
EmbeddingModel& EmbeddingModel::operator=(EmbeddingModel&&) noexcept = default;
EmbeddingModel::~EmbeddingModel() = default;

const ModelConfig& EmbeddingModel::config() const { return net_->config(); }
std::size_t EmbeddingModel::embedding_dim() const { return net_->layout().embedding_dim; }
std::size_t EmbeddingModel::input_size() const { return config().seq_len * config().input_features; }
std::vector<float>& EmbeddingModel::parameters() { return net_->params(); }
const std::vector<float>& EmbeddingModel::parameters() const { return net_->params(); }
const std::vector<float>& EmbeddingModel::buffers() const { return net_->buffers(); }
const detail::Layout& EmbeddingModel::layout() const { return net_->layout(); }
detail::Network<float>& EmbeddingModel::network() { return *net_; }
const detail::Network<float>& EmbeddingModel::network() const { return *net_; }

Embedding EmbeddingModel::embed(std::span<const float> sample) const { return embed_batch({sample}).front(); }

std::vector<Embedding> EmbeddingModel::embed_batch(const std::vector<std::span<const float>>& samples) const {
    const std::size_t expected = input_size();
    std::vector<Embedding> out;
    out.reserve(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += kInferenceChunk) {
        const std::size_t end = std::min(samples.size(), start + kInferenceChunk);
        std::vector<const float*> ptrs;
        for (std::size_t k = start; k < end; ++k) {
            if (samples[k].size() != expected)
                throw Error(ErrorCode::ShapeMismatch, "sample has " + std::to_string(samples[k].size()) +
                                                          " values, expected " + std::to_string(expected));
            ptrs.push_back(samples[k].data());
        }
        const auto emb = net_->embed(ptrs);
        for (Eigen::Index r = 0; r < emb.rows(); ++r) {
            Embedding e(static_cast<std::size_t>(emb.cols()));
            for (Eigen::Index c = 0; c < emb.cols(); ++c) e[static_cast<std::size_t>(c)] = emb(r, c);
            out.push_back(std::move(e));
        }
    }
    return out;
}

double EmbeddingModel::score_pair(std::span<const float> a, std::span<const float> b) const {
    const auto emb = embed_batch({a, b});
    return score_embeddings(emb[0], emb[1]);
}

double EmbeddingModel::score_embeddings(const Embedding& a, const Embedding& b) const {
    return score_embedding_pairs({&a}, {&b}).front();
}

std::vector<double> EmbeddingModel::score_embedding_pairs(const std::vector<const Embedding*>& a,
                                                          const std::vector<const Embedding*>& b) const {
    const std::size_t dim = embedding_dim();
    if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "pair lists differ in length");
    using Mat = detail::Network<float>::Mat;
    Mat ea(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(dim));
    Mat eb(ea.rows(), ea.cols());
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k]->size() != dim || b[k]->size() != dim)
            throw Error(ErrorCode::ShapeMismatch, "embedding length differs from model dimension");
        for (std::size_t c = 0; c < dim; ++c) {
            ea(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = (*a[k])[c];
            eb(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = (*b[k])[c];
        }
    }
    const auto logits = net_->head_logits(ea, eb);
    std::vector<double> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = to_probability(logits(static_cast<Eigen::Index>(k)));
    return out;
}

void EmbeddingModel::write(std::ostream& out) const {
    std::string buf(kMagic, sizeof kMagic);
    put(buf, kModelFormatVersion);
    nlohmann::json block = config();
    block["metadata"] = metadata_;
    const std::string cfg = block.dump();
    put(buf, static_cast<std::uint32_t>(cfg.size()));
    buf += cfg;
    const auto& p = net_->params();
    const auto& b = net_->buffers();
    put(buf, static_cast<std::uint64_t>(p.size()));
    buf.append(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(float));
    put(buf, static_cast<std::uint64_t>(b.size()));
    buf.append(reinterpret_cast<const char*>(b.data()), b.size() * sizeof(float));
    put(buf, fnv1a64(buf));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

EmbeddingModel EmbeddingModel::read(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    Reader r(data);
    if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
        throw Error(ErrorCode::CorruptModelFile, "bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kModelFormatVersion)
        throw Error(ErrorCode::CorruptModelFile, "model format version " + std::to_string(version) +
                                                     ", expected " + std::to_string(kModelFormatVersion));
    const auto cfg_len = r.get<std::uint32_t>();
    ModelConfig cfg;
    std::string metadata;
    try {
        const auto block = nlohmann::json::parse(r.bytes(cfg_len));
        cfg = block.get<ModelConfig>();
        metadata = block.value("metadata", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptModelFile, std::string("config block: ") + e.what());
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptModelFile, std::string("config block: ") + e.what());
    }
    EmbeddingModel model(cfg);
    model.metadata_ = std::move(metadata);
    const auto n_params = r.get<std::uint64_t>();
    if (n_params != model.parameters().size())
        throw Error(ErrorCode::CorruptModelFile, "parameter count does not match config");
    r.floats(model.net_->params(), n_params);
    const auto n_buffers = r.get<std::uint64_t>();
    if (n_buffers != model.buffers().size())
        throw Error(ErrorCode::CorruptModelFile, "buffer count does not match config");
    r.floats(model.net_->buffers(), n_buffers);
    const std::size_t body = r.pos();
    const auto checksum = r.get<std::uint64_t>();
    if (checksum != fnv1a64(std::string_view(data).substr(0, body)))
        throw Error(ErrorCode::CorruptModelFile, "checksum mismatch");
    if (r.pos() != data.size()) throw Error(ErrorCode::CorruptModelFile, "trailing bytes after checksum");
    return model;
}

void EmbeddingModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    write(out);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    return read(in);
}

void to_json(nlohmann::json& j, const TrainHistory& h) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j = nlohmann::json::object();
    j["total_steps"] = h.total_steps;
    auto& arr = j["epochs"] = nlohmann::json::array();
    for (const auto& e : h.epochs)
        arr.push_back({{"epoch", e.epoch},
                       {"train_loss", num(e.train_loss)},
                       {"val_loss", num(e.val_loss)},
                       {"val_auc", num(e.val_auc)},
                       {"wall_time_s", e.wall_time_s},
                       {"steps", e.steps}});
}

double bce(double p, double label) {
    p = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

std::vector<double> score_instances(const EmbeddingModel& model, const std::vector<pairs::Instance>& instances,
                                    const SampleStore& store) {
    std::map<pairs::SampleRef, std::size_t> slot;
    std::vector<std::span<const float>> inputs;
    auto intern = [&](const pairs::SampleRef& ref) {
        auto [it, inserted] = slot.emplace(ref, inputs.size());
        if (inserted) inputs.push_back(store.matrix(ref));
        return it->second;
    };
    std::vector<std::size_t> ia, ib;
    for (const auto& inst : instances) {
        ia.push_back(intern(inst.a));
        ib.push_back(intern(inst.b));
    }
    const auto emb = model.embed_batch(inputs);
    std::vector<const Embedding*> pa, pb;
    for (std::size_t k = 0; k < instances.size(); ++k) {
        pa.push_back(&emb[ia[k]]);
        pb.push_back(&emb[ib[k]]);
    }
    return model.score_embedding_pairs(pa, pb);
}

TrainResult train(const ModelConfig& cfg, const std::vector<pairs::Instance>& train_instances,
                  const std::vector<pairs::Instance>& val_instances, const SampleStore& store,
                  const TrainOptions& options) {
    cfg.validate();
    if (train_instances.empty()) throw Error(ErrorCode::EmptyDataset, "no training instances");
    if (store.max_rows() * 4 != cfg.seq_len * cfg.input_features)
        throw Error(ErrorCode::ShapeMismatch, "sample store rows do not match model seq_len");

    std::vector<pairs::Instance> instances = train_instances;
    if (cfg.swap_augment) {
        for (const auto& inst : train_instances) instances.push_back({inst.b, inst.a, inst.label});
    }

    TrainResult result{EmbeddingModel(cfg), {}};
    auto& net = result.model.network();
    const std::size_t n_params = net.params().size();
    std::vector<float> grad, m(n_params, 0.0f), v(n_params, 0.0f);
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    const std::uint64_t dropout_root = derive_seed(cfg.seed, "dropout");
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;
    double last_finite = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        EpochRecord rec;
        rec.epoch = epoch + 1;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            detail::PairBatch batch;
            std::map<pairs::SampleRef, std::size_t> slot;
            auto intern = [&](const pairs::SampleRef& ref) {
                auto [it, inserted] = slot.emplace(ref, batch.inputs.size());
                if (inserted) batch.inputs.push_back(store.matrix(ref).data());
                return it->second;
            };
            for (std::size_t k = start; k < end; ++k) {
                const auto& inst = instances[order[k]];
                batch.a.push_back(intern(inst.a));
                batch.b.push_back(intern(inst.b));
                batch.labels.push_back(inst.label == pairs::Label::same ? 1.0 : 0.0);
            }
            const float loss = net.train_loss(batch, splitmix64(dropout_root + step), &grad, true);
            if (!std::isfinite(loss))
                throw Error(ErrorCode::NonfiniteLoss, "epoch " + std::to_string(epoch + 1) +
                                                          " diverged; last finite epoch loss " +
                                                          std::to_string(last_finite));
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            const float lr_t = static_cast<float>(cfg.learning_rate * std::sqrt(c2) / c1);
            auto& p = net.params();
            for (std::size_t i = 0; i < n_params; ++i) {
                m[i] = static_cast<float>(beta1) * m[i] + static_cast<float>(1.0 - beta1) * grad[i];
                v[i] = static_cast<float>(beta2) * v[i] + static_cast<float>(1.0 - beta2) * grad[i] * grad[i];
                p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + static_cast<float>(adam_eps * std::sqrt(c2)));
            }
            loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
            ++rec.steps;
        }
        rec.train_loss = loss_sum / static_cast<double>(instances.size());
        last_finite = rec.train_loss;
        rec.val_loss = rec.val_auc = std::numeric_limits<double>::quiet_NaN();
        const bool last = epoch + 1 == cfg.epochs;
        if (!val_instances.empty() && (options.validate_each_epoch || last)) {
            const auto scores = score_instances(result.model, val_instances, store);
            eval::ScoredSet set;
            double vl = 0.0;
            for (std::size_t k = 0; k < scores.size(); ++k) {
                const bool same = val_instances[k].label == pairs::Label::same;
                vl += bce(scores[k], same ? 1.0 : 0.0);
                set.add(scores[k], same ? eval::ItemLabel::genuine : eval::ItemLabel::impostor);
            }
            rec.val_loss = vl / static_cast<double>(scores.size());
            if (set.count(eval::ItemLabel::genuine) > 0 && set.count(eval::ItemLabel::impostor) > 0)
                rec.val_auc = eval::roc_auc(set);
        }
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);
    }
    result.history.total_steps = step;
    return result;
}

}  // namespace mousesim::model
