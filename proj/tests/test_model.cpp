#include "fixtures.hpp"
#include "gradcheck.hpp"

#include "mousesim/detail/network.hpp"
#include "mousesim/error.hpp"
#include "mousesim/model.hpp"
#include "mousesim/sample_store.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace mousesim;
using namespace mousesim::model;

namespace {

const SampleStore& small_store() {
    static const SampleStore store = fixtures::synth_store(4, 77, 90.0);
    return store;
}

std::vector<pairs::Instance> small_instances(std::size_t limit) {
    auto all = pairs::flatten(pairs::build_instances(small_store().counts(), 5));
    if (all.size() > limit) all.resize(limit);
    return all;
}

ModelConfig tiny_config() {
    ModelConfig c = ModelConfig::fast();
    c.conv_channels = {4, 4, 4};
    c.recurrent_hidden = 4;
    c.head_widths = {8, 4};
    c.epochs = 1;
    return c;
}

std::string serialize(const EmbeddingModel& m) {
    std::ostringstream out;
    m.write(out);
    return out.str();
}

ErrorCode read_error(const std::string& bytes) {
    std::istringstream in(bytes);
    try {
        EmbeddingModel::read(in);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("default embedding has 128 dimensions and finite output on zeros") {
    EmbeddingModel m(ModelConfig{});
    CHECK(m.embedding_dim() == 128);
    const std::vector<float> zeros(m.input_size(), 0.0f);
    const auto e = m.embed(zeros);
    REQUIRE(e.size() == 128);
    for (float v : e) CHECK(std::isfinite(v));
    const double p = m.score_pair(zeros, zeros);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
}

TEST_CASE("identical inputs give identical embeddings and repeatable scores") {
    EmbeddingModel m(tiny_config());
    const auto& s = small_store();
    const auto& a = s.samples_of(s.users()[0])[0].rows;
    const auto& b = s.samples_of(s.users()[1])[0].rows;
    CHECK(m.embed(a) == m.embed(a));
    const double p = m.score_pair(a, b);
    CHECK(p == m.score_pair(a, b));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    const auto batch = m.embed_batch({a, b});
    const auto ea = m.embed(a), eb = m.embed(b);
    for (std::size_t k = 0; k < ea.size(); ++k) {
        CHECK(batch[0][k] == doctest::Approx(ea[k]).epsilon(1e-5));
        CHECK(batch[1][k] == doctest::Approx(eb[k]).epsilon(1e-5));
    }
    CHECK_THROWS_AS(m.embed(std::vector<float>(10)), Error);
}

TEST_CASE("config validation") {
    ModelConfig c;
    c.recurrent_layers = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.learning_rate = 0;
    CHECK_THROWS_AS(EmbeddingModel{c}, Error);
    nlohmann::json j = ModelConfig::fast();
    CHECK(j.get<ModelConfig>() == ModelConfig::fast());
}

TEST_CASE("one epoch on ten instances with batch 64 takes one step") {
    auto cfg = tiny_config();
    cfg.batch_size = 64;
    const auto inst = small_instances(10);
    REQUIRE(inst.size() == 10);
    const auto r = train(cfg, inst, {}, small_store());
    REQUIRE(r.history.epochs.size() == 1);
    CHECK(r.history.epochs[0].steps == 1);
    CHECK(r.history.total_steps == 1);
    CHECK(std::isnan(r.history.epochs[0].val_loss));
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto cfg = tiny_config();
    cfg.epochs = 2;
    cfg.seed = 9;
    const auto inst = small_instances(24);
    const auto a = train(cfg, inst, inst, small_store());
    const auto b = train(cfg, inst, inst, small_store());
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(serialize(a.model) == serialize(b.model));
    cfg.seed = 10;
    CHECK(train(cfg, inst, {}, small_store()).model.parameters() != a.model.parameters());
}

TEST_CASE("training errors") {
    auto cfg = tiny_config();
    CHECK_THROWS_AS(train(cfg, {}, {}, small_store()), Error);
    cfg.seq_len = 128;
    try {
        train(cfg, small_instances(4), {}, small_store());
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("save and load round trip") {
    auto cfg = tiny_config();
    cfg.seed = 3;
    const auto r = train(cfg, small_instances(12), {}, small_store());
    EmbeddingModel m = r.model;
    m.set_metadata("hash=abc");
    const std::string bytes = serialize(m);
    std::istringstream in(bytes);
    const auto back = EmbeddingModel::read(in);
    CHECK(back.config() == m.config());
    CHECK(back.parameters() == m.parameters());
    CHECK(back.buffers() == m.buffers());
    CHECK(back.metadata() == "hash=abc");
    const auto& s = small_store();
    const auto& a = s.samples_of(s.users()[0])[1].rows;
    const auto& b = s.samples_of(s.users()[2])[0].rows;
    CHECK(back.score_pair(a, b) == m.score_pair(a, b));

    CHECK(read_error(bytes.substr(0, bytes.size() / 2)) == ErrorCode::CorruptModelFile);
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK(read_error(flipped) == ErrorCode::CorruptModelFile);
    std::string versioned = bytes;
    versioned[8] = static_cast<char>(kModelFormatVersion + 1);
    std::istringstream vin(versioned);
    try {
        EmbeddingModel::read(vin);
        FAIL("expected version error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CorruptModelFile);
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    CHECK(read_error("not a model") == ErrorCode::CorruptModelFile);
    CHECK_THROWS_AS(EmbeddingModel::load("/nonexistent/model.bin"), Error);
}

TEST_CASE("analytic gradient matches central differences") {
    for (std::uint64_t seed : {42, 7}) {
        const auto r = gradcheck::run(gradcheck::tiny_config(), seed);
        CHECK(r.n_params == detail::Layout::build(gradcheck::tiny_config()).n_params);
        CHECK_MESSAGE(r.worst <= 1e-4, "param " << r.worst_index << " analytic " << r.analytic << " numeric " << r.numeric);
    }
}

TEST_CASE("loss falls on a learnable problem") {
    auto cfg = tiny_config();
    cfg.conv_channels = {8, 8, 8};
    cfg.recurrent_hidden = 8;
    cfg.head_widths = {16, 8};
    cfg.epochs = 15;
    cfg.learning_rate = 1e-3;
    cfg.seed = 2;
    const auto inst = small_instances(60);
    const auto r = train(cfg, inst, {}, small_store());
    CHECK(r.history.epochs.back().train_loss < r.history.epochs.front().train_loss);
}

TEST_CASE("bce and scoring helpers") {
    CHECK(bce(0.9, 1.0) == doctest::Approx(-std::log(0.9)));
    CHECK(std::isfinite(bce(0.0, 1.0)));
    EmbeddingModel m(tiny_config());
    const auto inst = small_instances(6);
    const auto scores = score_instances(m, inst, small_store());
    REQUIRE(scores.size() == inst.size());
    for (std::size_t k = 0; k < inst.size(); ++k)
        CHECK(scores[k] == doctest::Approx(m.score_pair(small_store().matrix(inst[k].a), small_store().matrix(inst[k].b))));
}
