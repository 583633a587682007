#pragma once

#include "mousesim/authn.hpp"
#include "mousesim/ingest.hpp"
#include "mousesim/preprocess.hpp"
#include "mousesim/rng.hpp"
#include "mousesim/sample_store.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace fixtures {

using mousesim::preprocess::Sample;

// A sample whose first two cells carry (owner number, index) so stub scorers
// can recover identities without a lookup table.
inline Sample tagged_sample(std::size_t user, std::size_t index, std::size_t segments = 4,
                            std::size_t max_rows = 256) {
    Sample s;
    s.user_id = "u" + std::to_string(user);
    s.rows.assign(max_rows * 4, 0.0f);
    s.rows[0] = static_cast<float>(user);
    s.rows[1] = static_cast<float>(index);
    s.true_len = 1;
    for (std::size_t k = 0; k < segments; ++k) {
        s.segment_ids.push_back(index + k);
        s.segment_durations.push_back(0.5);
    }
    s.effective_duration = 0.5 * static_cast<double>(segments);
    return s;
}

inline std::size_t user_of(const Sample& s) { return static_cast<std::size_t>(s.rows[0]); }
inline std::size_t index_of(const Sample& s) { return static_cast<std::size_t>(s.rows[1]); }

// Stub scorer backed by a plain function of the two samples.
class FnScorer final : public mousesim::authn::PairScorer {
public:
    explicit FnScorer(std::function<double(const Sample&, const Sample&)> f) : f_(std::move(f)) {}

    std::vector<double> score(const std::vector<const Sample*>& a, const std::vector<const Sample*>& b) const override {
        std::vector<double> out;
        for (std::size_t k = 0; k < a.size(); ++k) out.push_back(f_(*a[k], *b[k]));
        return out;
    }

private:
    std::function<double(const Sample&, const Sample&)> f_;
};

// A synthetic session of `duration` seconds, normalized.
inline mousesim::ingest::Session synth_session(std::uint64_t seed, double duration,
                                               const mousesim::ingest::SynthParams& p = {}) {
    return mousesim::ingest::normalize(mousesim::ingest::synth_user(p, seed, duration), 1920.0, 1080.0);
}

// Random but valid SynthParams.
inline mousesim::ingest::SynthParams random_params(mousesim::Rng& rng) {
    mousesim::ingest::SynthParams p;
    p.mean_speed = rng.uniform(0.1, 1.5);
    p.speed_jitter = rng.uniform(0.05, 0.5);
    p.pause_rate = rng.uniform(5.0, 60.0);
    p.pause_len = rng.uniform(0.2, 1.5);
    p.curvature = rng.uniform(0.01, 0.6);
    p.click_rate = rng.uniform(1.0, 20.0);
    p.sample_hz = rng.uniform(20.0, 150.0);
    return p;
}

// A store of `users` synthetic users.
inline mousesim::SampleStore synth_store(std::size_t users, std::uint64_t seed, double duration,
                                         const mousesim::preprocess::PreprocessConfig& cfg = {}) {
    const auto pop = mousesim::ingest::synth_population(users, seed);
    mousesim::SampleStore store(cfg.max_rows);
    for (std::size_t u = 0; u < users; ++u) {
        mousesim::ingest::UserRecord rec;
        rec.user_id = "user" + std::to_string(u);
        rec.sessions.push_back(synth_session(mousesim::derive_seed(seed, rec.user_id), duration, pop[u]));
        store.add_all(mousesim::preprocess::preprocess_user(rec, cfg));
    }
    return store;
}

}  // namespace fixtures
