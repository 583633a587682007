#pragma once

#include "mousesim/model.hpp"
#include "mousesim/preprocess.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mousesim {
class SampleStore;
}

namespace mousesim::authn {

using preprocess::Sample;

// f(a, b): probability that two samples come from the same user. Operand
// order matters. Implementations must tolerate concurrent const calls.
class PairScorer {
public:
    virtual ~PairScorer() = default;
    virtual std::vector<double> score(const std::vector<const Sample*>& a,
                                      const std::vector<const Sample*>& b) const = 0;
    double score_one(const Sample& a, const Sample& b) const { return score({&a}, {&b}).front(); }
};

// Scores with a trained model, embedding each distinct sample once. The cache
// is keyed by address, so samples must stay put while the scorer is alive.
class ModelScorer final : public PairScorer {
public:
    explicit ModelScorer(const model::EmbeddingModel& model) : model_(model) {}

    std::vector<double> score(const std::vector<const Sample*>& a,
                              const std::vector<const Sample*>& b) const override;
    void prefetch(const std::vector<const Sample*>& samples) const;
    std::size_t cached() const;

private:
    const model::EmbeddingModel& model_;
    mutable std::mutex mu_;
    mutable std::unordered_map<const Sample*, model::Embedding> cache_;
};

struct RankedSample {
    std::size_t index = 0;
    double loss = 0.0;

    bool operator==(const RankedSample&) const = default;
};

// Per user, candidate training samples ranked by selection loss (ties go to
// the lower index). The first entry is the user's base sample.
struct BaseSampleSet {
    std::map<std::string, std::vector<RankedSample>> ranked;

    bool has_user(const std::string& user_id) const { return ranked.count(user_id) != 0; }
    const RankedSample& top(const std::string& user_id) const;
    bool operator==(const BaseSampleSet&) const = default;

    void save(const std::filesystem::path& path) const;
    static BaseSampleSet load(const std::filesystem::path& path);
};

// {"user": [[j, loss], ...]}
void to_json(nlohmann::json& j, const BaseSampleSet& s);
void from_json(const nlohmann::json& j, BaseSampleSet& s);

struct UserSamples {
    std::string user_id;
    std::vector<const Sample*> samples;
};

inline constexpr std::size_t kSelectionDraws = 20;

// Validation probes shared by all candidates of one user: positives index the
// user's own validation list (a seeded shuffle, first min(20, n) entries),
// negatives are (other-user position in `val`, sample index) with the user
// drawn uniformly per draw. Both lists have the same length.
struct SelectionProbes {
    std::vector<std::size_t> positives;
    std::vector<std::pair<std::size_t, std::size_t>> negatives;
};

SelectionProbes draw_selection_probes(const std::vector<UserSamples>& val, std::size_t user, std::uint64_t seed);

// Selection loss of one candidate against its probes:
// (1/2m) sum_n -[log f(c, P_n) + log(1 - f(c, N_n))].
double selection_loss(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);

// Ranks every training sample of every user. `train` and `val` are aligned by
// position (same users in the same order).
BaseSampleSet select_base_samples(const PairScorer& scorer, const std::vector<UserSamples>& train,
                                  const std::vector<UserSamples>& val, std::uint64_t seed);

// Indices {j, E(j), E^2(j), ...}: each step advances by floor(e/2), at least
// one, where e is the segment count of the current sample. Stops early at
// the end of the list.
std::vector<std::size_t> expand_sample(const std::vector<std::size_t>& segment_counts, std::size_t j,
                                       std::size_t samp_n);

struct AuthRequest {
    std::string claimed_user;
    std::vector<const Sample*> query_samples;  // ordered, as recorded
    std::size_t start = 0;                     // first query sample to expand from
    std::size_t samp_n = 7;
    double threshold = 0.5;

    void validate() const;
};

struct Verdict {
    double score = 0.0;
    bool accepted = false;
    double threshold = 0.5;
    std::size_t samples_used = 0;
    std::vector<double> per_sample_scores;
    double movement_s = 0.0;  // effective movement time of the samples used
};

void to_json(nlohmann::json& j, const Verdict& v);

Verdict make_verdict(std::vector<double> scores, double threshold, double movement_s);

// Scores the expanded query against the claimed user's base sample as
// f(query_k, base) and accepts when the mean reaches the threshold.
Verdict authenticate(const PairScorer& scorer, const BaseSampleSet& bases, const SampleStore& enrolled,
                     const AuthRequest& request);

// Do two event streams come from the same person? Preprocesses both, scores
// up to k_pairs distinct cross pairs f(a_s, b_t) chosen with a seeded draw, and
// reports the mean. accepted means consistent.
Verdict detect_inconsistency(const PairScorer& scorer, const ingest::Session& record_a,
                             const ingest::Session& record_b, const preprocess::PreprocessConfig& cfg,
                             double threshold = 0.5, std::size_t k_pairs = 8, std::uint64_t seed = 0);

struct ThresholdPreset {
    std::string_view name;
    double threshold;
};

const std::vector<ThresholdPreset>& threshold_presets();

// A preset name, or a number in [0, 1].
double resolve_threshold(std::string_view name_or_value);

}  // namespace mousesim::authn
