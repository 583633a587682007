#include "mousesim/authn.hpp"

#include "mousesim/error.hpp"
#include "mousesim/rng.hpp"
#include "mousesim/sample_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace mousesim::authn {

namespace {

constexpr double kLogFloor = 1e-12;

}  // namespace

void ModelScorer::prefetch(const std::vector<const Sample*>& samples) const {
    std::vector<const Sample*> missing;
    {
        std::lock_guard lock(mu_);
        for (const Sample* s : samples)
            if (!cache_.count(s) && std::find(missing.begin(), missing.end(), s) == missing.end())
                missing.push_back(s);
    }
    if (missing.empty()) return;
    std::vector<std::span<const float>> inputs;
    inputs.reserve(missing.size());
    for (const Sample* s : missing) inputs.emplace_back(s->rows);
    auto emb = model_.embed_batch(inputs);
    std::lock_guard lock(mu_);
    for (std::size_t k = 0; k < missing.size(); ++k) cache_.emplace(missing[k], std::move(emb[k]));
}

std::size_t ModelScorer::cached() const {
    std::lock_guard lock(mu_);
    return cache_.size();
}

std::vector<double> ModelScorer::score(const std::vector<const Sample*>& a, const std::vector<const Sample*>& b) const {
    if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "pair lists differ in length");
    std::vector<const Sample*> all(a);
    all.insert(all.end(), b.begin(), b.end());
    prefetch(all);
    std::vector<const model::Embedding*> ea, eb;
    {
        std::lock_guard lock(mu_);
        for (std::size_t k = 0; k < a.size(); ++k) {
            ea.push_back(&cache_.at(a[k]));
            eb.push_back(&cache_.at(b[k]));
        }
    }
    // unordered_map never moves stored values, so the pointers stay valid.
    return model_.score_embedding_pairs(ea, eb);
}

const RankedSample& BaseSampleSet::top(const std::string& user_id) const {
    auto it = ranked.find(user_id);
    if (it == ranked.end() || it->second.empty()) throw Error(ErrorCode::UnknownUser, user_id);
    return it->second.front();
}

void to_json(nlohmann::json& j, const BaseSampleSet& s) {
    j = nlohmann::json::object();
    for (const auto& [uid, list] : s.ranked) {
        auto arr = nlohmann::json::array();
        for (const auto& r : list) arr.push_back(nlohmann::json::array({r.index, r.loss}));
        j[uid] = std::move(arr);
    }
}

void from_json(const nlohmann::json& j, BaseSampleSet& s) {
    s.ranked.clear();
    for (const auto& [uid, arr] : j.items()) {
        auto& list = s.ranked[uid];
        for (const auto& e : arr) list.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>()});
    }
}

void BaseSampleSet::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    // One user per line keeps large sets readable and diffable.
    const nlohmann::json j = *this;
    out << "{";
    bool first = true;
    for (const auto& [uid, arr] : j.items()) {
        out << (first ? "\n " : ",\n ") << nlohmann::json(uid).dump() << ": " << arr.dump();
        first = false;
    }
    out << "\n}\n";
}

BaseSampleSet BaseSampleSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    try {
        return nlohmann::json::parse(in).get<BaseSampleSet>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
}

SelectionProbes draw_selection_probes(const std::vector<UserSamples>& val, std::size_t user, std::uint64_t seed) {
    if (user >= val.size()) throw Error(ErrorCode::IndexOutOfRange, "user position " + std::to_string(user));
    const auto& own = val[user];
    if (own.samples.empty()) throw Error(ErrorCode::NoValidationData, own.user_id);
    std::vector<std::size_t> others;
    for (std::size_t u = 0; u < val.size(); ++u)
        if (u != user && !val[u].samples.empty()) others.push_back(u);
    if (others.empty()) throw Error(ErrorCode::NoOtherUsers, "no other user has validation samples");

    Rng rng(derive_seed(seed, "bases/" + own.user_id));
    SelectionProbes p;
    p.positives.resize(own.samples.size());
    std::iota(p.positives.begin(), p.positives.end(), std::size_t{0});
    rng.shuffle(p.positives);
    p.positives.resize(std::min(kSelectionDraws, p.positives.size()));
    for (std::size_t n = 0; n < p.positives.size(); ++n) {
        const std::size_t u = others[rng.index(others.size())];
        p.negatives.emplace_back(u, rng.index(val[u].samples.size()));
    }
    return p;
}

double selection_loss(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores) {
    double sum = 0.0;
    for (double f : positive_scores) sum -= std::log(std::max(f, kLogFloor));
    for (double f : negative_scores) sum -= std::log(std::max(1.0 - f, kLogFloor));
    return sum / static_cast<double>(positive_scores.size() + negative_scores.size());
}

BaseSampleSet select_base_samples(const PairScorer& scorer, const std::vector<UserSamples>& train,
                                  const std::vector<UserSamples>& val, std::uint64_t seed) {
    if (train.size() != val.size()) throw Error(ErrorCode::ShapeMismatch, "train and validation user lists differ");
    for (std::size_t u = 0; u < train.size(); ++u)
        if (train[u].user_id != val[u].user_id)
            throw Error(ErrorCode::ShapeMismatch, "user order differs at " + train[u].user_id);
    if (train.size() < 2) throw Error(ErrorCode::NoOtherUsers, "base selection needs at least two users");

    BaseSampleSet out;
    for (std::size_t u = 0; u < train.size(); ++u) {
        const auto probes = draw_selection_probes(val, u, seed);
        const std::size_t m = probes.positives.size();
        const auto& cands = train[u].samples;
        std::vector<const Sample*> qa, qb;
        qa.reserve(cands.size() * 2 * m);
        qb.reserve(cands.size() * 2 * m);
        for (const Sample* c : cands) {
            for (std::size_t n = 0; n < m; ++n) {
                qa.push_back(c);
                qb.push_back(val[u].samples[probes.positives[n]]);
            }
            for (const auto& [ou, idx] : probes.negatives) {
                qa.push_back(c);
                qb.push_back(val[ou].samples[idx]);
            }
        }
        const auto scores = scorer.score(qa, qb);
        auto& list = out.ranked[train[u].user_id];
        for (std::size_t j = 0; j < cands.size(); ++j) {
            const auto first = scores.begin() + static_cast<std::ptrdiff_t>(j * 2 * m);
            const std::vector<double> pos(first, first + static_cast<std::ptrdiff_t>(m));
            const std::vector<double> neg(first + static_cast<std::ptrdiff_t>(m),
                                          first + static_cast<std::ptrdiff_t>(2 * m));
            list.push_back({j, selection_loss(pos, neg)});
        }
        std::stable_sort(list.begin(), list.end(),
                         [](const RankedSample& x, const RankedSample& y) { return x.loss < y.loss; });
    }
    return out;
}

std::vector<std::size_t> expand_sample(const std::vector<std::size_t>& segment_counts, std::size_t j,
                                       std::size_t samp_n) {
    if (j >= segment_counts.size())
        throw Error(ErrorCode::IndexOutOfRange,
                    "start " + std::to_string(j) + " of " + std::to_string(segment_counts.size()) + " samples");
    if (samp_n < 1) throw Error(ErrorCode::InvalidConfig, "samp_n must be at least 1");
    std::vector<std::size_t> idx{j};
    while (idx.size() < samp_n) {
        const std::size_t next = idx.back() + std::max<std::size_t>(1, segment_counts[idx.back()] / 2);
        if (next >= segment_counts.size()) break;
        idx.push_back(next);
    }
    return idx;
}

void AuthRequest::validate() const {
    if (samp_n < 1) throw Error(ErrorCode::InvalidConfig, "samp_n must be at least 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidConfig, "threshold outside [0, 1]");
}

void to_json(nlohmann::json& j, const Verdict& v) {
    j = nlohmann::json{{"score", v.score},
                       {"accepted", v.accepted},
                       {"threshold", v.threshold},
                       {"samples_used", v.samples_used},
                       {"per_sample_scores", v.per_sample_scores},
                       {"movement_s", v.movement_s}};
}

Verdict make_verdict(std::vector<double> scores, double threshold, double movement_s) {
    Verdict v;
    v.threshold = threshold;
    v.samples_used = scores.size();
    v.score = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    v.accepted = v.score >= threshold;
    v.per_sample_scores = std::move(scores);
    v.movement_s = movement_s;
    return v;
}

Verdict authenticate(const PairScorer& scorer, const BaseSampleSet& bases, const SampleStore& enrolled,
                     const AuthRequest& request) {
    request.validate();
    if (!bases.has_user(request.claimed_user)) throw Error(ErrorCode::UnknownUser, request.claimed_user);
    if (request.query_samples.empty()) throw Error(ErrorCode::NoQuerySamples, "claimed " + request.claimed_user);
    const Sample& base = enrolled.at({request.claimed_user, bases.top(request.claimed_user).index});

    std::vector<std::size_t> counts;
    counts.reserve(request.query_samples.size());
    for (const Sample* s : request.query_samples) counts.push_back(s->segment_count());
    const auto idx = expand_sample(counts, request.start, request.samp_n);

    std::vector<const Sample*> qa, qb;
    double movement = 0.0;
    for (std::size_t k : idx) {
        qa.push_back(request.query_samples[k]);
        qb.push_back(&base);
        movement += request.query_samples[k]->effective_duration;
    }
    return make_verdict(scorer.score(qa, qb), request.threshold, movement);
}

Verdict detect_inconsistency(const PairScorer& scorer, const ingest::Session& record_a,
                             const ingest::Session& record_b, const preprocess::PreprocessConfig& cfg,
                             double threshold, std::size_t k_pairs, std::uint64_t seed) {
    if (k_pairs < 1) throw Error(ErrorCode::InvalidConfig, "k_pairs must be at least 1");
    const auto sa = preprocess::preprocess_session(record_a, cfg, "a", 0);
    const auto sb = preprocess::preprocess_session(record_b, cfg, "b", 0);
    if (sa.empty() || sb.empty())
        throw Error(ErrorCode::InsufficientData, std::string("record ") + (sa.empty() ? "a" : "b") +
                                                     " yields no samples; collect more movement");

    const std::size_t total = sa.size() * sb.size();
    const std::size_t n = std::min(k_pairs, total);
    std::vector<std::size_t> cells(total);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "detect"));
    for (std::size_t i = 0; i < n; ++i) std::swap(cells[i], cells[i + rng.index(total - i)]);

    std::vector<const Sample*> qa, qb;
    double movement = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& a = sa[cells[i] / sb.size()];
        const Sample& b = sb[cells[i] % sb.size()];
        qa.push_back(&a);
        qb.push_back(&b);
        movement += a.effective_duration + b.effective_duration;
    }
    return make_verdict(scorer.score(qa, qb), threshold, movement);
}

const std::vector<ThresholdPreset>& threshold_presets() {
    static const std::vector<ThresholdPreset> presets{
        {"default", 0.5},
        {"tuned-auth-all", 0.65},
        {"tuned-auth-sapimouse", 0.6},
        {"tuned-auth-balabit", 0.7},
        {"tuned-identity-lowfrr", 0.75},
        {"tuned-identity-balanced", 0.55},
    };
    return presets;
}

double resolve_threshold(std::string_view name_or_value) {
    for (const auto& p : threshold_presets())
        if (p.name == name_or_value) return p.threshold;
    double v = 0.0;
    const auto* end = name_or_value.data() + name_or_value.size();
    auto [ptr, ec] = std::from_chars(name_or_value.data(), end, v);
    if (ec != std::errc{} || ptr != end || !(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "unknown threshold preset '" + std::string(name_or_value) + "'");
    return v;
}

}  // namespace mousesim::authn
