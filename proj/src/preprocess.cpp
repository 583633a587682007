#include "mousesim/preprocess.hpp"

#include "mousesim/error.hpp"

#include <algorithm>

namespace mousesim::preprocess {

void PreprocessConfig::validate() const {
    if (!(gap_cut > 0.0) || min_seg_points == 0 || !(min_move_frac > 0.0) || max_rows == 0 ||
        min_sample_rows == 0)
        throw Error(ErrorCode::InvalidConfig, "preprocess parameters must be positive");
    if (min_sample_rows > max_rows)
        throw Error(ErrorCode::InvalidConfig, "min_sample_rows exceeds max_rows");
}

std::vector<Segment> segment_session(const std::vector<ingest::NormEvent>& events, const PreprocessConfig& cfg,
                                     const std::string& user_id, std::size_t session_id) {
    std::vector<Segment> segs;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const bool cut = k == 0 || events[k].button_down != events[k - 1].button_down ||
                         events[k].t - events[k - 1].t > cfg.gap_cut;
        if (cut) segs.push_back(Segment{user_id, session_id, {}, k});
        segs.back().events.push_back(events[k]);
    }
    return segs;
}

std::vector<Segment> filter_segments(std::vector<Segment> segs, const PreprocessConfig& cfg, FilterStats* stats) {
    FilterStats st;
    st.input = segs.size();
    std::vector<Segment> kept;
    kept.reserve(segs.size());
    for (auto& seg : segs) {
        if (seg.events.size() < cfg.min_seg_points) {
            ++st.dropped_short;
            continue;
        }
        auto [min_x, max_x] = std::minmax_element(seg.events.begin(), seg.events.end(),
                                                  [](const auto& a, const auto& b) { return a.x < b.x; });
        auto [min_y, max_y] = std::minmax_element(seg.events.begin(), seg.events.end(),
                                                  [](const auto& a, const auto& b) { return a.y < b.y; });
        const double range_x = max_x->x - min_x->x;
        const double range_y = max_y->y - min_y->y;
        const bool drop = cfg.literal_filter
                              ? (range_x > cfg.min_move_frac || range_y > cfg.min_move_frac)
                              : (range_x < cfg.min_move_frac && range_y < cfg.min_move_frac);
        if (drop) {
            ++st.dropped_movement;
            continue;
        }
        kept.push_back(std::move(seg));
    }
    st.kept = kept.size();
    if (stats) *stats = st;
    return kept;
}

std::vector<FeatureRow> featurize_segment(const Segment& seg) {
    if (seg.events.size() < 2)
        throw Error(ErrorCode::DegenerateSegment, "segment has " + std::to_string(seg.events.size()) + " events");
    std::vector<FeatureRow> rows;
    rows.reserve(seg.events.size() - 1);
    for (std::size_t k = 0; k + 1 < seg.events.size(); ++k) {
        const auto& a = seg.events[k];
        const auto& b = seg.events[k + 1];
        const double dt = b.t - a.t;
        if (!(dt > 0.0)) throw Error(ErrorCode::DegenerateSegment, "non-increasing timestamps");
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        rows.push_back({dx, dy, dx / dt, dy / dt});
    }
    return rows;
}

std::vector<Sample> window_samples(const std::vector<Segment>& segs, const PreprocessConfig& cfg) {
    std::vector<std::vector<FeatureRow>> features;
    features.reserve(segs.size());
    for (const auto& seg : segs) features.push_back(featurize_segment(seg));

    std::vector<Sample> samples;
    for (std::size_t start = 0; start < segs.size(); ++start) {
        std::size_t rows = 0;
        std::size_t end = start;
        while (end < segs.size() && rows + features[end].size() <= cfg.max_rows) {
            rows += features[end].size();
            ++end;
        }
        if (end == start || rows < cfg.min_sample_rows) continue;

        Sample s;
        s.user_id = segs[start].user_id;
        s.session_id = segs[start].session_id;
        s.rows.assign(cfg.max_rows * kFeatures, 0.0f);
        s.true_len = rows;
        std::size_t r = 0;
        for (std::size_t i = start; i < end; ++i) {
            for (const auto& row : features[i]) {
                for (std::size_t c = 0; c < kFeatures; ++c) s.rows[r * kFeatures + c] = static_cast<float>(row[c]);
                ++r;
            }
            s.segment_ids.push_back(i);
            s.segment_durations.push_back(segs[i].duration());
            s.effective_duration += segs[i].duration();
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<Sample> preprocess_session(const std::vector<ingest::NormEvent>& events, const PreprocessConfig& cfg,
                                       const std::string& user_id, std::size_t session_id, SessionStats* stats) {
    cfg.validate();
    auto segs = segment_session(events, cfg, user_id, session_id);
    SessionStats st;
    st.segments = segs.size();
    auto kept = filter_segments(std::move(segs), cfg, &st.filter);
    auto samples = window_samples(kept, cfg);
    st.samples = samples.size();
    if (stats) *stats = st;
    return samples;
}

std::vector<Sample> preprocess_user(const ingest::UserRecord& user, const PreprocessConfig& cfg,
                                    SessionStats* stats) {
    std::vector<Sample> out;
    SessionStats total;
    for (std::size_t s = 0; s < user.sessions.size(); ++s) {
        SessionStats st;
        auto samples = preprocess_session(user.sessions[s], cfg, user.user_id, s, &st);
        total.segments += st.segments;
        total.samples += st.samples;
        total.filter.input += st.filter.input;
        total.filter.dropped_short += st.filter.dropped_short;
        total.filter.dropped_movement += st.filter.dropped_movement;
        total.filter.kept += st.filter.kept;
        std::move(samples.begin(), samples.end(), std::back_inserter(out));
    }
    if (stats) *stats = total;
    return out;
}

}  // namespace mousesim::preprocess
