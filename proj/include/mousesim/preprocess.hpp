#pragma once

#include "mousesim/ingest.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mousesim::preprocess {

inline constexpr std::size_t kFeatures = 4;  // dx, dy, dx/dt, dy/dt

struct PreprocessConfig {
    double gap_cut = 0.3;             // seconds
    std::size_t min_seg_points = 5;
    double min_move_frac = 0.05;      // fraction of the screen
    std::size_t max_rows = 256;
    std::size_t min_sample_rows = 32;
    // When set, discard segments whose x or y range EXCEEDS min_move_frac
    // instead of keeping only those that reach it.
    bool literal_filter = false;

    void validate() const;
};

// A maximal run of events with no held-button change and no gap above
// gap_cut.
struct Segment {
    std::string user_id;
    std::size_t session_id = 0;
    std::vector<ingest::NormEvent> events;
    std::size_t start_index = 0;  // position of the first event in its session

    double duration() const { return events.empty() ? 0.0 : events.back().t - events.front().t; }
};

using FeatureRow = std::array<double, kFeatures>;

// Fixed-size feature matrix (max_rows x 4, row-major, float) built from
// consecutive segments of one session. Rows past true_len are zero.
struct Sample {
    std::string user_id;
    std::size_t session_id = 0;
    std::vector<float> rows;
    std::size_t true_len = 0;
    std::vector<std::size_t> segment_ids;     // indices into the session's kept segments
    std::vector<double> segment_durations;    // parallel to segment_ids
    double effective_duration = 0.0;

    std::size_t segment_count() const { return segment_ids.size(); }
};

std::vector<Segment> segment_session(const std::vector<ingest::NormEvent>& events, const PreprocessConfig& cfg,
                                     const std::string& user_id = {}, std::size_t session_id = 0);

struct FilterStats {
    std::size_t input = 0;
    std::size_t dropped_short = 0;
    std::size_t dropped_movement = 0;
    std::size_t kept = 0;
};

std::vector<Segment> filter_segments(std::vector<Segment> segs, const PreprocessConfig& cfg,
                                     FilterStats* stats = nullptr);

// One row per consecutive event pair: [dx, dy, dx/dt, dy/dt].
std::vector<FeatureRow> featurize_segment(const Segment& seg);

// Sliding window with a stride of one segment: from each start segment,
// append whole segments while the row budget allows.
std::vector<Sample> window_samples(const std::vector<Segment>& segs, const PreprocessConfig& cfg);

struct SessionStats {
    FilterStats filter;
    std::size_t segments = 0;
    std::size_t samples = 0;
};

std::vector<Sample> preprocess_session(const std::vector<ingest::NormEvent>& events, const PreprocessConfig& cfg,
                                       const std::string& user_id, std::size_t session_id,
                                       SessionStats* stats = nullptr);

// All samples of a user, session by session, in session order.
std::vector<Sample> preprocess_user(const ingest::UserRecord& user, const PreprocessConfig& cfg,
                                    SessionStats* stats = nullptr);

}  // namespace mousesim::preprocess
