#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mousesim::ingest {

enum class Button { none, left, right, middle };
enum class Action { move, press, release, drag };

struct RawEvent {
    double t = 0.0;  // seconds
    double x = 0.0;  // pixels
    double y = 0.0;  // pixels
    Button button = Button::none;
    Action action = Action::move;

    bool operator==(const RawEvent&) const = default;
};

// Resolution-normalized event. Coordinates are in [0, 1] and t is strictly
// increasing within a session.
struct NormEvent {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    bool button_down = false;

    bool operator==(const NormEvent&) const = default;
};

using Session = std::vector<NormEvent>;

enum class SourceTag { guided, unguided, synthetic };

struct UserRecord {
    std::string user_id;
    std::vector<Session> sessions;
    SourceTag source_tag = SourceTag::unguided;
};

// Motion model knobs for the synthetic generator. Speeds are in normalized
// screen units per second.
struct SynthParams {
    double mean_speed = 0.5;
    double speed_jitter = 0.2;
    double pause_rate = 30.0;  // pauses per minute
    double pause_len = 0.6;    // seconds
    double curvature = 0.2;
    double click_rate = 6.0;   // clicks per minute
    double sample_hz = 100.0;

    void validate() const;
    bool operator==(const SynthParams&) const = default;
};

void to_json(nlohmann::json& j, const SynthParams& p);
void from_json(const nlohmann::json& j, SynthParams& p);

enum class LogSchema { canonical, sapimouse, balabit };

LogSchema parse_schema(std::string_view name);
std::string_view to_string(LogSchema schema);
std::string_view to_string(Button b);
std::string_view to_string(Action a);
std::string_view to_string(SourceTag tag);
SourceTag parse_source_tag(std::string_view name);

struct ParsedLog {
    std::vector<RawEvent> events;
    std::size_t malformed_lines = 0;
};

// Reads a line-delimited event log. A header line matching the schema is
// skipped silently; any other unparseable line is counted as malformed.
// Throws EmptyLog when no event could be parsed.
ParsedLog parse_event_log(std::istream& in, LogSchema schema);
ParsedLog parse_event_log_file(const std::filesystem::path& path, LogSchema schema);

// Scales pixel coordinates into [0, 1] (clamping off-screen values), sorts by
// time, merges events sharing a timestamp (last one wins) and derives the
// held-button state by replaying press/release/drag actions.
std::vector<NormEvent> normalize(std::vector<RawEvent> events, double screen_w, double screen_h);

// Inverse of normalize for writing normalized data back out: the held state
// becomes left press, drag and release actions, free motion a plain move.
std::vector<RawEvent> to_raw(const std::vector<NormEvent>& events, double screen_w = 1.0, double screen_h = 1.0);

struct Screen {
    double width = 1920.0;
    double height = 1080.0;
};

// Deterministic synthetic cursor stream: minimum-jerk strokes towards random
// targets with a per-user curvature bias, grouped into bursts separated by
// pauses, with occasional click pairs. Output is in pixels of `screen`.
std::vector<RawEvent> synth_user(const SynthParams& params, std::uint64_t seed, double duration,
                                 Screen screen = {});

// Latin-hypercube spread of SynthParams over `n_users`, so every pair of
// users differs along each motion dimension.
std::vector<SynthParams> synth_population(std::size_t n_users, std::uint64_t seed);

void write_canonical_log(std::ostream& out, const std::vector<RawEvent>& events);

struct LoadStats {
    std::size_t users = 0;
    std::size_t sessions = 0;
    std::size_t events = 0;
    std::size_t malformed_lines = 0;
    std::size_t empty_sessions = 0;  // files without a single parseable event, skipped
};

// Loads a dataset manifest (JSON). Session paths are resolved relative to the
// manifest's directory. Users may instead carry an inline "synth" block, in
// which case their sessions are generated from the manifest's global seed.
std::vector<UserRecord> load_dataset(const std::filesystem::path& manifest_path,
                                     LoadStats* stats = nullptr);

}  // namespace mousesim::ingest
