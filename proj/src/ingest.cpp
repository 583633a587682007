#include "mousesim/ingest.hpp"

#include "mousesim/error.hpp"
#include "mousesim/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace mousesim::ingest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool parse_button(std::string_view s, Button& out) {
    const std::string v = lower(s);
    if (v == "none" || v == "nobutton") out = Button::none;
    else if (v == "left") out = Button::left;
    else if (v == "right") out = Button::right;
    else if (v == "middle") out = Button::middle;
    else if (v == "scroll") out = Button::none;  // wheel motion carries no held state
    else return false;
    return true;
}

bool parse_action(std::string_view s, Action& out) {
    const std::string v = lower(s);
    if (v == "move") out = Action::move;
    else if (v == "press" || v == "pressed") out = Action::press;
    else if (v == "release" || v == "released") out = Action::release;
    else if (v == "drag") out = Action::drag;
    else if (v == "down" || v == "up") out = Action::move;  // Balabit scroll states
    else return false;
    return true;
}

bool is_header(std::string_view line, LogSchema schema) {
    const std::string v = lower(trim(line));
    switch (schema) {
        case LogSchema::canonical: return v == "t,x,y,button,action";
        case LogSchema::sapimouse: return v == "client timestamp,button,state,x,y";
        case LogSchema::balabit: return v == "record timestamp,client timestamp,button,state,x,y";
    }
    return false;
}

bool parse_line(std::string_view line, LogSchema schema, RawEvent& ev) {
    const auto f = split_csv(line);
    switch (schema) {
        case LogSchema::canonical:
            if (f.size() != 5) return false;
            if (!parse_double(f[0], ev.t) || !parse_double(f[1], ev.x) || !parse_double(f[2], ev.y))
                return false;
            if (!parse_button(f[3], ev.button) || !parse_action(f[4], ev.action)) return false;
            break;
        case LogSchema::sapimouse: {
            if (f.size() != 5) return false;
            double ms = 0.0;
            if (!parse_double(f[0], ms) || !parse_double(f[3], ev.x) || !parse_double(f[4], ev.y))
                return false;
            if (!parse_button(f[1], ev.button) || !parse_action(f[2], ev.action)) return false;
            ev.t = ms / 1000.0;
            break;
        }
        case LogSchema::balabit: {
            if (f.size() != 6) return false;
            double record_t = 0.0;
            if (!parse_double(f[0], record_t) || !parse_double(f[1], ev.t) ||
                !parse_double(f[4], ev.x) || !parse_double(f[5], ev.y))
                return false;
            if (!parse_button(f[2], ev.button) || !parse_action(f[3], ev.action)) return false;
            break;
        }
    }
    return ev.t >= 0.0;
}

unsigned button_bit(Button b) {
    switch (b) {
        case Button::left: return 1u;
        case Button::right: return 2u;
        case Button::middle: return 4u;
        case Button::none: return 8u;  // press reported without a button name
    }
    return 8u;
}

}  // namespace

void SynthParams::validate() const {
    const std::array<double, 7> v{mean_speed, speed_jitter, pause_rate, pause_len, curvature, click_rate, sample_hz};
    for (double x : v) {
        if (!(x > 0.0) || !std::isfinite(x))
            throw Error(ErrorCode::InvalidConfig, "synthetic parameters must be finite and strictly positive");
    }
    if (sample_hz < 20.0) throw Error(ErrorCode::InvalidConfig, "sample_hz must be at least 20");
}

LogSchema parse_schema(std::string_view name) {
    const std::string v = lower(name);
    if (v == "canonical") return LogSchema::canonical;
    if (v == "sapimouse") return LogSchema::sapimouse;
    if (v == "balabit") return LogSchema::balabit;
    throw Error(ErrorCode::UnknownSchema, "'" + std::string(name) + "'");
}

std::string_view to_string(LogSchema schema) {
    switch (schema) {
        case LogSchema::canonical: return "canonical";
        case LogSchema::sapimouse: return "sapimouse";
        case LogSchema::balabit: return "balabit";
    }
    return "canonical";
}

std::string_view to_string(Button b) {
    switch (b) {
        case Button::none: return "none";
        case Button::left: return "left";
        case Button::right: return "right";
        case Button::middle: return "middle";
    }
    return "none";
}

std::string_view to_string(Action a) {
    switch (a) {
        case Action::move: return "move";
        case Action::press: return "press";
        case Action::release: return "release";
        case Action::drag: return "drag";
    }
    return "move";
}

std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::guided: return "guided";
        case SourceTag::unguided: return "unguided";
        case SourceTag::synthetic: return "synthetic";
    }
    return "unguided";
}

SourceTag parse_source_tag(std::string_view name) {
    const std::string v = lower(name);
    if (v == "guided") return SourceTag::guided;
    if (v == "synthetic") return SourceTag::synthetic;
    if (v == "unguided") return SourceTag::unguided;
    throw Error(ErrorCode::InvalidConfig, "unknown source tag '" + std::string(name) + "'");
}

ParsedLog parse_event_log(std::istream& in, LogSchema schema) {
    ParsedLog log;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const std::string_view view = trim(line);
        if (view.empty()) {
            first = false;
            continue;
        }
        if (first && is_header(view, schema)) {
            first = false;
            continue;
        }
        first = false;
        RawEvent ev;
        if (parse_line(view, schema, ev)) log.events.push_back(ev);
        else ++log.malformed_lines;
    }
    if (log.events.empty())
        throw Error(ErrorCode::EmptyLog, "no parseable events (" + std::to_string(log.malformed_lines) +
                                             " malformed lines)");
    return log;
}

ParsedLog parse_event_log_file(const std::filesystem::path& path, LogSchema schema) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    try {
        return parse_event_log(in, schema);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyLog) throw Error(ErrorCode::EmptyLog, path.string());
        throw;
    }
}

std::vector<NormEvent> normalize(std::vector<RawEvent> events, double screen_w, double screen_h) {
    if (!(screen_w > 0.0) || !(screen_h > 0.0))
        throw Error(ErrorCode::NonpositiveResolution,
                    std::to_string(screen_w) + "x" + std::to_string(screen_h));
    std::stable_sort(events.begin(), events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.t < b.t; });

    std::vector<NormEvent> out;
    out.reserve(events.size());
    unsigned held = 0;
    for (const RawEvent& ev : events) {
        switch (ev.action) {
            case Action::press: held |= button_bit(ev.button); break;
            case Action::release:
                if (ev.button == Button::none) held = 0;
                else held &= ~button_bit(ev.button);
                break;
            case Action::drag:
                if (held == 0) held = button_bit(ev.button == Button::none ? Button::left : ev.button);
                break;
            case Action::move: break;
        }
        NormEvent ne{ev.t, std::clamp(ev.x / screen_w, 0.0, 1.0), std::clamp(ev.y / screen_h, 0.0, 1.0), held != 0};
        if (!out.empty() && out.back().t == ne.t) out.back() = ne;
        else out.push_back(ne);
    }
    return out;
}

std::vector<RawEvent> to_raw(const std::vector<NormEvent>& events, double screen_w, double screen_h) {
    std::vector<RawEvent> out;
    out.reserve(events.size());
    bool held = false;
    for (const NormEvent& e : events) {
        RawEvent r{e.t, e.x * screen_w, e.y * screen_h, Button::none, Action::move};
        if (e.button_down) {
            r.button = Button::left;
            r.action = held ? Action::drag : Action::press;
        } else if (held) {
            r.button = Button::left;
            r.action = Action::release;
        }
        held = e.button_down;
        out.push_back(r);
    }
    return out;
}

std::vector<RawEvent> synth_user(const SynthParams& params, std::uint64_t seed, double duration, Screen screen) {
    params.validate();
    std::vector<RawEvent> events;
    if (!(duration > 0.0)) return events;

    Rng rng(seed);
    const double dt = 1.0 / params.sample_hz;
    const double mean_burst = 60.0 / params.pause_rate;
    double x = rng.uniform(0.2, 0.8);
    double y = rng.uniform(0.2, 0.8);
    double t = 0.0;
    auto emit = [&](double tt, double xx, double yy, Button b, Action a) {
        events.push_back(RawEvent{tt, std::clamp(xx, 0.0, 1.0) * screen.width,
                                  std::clamp(yy, 0.0, 1.0) * screen.height, b, a});
    };
    emit(t, x, y, Button::none, Action::move);

    double burst_left = rng.exponential(mean_burst);
    while (t < duration) {
        // One stroke: minimum-jerk travel to a random target along an arc.
        const double tx = rng.uniform(0.05, 0.95);
        const double ty = rng.uniform(0.05, 0.95);
        const double dx = tx - x;
        const double dy = ty - y;
        const double dist = std::hypot(dx, dy);
        if (dist < 0.02) continue;
        double speed = params.mean_speed * (1.0 + params.speed_jitter * rng.normal());
        speed = std::max(speed, 0.1 * params.mean_speed);
        const double stroke_time = dist / speed;
        const std::size_t steps = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(stroke_time / dt)));
        const double px = -dy / dist;
        const double py = dx / dist;
        const double bend = params.curvature * (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.75 + 0.5 * rng.uniform());
        const double tremor = 0.0004 * (1.0 + params.speed_jitter);
        const double x0 = x;
        const double y0 = y;
        for (std::size_t k = 1; k <= steps && t < duration; ++k) {
            const double tau = static_cast<double>(k) / static_cast<double>(steps);
            const double s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
            const double arc = bend * dist * std::sin(M_PI * s);
            x = x0 + s * dx + arc * px + tremor * rng.normal();
            y = y0 + s * dy + arc * py + tremor * rng.normal();
            t += dt;
            emit(t, x, y, Button::none, Action::move);
        }
        burst_left -= stroke_time;

        // Clicks per minute of motion track click_rate.
        const double click_prob = std::min(1.0, params.click_rate * stroke_time / 60.0);
        if (t < duration && rng.uniform() < click_prob) {
            t += dt;
            emit(t, x, y, Button::left, Action::press);
            t += 0.08 + 0.05 * rng.uniform();
            emit(t, x, y, Button::left, Action::release);
        }
        if (burst_left <= 0.0) {
            t += params.pause_len * (0.6 + 0.8 * rng.uniform());
            burst_left = rng.exponential(mean_burst);
        } else {
            t += dt;  // brief dwell between strokes
        }
    }
    while (!events.empty() && events.back().t > duration) events.pop_back();
    return events;
}

std::vector<SynthParams> synth_population(std::size_t n_users, std::uint64_t seed) {
    Rng rng(seed);
    constexpr std::size_t dims = 6;
    std::array<std::vector<std::size_t>, dims> strata;
    for (auto& perm : strata) {
        perm.resize(n_users);
        for (std::size_t i = 0; i < n_users; ++i) perm[i] = i;
        rng.shuffle(perm);
    }
    auto quantile = [&](std::size_t dim, std::size_t user) {
        return (static_cast<double>(strata[dim][user]) + 0.25 + 0.5 * rng.uniform()) /
               static_cast<double>(n_users);
    };
    auto log_lerp = [](double lo, double hi, double q) { return lo * std::pow(hi / lo, q); };

    std::vector<SynthParams> out;
    out.reserve(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        SynthParams p;
        p.mean_speed = log_lerp(0.12, 1.6, quantile(0, u));
        p.speed_jitter = 0.05 + 0.4 * quantile(1, u);
        p.pause_rate = log_lerp(12.0, 60.0, quantile(2, u));
        p.pause_len = 0.4 + 0.8 * quantile(3, u);
        p.curvature = 0.02 + 0.5 * quantile(4, u);
        p.click_rate = 4.0;
        p.sample_hz = log_lerp(40.0, 160.0, quantile(5, u));
        out.push_back(p);
    }
    return out;
}

void write_canonical_log(std::ostream& out, const std::vector<RawEvent>& events) {
    out << "t,x,y,button,action\n";
    char buf[128];
    for (const RawEvent& e : events) {
        std::snprintf(buf, sizeof buf, "%.6f,%.3f,%.3f,", e.t, e.x, e.y);
        out << buf << to_string(e.button) << ',' << to_string(e.action) << '\n';
    }
}

void to_json(nlohmann::json& j, const SynthParams& p) {
    j = nlohmann::json{{"mean_speed", p.mean_speed}, {"speed_jitter", p.speed_jitter}, {"pause_rate", p.pause_rate},
                       {"pause_len", p.pause_len},   {"curvature", p.curvature},       {"click_rate", p.click_rate},
                       {"sample_hz", p.sample_hz}};
}

void from_json(const nlohmann::json& j, SynthParams& p) {
    SynthParams d;
    p.mean_speed = j.value("mean_speed", d.mean_speed);
    p.speed_jitter = j.value("speed_jitter", d.speed_jitter);
    p.pause_rate = j.value("pause_rate", d.pause_rate);
    p.pause_len = j.value("pause_len", d.pause_len);
    p.curvature = j.value("curvature", d.curvature);
    p.click_rate = j.value("click_rate", d.click_rate);
    p.sample_hz = j.value("sample_hz", d.sample_hz);
    p.validate();
}

std::vector<UserRecord> load_dataset(const std::filesystem::path& manifest_path, LoadStats* stats) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::MissingFile, manifest_path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, manifest_path.string() + ": " + e.what());
    }
    const auto root = manifest_path.parent_path();
    const std::uint64_t global_seed = manifest.value("seed", std::uint64_t{0});

    LoadStats local;
    std::vector<UserRecord> users;
    for (const auto& entry : manifest.at("users")) {
        UserRecord rec;
        rec.user_id = entry.at("user_id").get<std::string>();
        for (const auto& existing : users) {
            if (existing.user_id == rec.user_id)
                throw Error(ErrorCode::InvalidConfig, "duplicate user_id '" + rec.user_id + "'");
        }
        double w = 1920.0, h = 1080.0;
        if (entry.contains("resolution")) {
            w = entry["resolution"].at(0).get<double>();
            h = entry["resolution"].at(1).get<double>();
        }
        if (entry.contains("synth")) {
            const auto& block = entry["synth"];
            const auto params = block.get<SynthParams>();
            const double duration = block.value("duration", 60.0);
            const std::size_t n_sessions = block.value("sessions", std::size_t{1});
            rec.source_tag = SourceTag::synthetic;
            for (std::size_t s = 0; s < n_sessions; ++s) {
                const auto seed = derive_seed(global_seed, rec.user_id + "/session/" + std::to_string(s));
                auto raw = synth_user(params, seed, duration, Screen{w, h});
                local.events += raw.size();
                auto session = normalize(std::move(raw), w, h);
                if (!session.empty()) rec.sessions.push_back(std::move(session));
            }
        } else {
            const LogSchema schema = parse_schema(entry.value("schema", std::string("canonical")));
            rec.source_tag = parse_source_tag(entry.value("source", std::string("unguided")));
            for (const auto& rel : entry.at("sessions")) {
                const auto path = root / rel.get<std::string>();
                if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
                ParsedLog log;
                try {
                    log = parse_event_log_file(path, schema);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::EmptyLog) throw;
                    ++local.empty_sessions;
                    continue;
                }
                local.events += log.events.size();
                local.malformed_lines += log.malformed_lines;
                auto session = normalize(std::move(log.events), w, h);
                if (!session.empty()) rec.sessions.push_back(std::move(session));
            }
        }
        local.sessions += rec.sessions.size();
        users.push_back(std::move(rec));
    }
    local.users = users.size();
    if (stats) *stats = local;
    return users;
}

}  // namespace mousesim::ingest
