#include "fixtures.hpp"
#include "oracles.hpp"

#include "mousesim/error.hpp"
#include "mousesim/ingest.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mousesim;
using namespace mousesim::ingest;

namespace {

ParsedLog parse(const std::string& text, LogSchema schema = LogSchema::canonical) {
    std::istringstream in(text);
    return parse_event_log(in, schema);
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mousesim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("canonical line maps field by field") {
    const auto log = parse("0.125,410,300,none,move\n");
    REQUIRE(log.events.size() == 1);
    CHECK(log.events[0] == RawEvent{0.125, 410, 300, Button::none, Action::move});
    CHECK(log.malformed_lines == 0);
}

TEST_CASE("malformed lines are skipped and counted") {
    const auto log = parse("t,x,y,button,action\n0.1,abc,300,none,move\n0.2,1,2,left,press\n0.3,1,2,none\n");
    CHECK(log.events.size() == 1);
    CHECK(log.malformed_lines == 2);
}

TEST_CASE("well-formed file keeps order") {
    const auto log = parse("0.0,1,1,none,move\n0.5,2,2,left,press\n0.25,3,3,left,release\n");
    REQUIRE(log.events.size() == 3);
    CHECK(log.events[0].t == 0.0);
    CHECK(log.events[1].t == 0.5);
    CHECK(log.events[2].t == 0.25);
}

TEST_CASE("unknown schema and empty logs are errors") {
    CHECK_THROWS_AS(parse_schema("csvish"), Error);
    try {
        parse("t,x,y,button,action\n");
        FAIL("expected EmptyLog");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyLog);
    }
}

TEST_CASE("dataset adapters") {
    SUBCASE("sapimouse uses milliseconds") {
        const auto log = parse("client timestamp,button,state,x,y\n1500,NoButton,Move,10,20\n1600,Left,Pressed,11,21\n",
                               LogSchema::sapimouse);
        REQUIRE(log.events.size() == 2);
        CHECK(log.events[0].t == doctest::Approx(1.5));
        CHECK(log.events[1].button == Button::left);
        CHECK(log.events[1].action == Action::press);
    }
    SUBCASE("balabit") {
        const auto log = parse("record timestamp,client timestamp,button,state,x,y\n0,0.5,NoButton,Move,100,200\n"
                               "0,0.6,Left,Drag,101,201\n0,0.7,Scroll,Down,101,201\n",
                               LogSchema::balabit);
        REQUIRE(log.events.size() == 3);
        CHECK(log.events[1].action == Action::drag);
        CHECK(log.events[2].button == Button::none);
    }
}

TEST_CASE("normalize scales, clamps and merges") {
    SUBCASE("exact halves") {
        const auto n = normalize({{0.0, 960, 540, Button::none, Action::move}}, 1920, 1080);
        CHECK(n[0].x == 0.5);
        CHECK(n[0].y == 0.5);
    }
    SUBCASE("clamp") {
        const auto n = normalize({{0.0, 2000, -5, Button::none, Action::move}}, 1920, 1080);
        CHECK(n[0].x == 1.0);
        CHECK(n[0].y == 0.0);
    }
    SUBCASE("duplicate timestamps keep the last") {
        const auto n = normalize({{1.0, 100, 100, Button::none, Action::move}, {1.0, 200, 200, Button::none, Action::move}},
                                 1000, 1000);
        REQUIRE(n.size() == 1);
        CHECK(n[0].x == doctest::Approx(0.2));
    }
    SUBCASE("button state replay") {
        const auto n = normalize({{0.0, 0, 0, Button::none, Action::move},
                                  {0.1, 0, 0, Button::left, Action::press},
                                  {0.2, 0, 0, Button::none, Action::move},
                                  {0.3, 0, 0, Button::left, Action::release},
                                  {0.4, 0, 0, Button::none, Action::drag}},
                                 10, 10);
        CHECK_FALSE(n[0].button_down);
        CHECK(n[1].button_down);
        CHECK(n[2].button_down);
        CHECK_FALSE(n[3].button_down);
        CHECK(n[4].button_down);
    }
    SUBCASE("unsorted input is sorted") {
        const auto n = normalize({{0.2, 0, 0, Button::none, Action::move}, {0.1, 0, 0, Button::none, Action::move}}, 1, 1);
        CHECK(n[0].t == 0.1);
    }
    CHECK_THROWS_AS(normalize({}, 0, 10), Error);
}

TEST_CASE("normalize is idempotent on unit screens") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto once = fixtures::synth_session(rng.next_u64(), 10.0, fixtures::random_params(rng));
        CHECK(normalize(to_raw(once), 1.0, 1.0) == once);
        CHECK(normalize(to_raw(once, 1920, 1080), 1920, 1080).size() == once.size());
    }
}

TEST_CASE("normalized timestamps strictly increase under injected duplicates") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RawEvent> raw;
        const std::size_t n = 5 + rng.index(200);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = std::floor(rng.uniform(0.0, 5.0) * 20.0) / 20.0;  // coarse grid forces collisions
            raw.push_back({t, rng.uniform(-50, 2000), rng.uniform(-50, 1200), Button::left,
                           static_cast<Action>(rng.index(4))});
        }
        const auto norm = normalize(raw, 1920, 1080);
        for (std::size_t i = 1; i < norm.size(); ++i) CHECK(norm[i].t > norm[i - 1].t);
        for (const auto& e : norm) {
            CHECK(e.x >= 0.0);
            CHECK(e.x <= 1.0);
            CHECK(e.y >= 0.0);
            CHECK(e.y <= 1.0);
        }
    }
}

TEST_CASE("synth_user is deterministic for 100 random draws") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = fixtures::random_params(rng);
        const auto seed = rng.next_u64();
        const auto a = synth_user(p, seed, 5.0);
        const auto b = synth_user(p, seed, 5.0);
        REQUIRE(a == b);
        std::ostringstream sa, sb;
        write_canonical_log(sa, a);
        write_canonical_log(sb, b);
        CHECK(sa.str() == sb.str());
    }
}

TEST_CASE("synthetic stream with pauses segments into several pieces") {
    SynthParams p;
    p.pause_rate = 20;
    p.pause_len = 0.8;
    const auto session = fixtures::synth_session(7, 60.0, p);
    const auto ref = oracle::reference_preprocess(session, {});
    CHECK(ref.raw_segments.size() >= 2);
}

TEST_CASE("faster users move faster") {
    SynthParams slow, fast;
    slow.mean_speed = 0.2;
    fast.mean_speed = 1.0;
    auto mean_abs_vx = [](const Session& s) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 1; i < s.size(); ++i) {
            const double dt = s[i].t - s[i - 1].t;
            if (dt > 0.3) continue;
            sum += std::abs(s[i].x - s[i - 1].x) / dt;
            ++n;
        }
        return sum / static_cast<double>(n);
    };
    CHECK(mean_abs_vx(fixtures::synth_session(3, 60.0, fast)) > mean_abs_vx(fixtures::synth_session(3, 60.0, slow)));
}

TEST_CASE("synth params validation") {
    SynthParams p;
    p.sample_hz = 10;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.curvature = 0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("load_dataset") {
    const auto dir = scratch_dir("load");
    {
        std::ofstream(dir / "a.csv") << "t,x,y,button,action\n0.0,10,10,none,move\n0.01,20,20,none,move\n";
        std::ofstream(dir / "b.csv") << "0.0,10,10,none,move\n";
    }
    SUBCASE("two users with one session each") {
        std::ofstream(dir / "m.json") << R"({"users":[
            {"user_id":"A","resolution":[100,100],"schema":"canonical","sessions":["a.csv"]},
            {"user_id":"B","resolution":[100,100],"schema":"canonical","sessions":["b.csv"]}]})";
        LoadStats st;
        const auto users = load_dataset(dir / "m.json", &st);
        REQUIRE(users.size() == 2);
        CHECK(users[0].sessions.size() == 1);
        CHECK(users[1].sessions.size() == 1);
        CHECK(users[0].sessions[0][1].x == doctest::Approx(0.2));
        CHECK(st.events == 3);
    }
    SUBCASE("missing file names the path") {
        std::ofstream(dir / "m.json") << R"({"users":[{"user_id":"A","resolution":[100,100],"schema":"canonical","sessions":["nope.csv"]}]})";
        try {
            load_dataset(dir / "m.json");
            FAIL("expected MissingFile");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MissingFile);
            CHECK(std::string(e.what()).find("nope.csv") != std::string::npos);
        }
    }
    SUBCASE("unknown schema") {
        std::ofstream(dir / "m.json") << R"({"users":[{"user_id":"A","schema":"weird","sessions":["a.csv"]}]})";
        CHECK_THROWS_AS(load_dataset(dir / "m.json"), Error);
    }
    SUBCASE("synthetic manifest of ten users") {
        nlohmann::json m = {{"seed", 3}, {"users", nlohmann::json::array()}};
        for (int u = 0; u < 10; ++u)
            m["users"].push_back({{"user_id", "s" + std::to_string(u)}, {"synth", {{"mean_speed", 0.3 + 0.1 * u}, {"duration", 5}}}});
        std::ofstream(dir / "m.json") << m.dump();
        const auto users = load_dataset(dir / "m.json");
        REQUIRE(users.size() == 10);
        for (const auto& u : users) CHECK(u.source_tag == SourceTag::synthetic);
    }
    SUBCASE("empty session files are skipped") {
        std::ofstream(dir / "empty.csv") << "t,x,y,button,action\n";
        std::ofstream(dir / "m.json") << R"({"users":[{"user_id":"A","sessions":["empty.csv","a.csv"]}]})";
        LoadStats st;
        const auto users = load_dataset(dir / "m.json", &st);
        CHECK(users[0].sessions.size() == 1);
        CHECK(st.empty_sessions == 1);
    }
    std::filesystem::remove_all(dir);
}
