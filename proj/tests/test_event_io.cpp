#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spikepoint/event_io.hpp"
#include "spikepoint/rng.hpp"

using namespace spikepoint;

namespace {

std::span<const uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

EventStream random_stream(uint64_t seed, size_t n, uint16_t w = 128, uint16_t h = 128) {
    Rng rng(seed);
    EventStream s;
    s.width = w;
    s.height = h;
    uint64_t t = 0;
    for (size_t i = 0; i < n; ++i) {
        t += rng.below(50);
        s.events.push_back(Event{t, static_cast<uint16_t>(rng.below(w)),
                                 static_cast<uint16_t>(rng.below(h)),
                                 static_cast<uint8_t>(rng.below(2))});
    }
    return s;
}

}  // namespace

TEST_CASE("csv parsing") {
    SUBCASE("empty body with optional header") {
        EventStream s = parse_events(as_bytes("t,x,y,p\n"), EventFormat::csv, 128, 128);
        CHECK(s.events.empty());
        CHECK(s.width == 128);
        CHECK(s.height == 128);
        CHECK(parse_events(as_bytes(""), EventFormat::csv, 128, 128).events.empty());
    }
    SUBCASE("single line maps fields directly") {
        EventStream s = parse_events(as_bytes("5,3,7,1\n"), EventFormat::csv, 128, 128);
        REQUIRE(s.events.size() == 1);
        CHECK(s.events[0] == Event{5, 3, 7, 1});
    }
    SUBCASE("unsorted input is stably sorted by t") {
        EventStream s =
            parse_events(as_bytes("9,1,1,0\n5,2,2,1\n9,3,3,0\n"), EventFormat::csv, 128, 128);
        REQUIRE(s.events.size() == 3);
        CHECK(s.events[0].t == 5);
        CHECK(s.events[1].x == 1);  // stable: first 9-stamped event kept ahead
        CHECK(s.events[2].x == 3);
    }
    SUBCASE("errors carry byte offsets and name the problem") {
        CHECK_THROWS_AS(parse_events(as_bytes("5,3\n"), EventFormat::csv, 128, 128), ParseError);
        CHECK_THROWS_AS(parse_events(as_bytes("5,3,7,2\n"), EventFormat::csv, 128, 128),
                        ParseError);
        CHECK_THROWS_AS(parse_events(as_bytes("5,200,7,1\n"), EventFormat::csv, 128, 128),
                        ParseError);  // x out of bounds for 128-wide sensor
        CHECK_THROWS_AS(parse_events(as_bytes("a,b,c,d\n"), EventFormat::csv, 128, 128),
                        ParseError);
        CHECK_THROWS_AS(parse_events(as_bytes("1,2,3,4\n"), EventFormat::csv, 0, 0), ConfigError);
        try {
            parse_events(as_bytes("5,3,7,1\nbroken\n"), EventFormat::csv, 128, 128);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() >= 8);  // offset points into the second line
        }
    }
    SUBCASE("csv output of one event") {
        EventStream s;
        s.width = 128;
        s.height = 128;
        s.events.push_back(Event{5, 3, 7, 1});
        std::vector<uint8_t> bytes = write_events(s, EventFormat::csv);
        CHECK(std::string(bytes.begin(), bytes.end()) == "5,3,7,1\n");
    }
}

TEST_CASE("packed format round trips bit-exactly") {
    SUBCASE("zero-event stream is a bare 16-byte header") {
        EventStream s;
        s.width = 64;
        s.height = 48;
        std::vector<uint8_t> bytes = write_events(s, EventFormat::packed);
        CHECK(bytes.size() == kPackedHeaderSize);
        EventStream back = parse_events(bytes, EventFormat::packed);
        CHECK(back == s);
    }
    SUBCASE("write(parse(b)) == b and parse(write(s)) == s for random streams") {
        EventStream s = random_stream(7, 1000);
        std::vector<uint8_t> b = write_events(s, EventFormat::packed);
        CHECK(b.size() == kPackedHeaderSize + 1000 * kPackedRecordSize);
        EventStream parsed = parse_events(b, EventFormat::packed);
        CHECK(parsed == s);
        CHECK(write_events(parsed, EventFormat::packed) == b);
    }
    SUBCASE("corrupt containers are rejected") {
        EventStream s = random_stream(11, 10);
        std::vector<uint8_t> b = write_events(s, EventFormat::packed);
        std::vector<uint8_t> bad_magic = b;
        bad_magic[0] = 'X';
        CHECK_THROWS_AS(parse_events(bad_magic, EventFormat::packed), ParseError);
        std::vector<uint8_t> truncated(b.begin(), b.end() - 5);
        CHECK_THROWS_AS(parse_events(truncated, EventFormat::packed), ParseError);
    }
}

TEST_CASE("slice_windows") {
    SUBCASE("10 s stream, L = 0.5 s, overlap = 0.25 s -> 39 windows") {
        EventStream s;
        s.width = s.height = 128;
        // events at exactly 0 and 10 s plus filler
        for (uint64_t t = 0; t <= 10'000'000; t += 10'000) {
            s.events.push_back(Event{t, 1, 1, 0});
        }
        auto clips = slice_windows(s, 500'000, 250'000);
        // brute-force enumeration of valid starts
        size_t expected = 0;
        for (uint64_t start = 0; start + 500'000 <= 10'000'000; start += 250'000) ++expected;
        CHECK(expected == 39);
        REQUIRE(clips.size() == 39);
        CHECK(clips.front().t_start == 0);
        CHECK(clips.back().t_start == 9'500'000);
        for (const auto& c : clips) {
            CHECK(c.t_end - c.t_start == 500'000);
            for (const auto& e : c.events) {
                CHECK(e.t >= c.t_start);
                CHECK(e.t < c.t_end);
            }
        }
    }
    SUBCASE("stream shorter than L gives no windows") {
        EventStream s = random_stream(3, 50);
        uint64_t span = s.events.back().t - s.events.front().t;
        CHECK(slice_windows(s, span + 1, 0).empty());
    }
    SUBCASE("overlap 0 and L = span gives exactly one window with every event") {
        EventStream s = random_stream(5, 100);
        uint64_t span = s.events.back().t - s.events.front().t;
        auto clips = slice_windows(s, span, 0);
        REQUIRE(clips.size() == 1);
        // half-open window [t0, t0+span) excludes events at exactly t_last
        size_t at_end = 0;
        for (const auto& e : s.events) {
            if (e.t == s.events.back().t) ++at_end;
        }
        CHECK(clips[0].events.size() == s.events.size() - at_end);
    }
    SUBCASE("overlap >= L is a configuration error") {
        EventStream s = random_stream(1, 10);
        CHECK_THROWS_AS(slice_windows(s, 100, 100), ConfigError);
        CHECK_THROWS_AS(slice_windows(s, 100, 150), ConfigError);
    }
    SUBCASE("count formula holds on 1000 random (span, L, overlap) triples") {
        Rng rng(99);
        for (int trial = 0; trial < 1000; ++trial) {
            uint64_t span = 1 + rng.below(100'000);
            uint64_t window = 1 + rng.below(20'000);
            uint64_t overlap = rng.below(window);
            uint64_t stride = window - overlap;

            EventStream s;
            s.width = s.height = 16;
            s.events.push_back(Event{1000, 0, 0, 0});
            for (int i = 0; i < 5; ++i) {
                s.events.push_back(Event{1000 + rng.below(span + 1), 1, 1, 0});
            }
            s.events.push_back(Event{1000 + span, 2, 2, 0});
            std::stable_sort(s.events.begin(), s.events.end(),
                             [](const Event& a, const Event& b) { return a.t < b.t; });

            size_t brute = 0;
            for (uint64_t start = 1000; start + window <= 1000 + span; start += stride) ++brute;
            size_t formula = span >= window ? (span - window) / stride + 1 : 0;
            auto clips = slice_windows(s, window, overlap);
            CHECK(clips.size() == brute);
            CHECK(clips.size() == formula);
        }
    }
}

TEST_CASE("normalize_window") {
    WindowClip clip;
    clip.t_start = 1000;
    clip.t_end = 2000;
    clip.events = {Event{1000, 0, 0, 1}, Event{1999, 127, 63, 0}, Event{1500, 64, 32, 1}};
    PointSample p = normalize_window(clip, 128, 64);
    REQUIRE(p.n == 3);
    CHECK(p.z(0) == doctest::Approx(0.0));           // event at t_start
    CHECK(p.z(1) == doctest::Approx(0.999));         // t_start + L - eps -> just below 1
    CHECK(p.z(1) < 1.0);
    CHECK(p.x(1) == doctest::Approx(1.0));           // corner pixel maps to exactly 1
    CHECK(p.y(1) == doctest::Approx(1.0));
    CHECK(p.x(0) == doctest::Approx(0.0));

    SUBCASE("all coordinates stay inside the unit cube") {
        EventStream s = random_stream(21, 5000);
        for (const auto& c : slice_windows(s, 5000, 1000)) {
            if (c.events.empty()) continue;
            PointSample q = normalize_window(c, s.width, s.height);
            for (int64_t i = 0; i < q.n; ++i) {
                for (int k = 0; k < 3; ++k) {
                    CHECK(q.coord(i, k) >= 0.0);
                    CHECK(q.coord(i, k) <= 1.0);
                }
            }
        }
    }
    SUBCASE("empty clip is degenerate") {
        WindowClip empty;
        empty.t_start = 0;
        empty.t_end = 100;
        CHECK_THROWS_AS(normalize_window(empty, 128, 128), DegenerateInputError);
    }
}

TEST_CASE("synth_generate") {
    SUBCASE("noise-free translating blob stays within its moving support") {
        SynthSpec spec;
        spec.classes = {MotionClass::translating_blob, MotionClass::expanding_ring};
        spec.streams_per_class = 1;
        spec.duration_us = 200'000;
        spec.rate_hz = 5000;
        spec.noise_rate_hz = 0;
        auto streams = synth_generate(spec, 5);
        const EventStream& blob = streams[0];
        REQUIRE(blob.label == 0);
        double w = spec.width, h = spec.height;
        double radius = 0.06 * std::min(w, h) + 1.0;  // disc radius plus rounding
        for (const auto& e : blob.events) {
            double z = static_cast<double>(e.t) / static_cast<double>(spec.duration_us);
            double cx = w * (0.25 + 0.5 * z);
            double cy = h * (0.25 + 0.5 * z);
            double dist = std::hypot(e.x - cx, e.y - cy);
            CHECK(dist <= radius);
        }
    }
    SUBCASE("same seed gives byte-identical streams") {
        SynthSpec spec;
        spec.classes = {MotionClass::rotating_dipole, MotionClass::zigzag};
        spec.streams_per_class = 2;
        spec.duration_us = 100'000;
        spec.rate_hz = 3000;
        spec.noise_rate_hz = 500;
        auto a = synth_generate(spec, 123);
        auto b = synth_generate(spec, 123);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(write_events(a[i], EventFormat::packed) ==
                  write_events(b[i], EventFormat::packed));
        }
        auto c = synth_generate(spec, 124);
        CHECK(write_events(a[0], EventFormat::packed) !=
              write_events(c[0], EventFormat::packed));
    }
    SUBCASE("4 classes x 30 streams at 20 kHz for 1 s") {
        SynthSpec spec;
        spec.classes = {MotionClass::translating_blob, MotionClass::rotating_dipole,
                        MotionClass::expanding_ring, MotionClass::zigzag};
        spec.streams_per_class = 30;
        spec.duration_us = 1'000'000;
        spec.rate_hz = 20'000;
        spec.noise_rate_hz = 0;
        auto streams = synth_generate(spec, 77);
        REQUIRE(streams.size() == 120);
        // Poisson(20000): sd = sqrt(20000) ~ 141; allow 6 sd per stream, and
        // note some events fall off-sensor and are dropped.
        double total = 0.0;
        for (const auto& s : streams) {
            CHECK(s.events.size() > 20'000 - 6 * 141);
            CHECK(s.events.size() < 20'000 + 6 * 141);
            total += static_cast<double>(s.events.size());
        }
        double mean = total / 120.0;
        CHECK(mean == doctest::Approx(20'000).epsilon(0.02));
    }
    SUBCASE("bad specs are configuration errors") {
        SynthSpec spec;
        spec.classes = {MotionClass::zigzag};
        CHECK_THROWS_AS(synth_generate(spec, 1), ConfigError);  // < 2 classes
        spec.classes = {MotionClass::zigzag, MotionClass::expanding_ring};
        spec.duration_us = 0;
        CHECK_THROWS_AS(synth_generate(spec, 1), ConfigError);
        spec.duration_us = 1000;
        spec.rate_hz = 0;
        CHECK_THROWS_AS(synth_generate(spec, 1), ConfigError);
    }
}

namespace {

// Quadratic reference: same keep-iff-k-neighbors fixpoint, no windowing.
EventStream denoise_brute(const EventStream& stream, int radius, uint64_t dt, int k_min) {
    std::vector<Event> kept = stream.events;
    while (true) {
        std::vector<Event> next;
        for (size_t i = 0; i < kept.size(); ++i) {
            int count = 0;
            for (size_t j = 0; j < kept.size(); ++j) {
                if (i == j) continue;
                uint64_t tdiff = kept[i].t > kept[j].t ? kept[i].t - kept[j].t
                                                       : kept[j].t - kept[i].t;
                if (tdiff > dt) continue;
                int dx = std::abs(static_cast<int>(kept[i].x) - static_cast<int>(kept[j].x));
                int dy = std::abs(static_cast<int>(kept[i].y) - static_cast<int>(kept[j].y));
                if (std::max(dx, dy) <= radius) ++count;
            }
            if (count >= k_min) next.push_back(kept[i]);
        }
        bool done = next.size() == kept.size();
        kept = std::move(next);
        if (done) break;
    }
    EventStream out = stream;
    out.events = std::move(kept);
    return out;
}

}  // namespace

TEST_CASE("denoise") {
    SUBCASE("isolated event is removed") {
        EventStream s;
        s.width = s.height = 64;
        s.events = {Event{100, 10, 10, 0}};
        CHECK(denoise(s, 2, 1000, 1).events.empty());
    }
    SUBCASE("dense co-located burst survives") {
        EventStream s;
        s.width = s.height = 64;
        for (int i = 0; i < 10; ++i) {
            s.events.push_back(Event{static_cast<uint64_t>(100 + i), 10, 10, 0});
        }
        CHECK(denoise(s, 1, 1000, 3).events.size() == 10);
    }
    SUBCASE("matches the quadratic reference on 500 random events") {
        EventStream s = random_stream(31, 500, 32, 32);
        EventStream fast = denoise(s, 2, 60, 2);
        EventStream brute = denoise_brute(s, 2, 60, 2);
        CHECK(fast.events == brute.events);
    }
    SUBCASE("idempotent") {
        for (uint64_t seed : {41ull, 42ull, 43ull}) {
            EventStream s = random_stream(seed, 400, 24, 24);
            EventStream once = denoise(s, 1, 40, 2);
            EventStream twice = denoise(once, 1, 40, 2);
            CHECK(once.events == twice.events);
        }
    }
    SUBCASE("order is preserved") {
        EventStream s = random_stream(55, 300, 16, 16);
        EventStream out = denoise(s, 2, 100, 1);
        CHECK(std::is_sorted(out.events.begin(), out.events.end(),
                             [](const Event& a, const Event& b) { return a.t < b.t; }));
    }
}
