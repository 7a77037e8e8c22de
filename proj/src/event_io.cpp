#include "spikepoint/event_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "spikepoint/rng.hpp"

namespace spikepoint {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (static_cast<uint16_t>(p[1]) << 8));
}

uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

// Parse an unsigned decimal field of a CSV line; advances *pos.
uint64_t parse_field(std::span<const uint8_t> bytes, size_t& pos, size_t line_start) {
    size_t start = pos;
    uint64_t v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        v = v * 10 + static_cast<uint64_t>(bytes[pos] - '0');
        ++pos;
    }
    if (pos == start) {
        throw ParseError("csv: expected unsigned integer field", line_start + (pos - line_start));
    }
    return v;
}

EventStream parse_csv(std::span<const uint8_t> bytes, uint16_t width, uint16_t height) {
    EventStream stream;
    stream.width = width;
    stream.height = height;

    size_t pos = 0;
    bool first_line = true;
    while (pos < bytes.size()) {
        size_t line_start = pos;
        size_t line_end = pos;
        while (line_end < bytes.size() && bytes[line_end] != '\n') ++line_end;
        size_t content_end = line_end;
        while (content_end > line_start && (bytes[content_end - 1] == '\r')) --content_end;

        if (content_end == line_start) {  // blank line
            pos = line_end + 1;
            continue;
        }
        if (first_line) {
            first_line = false;
            static const char header[] = "t,x,y,p";
            if (content_end - line_start == sizeof(header) - 1 &&
                std::memcmp(bytes.data() + line_start, header, sizeof(header) - 1) == 0) {
                pos = line_end + 1;
                continue;
            }
        }

        size_t cursor = line_start;
        auto expect_comma = [&](void) {
            if (cursor >= content_end || bytes[cursor] != ',') {
                throw ParseError("csv: expected ','", cursor);
            }
            ++cursor;
        };
        uint64_t t = parse_field(bytes, cursor, line_start);
        expect_comma();
        uint64_t x = parse_field(bytes, cursor, line_start);
        expect_comma();
        uint64_t y = parse_field(bytes, cursor, line_start);
        expect_comma();
        uint64_t p = parse_field(bytes, cursor, line_start);
        if (cursor != content_end) throw ParseError("csv: trailing characters on line", cursor);
        if (p > 1) throw ParseError("csv: polarity must be 0 or 1", line_start);
        if (x >= width || y >= height) {
            throw ParseError("csv: event coordinates outside sensor bounds", line_start);
        }
        stream.events.push_back(Event{t, static_cast<uint16_t>(x), static_cast<uint16_t>(y),
                                      static_cast<uint8_t>(p)});
        pos = line_end + 1;
    }
    return stream;
}

EventStream parse_packed(std::span<const uint8_t> bytes) {
    if (bytes.size() < kPackedHeaderSize) {
        throw ParseError("packed: truncated header", bytes.size());
    }
    if (std::memcmp(bytes.data(), kPackedMagic, 4) != 0) {
        throw ParseError("packed: bad magic (expected EVS1)", 0);
    }
    EventStream stream;
    stream.width = get_u16(bytes.data() + 4);
    stream.height = get_u16(bytes.data() + 6);
    uint64_t count = get_u64(bytes.data() + 8);
    if (stream.width == 0 || stream.height == 0) {
        throw ConfigError("packed: sensor width/height must be nonzero");
    }
    size_t need = kPackedHeaderSize + count * kPackedRecordSize;
    if (bytes.size() < need) {
        throw ParseError("packed: truncated event payload", bytes.size());
    }
    if (bytes.size() > need) {
        throw ParseError("packed: trailing bytes after event payload", need);
    }
    stream.events.reserve(count);
    const uint8_t* p = bytes.data() + kPackedHeaderSize;
    for (uint64_t i = 0; i < count; ++i, p += kPackedRecordSize) {
        Event e;
        e.t = get_u64(p);
        e.x = get_u16(p + 8);
        e.y = get_u16(p + 10);
        e.p = p[12];
        if (e.p > 1) {
            throw ParseError("packed: polarity must be 0 or 1",
                             kPackedHeaderSize + i * kPackedRecordSize + 12);
        }
        if (e.x >= stream.width || e.y >= stream.height) {
            throw ParseError("packed: event coordinates outside sensor bounds",
                             kPackedHeaderSize + i * kPackedRecordSize);
        }
        stream.events.push_back(e);
    }
    return stream;
}

}  // namespace

EventStream parse_events(std::span<const uint8_t> bytes, EventFormat format, uint16_t width,
                         uint16_t height) {
    EventStream stream;
    if (format == EventFormat::csv) {
        if (width == 0 || height == 0) {
            throw ConfigError("csv parsing requires nonzero sensor width/height");
        }
        stream = parse_csv(bytes, width, height);
    } else {
        stream = parse_packed(bytes);
    }
    if (!std::is_sorted(stream.events.begin(), stream.events.end(),
                        [](const Event& a, const Event& b) { return a.t < b.t; })) {
        std::stable_sort(stream.events.begin(), stream.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
    }
    return stream;
}

std::vector<uint8_t> write_events(const EventStream& stream, EventFormat format) {
    std::vector<uint8_t> out;
    if (format == EventFormat::csv) {
        for (const Event& e : stream.events) {
            std::string line = std::to_string(e.t) + "," + std::to_string(e.x) + "," +
                               std::to_string(e.y) + "," + std::to_string(e.p) + "\n";
            out.insert(out.end(), line.begin(), line.end());
        }
        return out;
    }
    out.reserve(kPackedHeaderSize + stream.events.size() * kPackedRecordSize);
    out.insert(out.end(), kPackedMagic, kPackedMagic + 4);
    put_u16(out, stream.width);
    put_u16(out, stream.height);
    put_u64(out, stream.events.size());
    for (const Event& e : stream.events) {
        put_u64(out, e.t);
        put_u16(out, e.x);
        put_u16(out, e.y);
        out.push_back(e.p);
    }
    return out;
}

EventStream read_stream_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open event file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return parse_events(bytes, EventFormat::packed);
}

void write_stream_file(const EventStream& stream, const std::string& path) {
    std::vector<uint8_t> bytes = write_events(stream, EventFormat::packed);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write event file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<WindowClip> slice_windows(const EventStream& stream, uint64_t window_us,
                                      uint64_t overlap_us, int source_id) {
    if (window_us == 0) throw ConfigError("window length must be positive");
    if (overlap_us >= window_us) throw ConfigError("window overlap must be smaller than length");
    std::vector<WindowClip> clips;
    if (stream.events.empty()) return clips;

    uint64_t stride = window_us - overlap_us;
    uint64_t t0 = stream.events.front().t;
    uint64_t t_last = stream.events.back().t;
    uint64_t span = t_last - t0;
    if (span < window_us) return clips;

    size_t lo = 0;  // first event with t >= start
    for (uint64_t start = t0; start + window_us <= t_last; start += stride) {
        while (lo < stream.events.size() && stream.events[lo].t < start) ++lo;
        size_t hi = lo;
        while (hi < stream.events.size() && stream.events[hi].t < start + window_us) ++hi;
        WindowClip clip;
        clip.t_start = start;
        clip.t_end = start + window_us;
        clip.source_id = source_id;
        clip.events.assign(stream.events.begin() + static_cast<ptrdiff_t>(lo),
                           stream.events.begin() + static_cast<ptrdiff_t>(hi));
        clips.push_back(std::move(clip));
    }
    return clips;
}

PointSample normalize_window(const WindowClip& clip, uint16_t width, uint16_t height) {
    if (clip.events.empty()) throw DegenerateInputError("normalize_window: empty clip");
    if (width < 2 || height < 2) {
        throw ConfigError("normalize_window: sensor must be at least 2x2");
    }
    PointSample out;
    out.n = static_cast<int64_t>(clip.events.size());
    out.xyz.resize(static_cast<size_t>(out.n) * 3);
    double inv_w = 1.0 / static_cast<double>(width - 1);
    double inv_h = 1.0 / static_cast<double>(height - 1);
    double inv_l = 1.0 / static_cast<double>(clip.t_end - clip.t_start);
    for (int64_t i = 0; i < out.n; ++i) {
        const Event& e = clip.events[static_cast<size_t>(i)];
        out.xyz[static_cast<size_t>(3 * i)] = e.x * inv_w;
        out.xyz[static_cast<size_t>(3 * i + 1)] = e.y * inv_h;
        out.xyz[static_cast<size_t>(3 * i + 2)] =
            static_cast<double>(e.t - clip.t_start) * inv_l;
    }
    return out;
}

const char* motion_class_name(MotionClass c) {
    switch (c) {
        case MotionClass::translating_blob: return "translating_blob";
        case MotionClass::rotating_dipole: return "rotating_dipole";
        case MotionClass::expanding_ring: return "expanding_ring";
        case MotionClass::zigzag: return "zigzag";
    }
    return "?";
}

MotionClass motion_class_from_name(const std::string& name) {
    if (name == "translating_blob") return MotionClass::translating_blob;
    if (name == "rotating_dipole") return MotionClass::rotating_dipole;
    if (name == "expanding_ring") return MotionClass::expanding_ring;
    if (name == "zigzag") return MotionClass::zigzag;
    throw ConfigError("unknown motion class: " + name);
}

namespace {

struct Vec2 {
    double x, y;
};

// Center of the moving pattern at normalized time z in [0, 1).
Vec2 class_center(MotionClass c, double z, double w, double h) {
    switch (c) {
        case MotionClass::translating_blob:
            return {w * (0.25 + 0.5 * z), h * (0.25 + 0.5 * z)};
        case MotionClass::rotating_dipole:
        case MotionClass::expanding_ring:
            return {0.5 * w, 0.5 * h};
        case MotionClass::zigzag: {
            // x sweeps once; y is a triangle wave with three periods.
            double phase = std::fmod(3.0 * z, 1.0);
            double tri = phase < 0.5 ? 2.0 * phase : 2.0 - 2.0 * phase;
            return {w * (0.15 + 0.7 * z), h * (0.25 + 0.5 * tri)};
        }
    }
    return {0.5 * w, 0.5 * h};
}

// Draw an (x, y) position for one event of class c at normalized time z.
Vec2 class_sample(MotionClass c, double z, double w, double h, Rng& rng) {
    double scale = std::min(w, h);
    Vec2 ctr = class_center(c, z, w, h);
    switch (c) {
        case MotionClass::translating_blob:
        case MotionClass::zigzag: {
            // uniform disc, radius 0.06 * scale
            double r = 0.06 * scale * std::sqrt(rng.uniform01());
            double a = rng.uniform(0.0, 2.0 * M_PI);
            return {ctr.x + r * std::cos(a), ctr.y + r * std::sin(a)};
        }
        case MotionClass::rotating_dipole: {
            double theta = 2.0 * M_PI * z + (rng.uniform01() < 0.5 ? 0.0 : M_PI);
            double arm = 0.25 * scale;
            double r = 0.05 * scale * std::sqrt(rng.uniform01());
            double a = rng.uniform(0.0, 2.0 * M_PI);
            return {ctr.x + arm * std::cos(theta) + r * std::cos(a),
                    ctr.y + arm * std::sin(theta) + r * std::sin(a)};
        }
        case MotionClass::expanding_ring: {
            double radius = (0.08 + 0.32 * z) * scale;
            double a = rng.uniform(0.0, 2.0 * M_PI);
            double jitter = rng.uniform(-0.02, 0.02) * scale;
            return {ctr.x + (radius + jitter) * std::cos(a),
                    ctr.y + (radius + jitter) * std::sin(a)};
        }
    }
    return ctr;
}

}  // namespace

std::vector<EventStream> synth_generate(const SynthSpec& spec, uint64_t seed) {
    if (spec.classes.size() < 2) throw ConfigError("synth: need at least 2 classes");
    if (spec.duration_us == 0) throw ConfigError("synth: duration must be positive");
    if (spec.rate_hz <= 0.0) throw ConfigError("synth: event rate must be positive");
    if (spec.width < 2 || spec.height < 2) throw ConfigError("synth: sensor too small");

    std::vector<EventStream> streams;
    double duration_s = static_cast<double>(spec.duration_us) * 1e-6;
    double w = spec.width;
    double h = spec.height;

    for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
        for (int si = 0; si < spec.streams_per_class; ++si) {
            Rng rng(counter_hash(seed, ci, static_cast<uint64_t>(si)));
            EventStream stream;
            stream.width = spec.width;
            stream.height = spec.height;
            stream.label = static_cast<int>(ci);

            uint64_t n_signal = rng.poisson(spec.rate_hz * duration_s);
            for (uint64_t i = 0; i < n_signal; ++i) {
                uint64_t t = static_cast<uint64_t>(rng.uniform01() *
                                                   static_cast<double>(spec.duration_us));
                double z = static_cast<double>(t) / static_cast<double>(spec.duration_us);
                Vec2 p = class_sample(spec.classes[ci], z, w, h, rng);
                long px = std::lround(p.x);
                long py = std::lround(p.y);
                if (px < 0 || py < 0 || px >= spec.width || py >= spec.height) continue;
                stream.events.push_back(Event{t, static_cast<uint16_t>(px),
                                              static_cast<uint16_t>(py),
                                              static_cast<uint8_t>(rng.uniform01() < 0.5)});
            }
            uint64_t n_noise = spec.noise_rate_hz > 0.0
                                   ? rng.poisson(spec.noise_rate_hz * duration_s)
                                   : 0;
            for (uint64_t i = 0; i < n_noise; ++i) {
                uint64_t t = static_cast<uint64_t>(rng.uniform01() *
                                                   static_cast<double>(spec.duration_us));
                stream.events.push_back(
                    Event{t, static_cast<uint16_t>(rng.below(spec.width)),
                          static_cast<uint16_t>(rng.below(spec.height)),
                          static_cast<uint8_t>(rng.uniform01() < 0.5)});
            }
            std::stable_sort(stream.events.begin(), stream.events.end(),
                             [](const Event& a, const Event& b) { return a.t < b.t; });
            streams.push_back(std::move(stream));
        }
    }
    return streams;
}

EventStream denoise(const EventStream& stream, int radius_px, uint64_t dt_us, int k_min) {
    if (radius_px < 1) throw ConfigError("denoise: radius must be >= 1");
    if (dt_us == 0) throw ConfigError("denoise: time window must be positive");
    if (k_min < 1) throw ConfigError("denoise: k_min must be >= 1");

    // Iterate the support filter to a fixed point so the result is stable
    // under re-application.
    std::vector<Event> kept = stream.events;
    while (true) {
        std::vector<Event> next;
        next.reserve(kept.size());
        size_t lo = 0;
        for (size_t i = 0; i < kept.size(); ++i) {
            const Event& e = kept[i];
            while (lo < kept.size() && kept[lo].t + dt_us < e.t) ++lo;
            int count = 0;
            for (size_t j = lo; j < kept.size() && kept[j].t <= e.t + dt_us; ++j) {
                if (j == i) continue;
                int dx = std::abs(static_cast<int>(kept[j].x) - static_cast<int>(e.x));
                int dy = std::abs(static_cast<int>(kept[j].y) - static_cast<int>(e.y));
                if (std::max(dx, dy) <= radius_px) {
                    if (++count >= k_min) break;
                }
            }
            if (count >= k_min) next.push_back(e);
        }
        bool converged = next.size() == kept.size();
        kept = std::move(next);
        if (converged) break;
    }

    EventStream out;
    out.width = stream.width;
    out.height = stream.height;
    out.label = stream.label;
    out.events = std::move(kept);
    return out;
}

}  // namespace spikepoint
