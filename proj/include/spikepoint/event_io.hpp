#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikepoint/errors.hpp"

namespace spikepoint {

// One sensor event: timestamp (us), pixel, polarity.
struct Event {
    uint64_t t = 0;
    uint16_t x = 0;
    uint16_t y = 0;
    uint8_t p = 0;

    bool operator==(const Event&) const = default;
};

struct EventStream {
    uint16_t width = 0;
    uint16_t height = 0;
    std::vector<Event> events;
    int label = -1;

    bool operator==(const EventStream&) const = default;
};

// Contiguous slice of a parent stream covering [t_start, t_end).
struct WindowClip {
    uint64_t t_start = 0;
    uint64_t t_end = 0;
    std::vector<Event> events;
    int source_id = -1;
};

// n x 3 row-major matrix of [x, y, z] coordinates in the unit cube.
struct PointMatrix {
    int64_t n = 0;
    std::vector<double> xyz;

    double x(int64_t i) const { return xyz[static_cast<size_t>(3 * i)]; }
    double y(int64_t i) const { return xyz[static_cast<size_t>(3 * i + 1)]; }
    double z(int64_t i) const { return xyz[static_cast<size_t>(3 * i + 2)]; }
    double coord(int64_t i, int c) const { return xyz[static_cast<size_t>(3 * i + c)]; }
};

using PointSample = PointMatrix;  // variable row count, pre-sampling
using PointSet = PointMatrix;     // fixed N rows, post-sampling

enum class EventFormat { csv, packed };

// Packed container: 16-byte header (magic "EVS1", u16 width, u16 height,
// u64 count, little-endian) then 13-byte records (u64 t, u16 x, u16 y, u8 p).
inline constexpr char kPackedMagic[4] = {'E', 'V', 'S', '1'};
inline constexpr size_t kPackedHeaderSize = 16;
inline constexpr size_t kPackedRecordSize = 13;

// CSV parsing needs the sensor geometry supplied by the caller; the packed
// header carries its own.
EventStream parse_events(std::span<const uint8_t> bytes, EventFormat format,
                         uint16_t width = 0, uint16_t height = 0);
std::vector<uint8_t> write_events(const EventStream& stream, EventFormat format);

EventStream read_stream_file(const std::string& path);
void write_stream_file(const EventStream& stream, const std::string& path);

std::vector<WindowClip> slice_windows(const EventStream& stream, uint64_t window_us,
                                      uint64_t overlap_us, int source_id = -1);

PointSample normalize_window(const WindowClip& clip, uint16_t width, uint16_t height);

enum class MotionClass { translating_blob, rotating_dipole, expanding_ring, zigzag };

const char* motion_class_name(MotionClass c);
MotionClass motion_class_from_name(const std::string& name);

struct SynthSpec {
    std::vector<MotionClass> classes;
    int streams_per_class = 30;
    uint64_t duration_us = 1'000'000;
    double rate_hz = 20'000.0;        // signal event rate
    double noise_rate_hz = 0.0;       // uniform background rate
    uint16_t width = 128;
    uint16_t height = 128;
};

// Labeled synthetic streams; label = index into spec.classes.
std::vector<EventStream> synth_generate(const SynthSpec& spec, uint64_t seed);

// Neighborhood support filter: keep events with enough spatiotemporal
// neighbors, iterated to a fixed point so filtering is idempotent.
EventStream denoise(const EventStream& stream, int radius_px, uint64_t dt_us, int k_min);

}  // namespace spikepoint
