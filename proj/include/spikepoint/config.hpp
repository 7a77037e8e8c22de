#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace spikepoint {

// Line-oriented key=value configuration with dotted section keys
// (net.variant=small, group.M=64, ...) and '#' comments. Keys read through
// the typed getters are tracked so unknown keys can be reported.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config parse_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& def) const;
    int64_t get_int(const std::string& key, int64_t def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;
    uint64_t get_seed(const std::string& key, uint64_t def) const;

    // One of a fixed set of words; throws naming the key otherwise.
    std::string get_enum(const std::string& key, const std::string& def,
                         const std::vector<std::string>& allowed) const;

    // Sorted key=value lines; parse(serialize()) round-trips.
    std::string serialize() const;
    void write_file(const std::string& path) const;

    // Keys present but never read by any getter.
    std::vector<std::string> unread_keys() const;
    void mark_all_read() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> read_;
};

}  // namespace spikepoint
