#include "spikepoint/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spikepoint/errors.hpp"

namespace spikepoint {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_str(const std::string& key, const std::string& def) const {
    read_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const char* s = it->second.c_str();
    char* end = nullptr;
    long long v = std::strtoll(s, &end, 10);
    if (end == s || *end != '\0') {
        throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
    }
    return static_cast<int64_t>(v);
}

double Config::get_double(const std::string& key, double def) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const char* s = it->second.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0') {
        throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
    }
    return v;
}

bool Config::get_bool(const std::string& key, bool def) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

uint64_t Config::get_seed(const std::string& key, uint64_t def) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const char* s = it->second.c_str();
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') {
        throw ConfigError("config key '" + key + "': expected seed integer, got '" + it->second +
                          "'");
    }
    return static_cast<uint64_t>(v);
}

std::string Config::get_enum(const std::string& key, const std::string& def,
                             const std::vector<std::string>& allowed) const {
    std::string v = get_str(key, def);
    for (const auto& a : allowed) {
        if (v == a) return v;
    }
    std::string opts;
    for (size_t i = 0; i < allowed.size(); ++i) {
        if (i) opts += ", ";
        opts += allowed[i];
    }
    throw ConfigError("config key '" + key + "': '" + v + "' is not one of {" + opts + "}");
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

void Config::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << serialize();
}

std::vector<std::string> Config::unread_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (!read_.count(k)) out.push_back(k);
    }
    return out;
}

void Config::mark_all_read() const {
    for (const auto& [k, v] : values_) read_.insert(k);
}

}  // namespace spikepoint
