#pragma once

// Flat `key = value` run configuration with command-line overrides and an
// environment seed override. Typed getters raise ConfigError with the
// offending field name, which the CLI maps to exit code 1.

#include "posestitch/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace posestitch {

struct RunConfig {
    std::map<std::string, std::string> values;

    // Lines are `key = value`; blank lines and lines starting with '#' are
    // skipped. Later assignments win.
    static RunConfig load(const std::string& path);
    static RunConfig from_text(const std::string& text, const std::string& origin);

    void set(const std::string& key, const std::string& value) { values[key] = value; }
    bool has(const std::string& key) const { return values.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;

    // Config seed (key "seed", default 0), overridden by POSESTITCH_SEED
    // when that variable is set.
    std::uint64_t seed() const;

    // Raises ConfigError unless the path under `key` exists on disk.
    void require_path_exists(const std::string& key) const;
};

}  // namespace posestitch
