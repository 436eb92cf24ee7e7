#include "posestitch/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace posestitch {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str(), path);
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config", origin + ":" + std::to_string(lineno) +
                                            ": expected 'key = value'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config",
                              origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values[key] = value;
    }
    return cfg;
}

std::string RunConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

std::string RunConfig::require_str(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end() || it->second.empty()) throw ConfigError(key, "is required");
    return it->second;
}

long RunConfig::get_int(const std::string& key, long fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t used = 0;
        long v = std::stol(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + it->second + "'");
    }
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + it->second + "'");
    }
}

std::uint64_t RunConfig::seed() const {
    const char* env = std::getenv("POSESTITCH_SEED");
    std::string text = env ? std::string(env) : get_str("seed", "0");
    try {
        // stoull would wrap a leading minus instead of failing.
        if (text.find('-') != std::string::npos) throw std::invalid_argument("negative");
        std::size_t used = 0;
        unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return std::uint64_t(v);
    } catch (const std::exception&) {
        throw ConfigError(env ? "POSESTITCH_SEED" : "seed",
                          "expected a nonnegative integer, got '" + text + "'");
    }
}

void RunConfig::require_path_exists(const std::string& key) const {
    std::string p = require_str(key);
    if (!std::filesystem::exists(p)) throw ConfigError(key, "path '" + p + "' does not exist");
}

}  // namespace posestitch
