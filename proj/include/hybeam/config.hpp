#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hybeam/errors.hpp"

namespace hybeam {

// Flat `key = value` text config with `#` comments.
class Config {
public:
    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_string(buf.str(), path);
    }

    static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const {
        const std::string s = get_string(key);
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not an integer: " + s);
        }
    }
    long get_int(const std::string& key, long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = get_string(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("config key '" + key + "' is not a boolean: " + s);
    }

    // Either a comma list "a,b,c" or a range "start:step:stop" (inclusive).
    std::vector<double> get_double_list(const std::string& key) const {
        const std::string s = get_string(key);
        std::vector<double> out;
        if (s.find(':') != std::string::npos) {
            const auto first = s.find(':');
            const auto second = s.find(':', first + 1);
            if (second == std::string::npos)
                throw ConfigError("range for '" + key + "' must be start:step:stop");
            const double start = to_double(key, trim(s.substr(0, first)));
            const double step = to_double(key, trim(s.substr(first + 1, second - first - 1)));
            const double stop = to_double(key, trim(s.substr(second + 1)));
            if (step == 0.0) throw ConfigError("range step for '" + key + "' must be nonzero");
            const double dir = (step > 0.0) ? 1.0 : -1.0;
            for (double v = start; dir * (v - stop) <= 1e-9; v += step) out.push_back(v);
        } else {
            std::istringstream in(s);
            std::string item;
            while (std::getline(in, item, ',')) {
                const std::string t = trim(item);
                if (!t.empty()) out.push_back(to_double(key, t));
            }
        }
        if (out.empty()) throw ConfigError("config key '" + key + "' has no values");
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        auto begin = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
        auto end = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
        return (begin < end) ? std::string(begin, end) : std::string();
    }

    static double to_double(const std::string& key, const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not a number: " + s);
        }
    }

    std::map<std::string, std::string> values_;
};

} // namespace hybeam
